//! The discrete coagulation–fragmentation chain on the scaled integer simplex.
//!
//! States are occupation vectors `(n_1, ..., n_N)` of `n` indivisible coins.
//! One step picks an ordered pair `(i, j)`, pools the two pockets, and splits
//! the pool again: the new `n_i` is uniform on `{0, ..., pool - 1}` and `j`
//! keeps the remainder, so the agent picked second never leaves with nothing.
//! A pair whose second pocket is empty stands pat. That self-loop is exactly
//! what makes the transition matrix doubly stochastic, hence the invariant
//! distribution uniform; letting such a pair fragment would inflate the
//! columns of states that can be reached from both empty and non-empty
//! second pockets (see the `unprotected_rule_is_not_doubly_stochastic` test).
//!
//! The module provides the step kernel, the exact transition probability, a
//! perfect lexicographic ranking of the state space, and dense-matrix oracles
//! (power iteration, row/column sums) sized for exhaustive verification.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// Largest state space `enumerate_states` and the matrix builders accept.
pub const DEFAULT_STATE_CAP: u64 = 1_000_000;

/// Iteration budget for the power-iteration solvers.
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// An occupation vector of the discrete simplex: counts summing to `total`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscretePoint {
    counts: Vec<u64>,
    total: u64,
}

impl DiscretePoint {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidDimension(counts.len()));
        }
        let total = counts.iter().sum();
        Ok(Self { counts, total })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, i: usize) -> u64 {
        self.counts[i]
    }

    /// The wealth fractions `n_i / n`; requires at least one coin.
    pub fn to_simplex(&self) -> Result<SimplexPoint> {
        SimplexPoint::new(self.counts.iter().map(|&c| c as f64).collect())
    }
}

/// What one pair move did: the ordered pair and the post-move pocket contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DdStepRecord {
    pub i: usize,
    pub j: usize,
    pub new_i: u64,
    pub new_j: u64,
}

/// Advances the chain by one pair move, mutating `state` in place.
pub fn dd_step<R: Rng + ?Sized>(state: &mut DiscretePoint, rng: &mut R) -> DdStepRecord {
    let n = state.counts.len();
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    if state.counts[j] == 0 {
        return DdStepRecord {
            i,
            j,
            new_i: state.counts[i],
            new_j: 0,
        };
    }
    let pooled = state.counts[i] + state.counts[j];
    let new_i = rng.gen_range(0..pooled);
    let new_j = pooled - new_i;
    state.counts[i] = new_i;
    state.counts[j] = new_j;
    DdStepRecord { i, j, new_i, new_j }
}

/// Runs `steps` pair moves and returns every `thin`-th state, starting with
/// the initial one.
pub fn run_dd<R: Rng + ?Sized>(
    initial: &DiscretePoint,
    steps: u64,
    thin: u64,
    rng: &mut R,
) -> Result<Vec<DiscretePoint>> {
    if thin == 0 {
        return Err(Error::InvalidParams("thin must be at least 1".into()));
    }
    let mut state = initial.clone();
    let mut out = Vec::with_capacity((steps / thin + 1) as usize);
    out.push(state.clone());
    for t in 1..=steps {
        dd_step(&mut state, rng);
        if t % thin == 0 {
            out.push(state.clone());
        }
    }
    Ok(out)
}

/// The exact one-step transition probability between two states.
///
/// Sums `1/(N(N-1))` times the per-pair move probability over all ordered
/// pairs: `1/(n_i + n_j)` for a genuine split landing on the target, or 1 for
/// the standing-pat branch when the second pocket is empty.
pub fn dd_transition_prob(from: &DiscretePoint, to: &DiscretePoint) -> Result<f64> {
    if from.dim() != to.dim() {
        return Err(Error::DimensionMismatch {
            left: from.dim(),
            right: to.dim(),
        });
    }
    if from.total != to.total {
        return Err(Error::TotalMismatch {
            left: from.total,
            right: to.total,
        });
    }
    let n = from.dim();
    let diff: Vec<usize> = (0..n).filter(|&k| from.counts[k] != to.counts[k]).collect();
    if diff.len() > 2 {
        return Ok(0.0);
    }
    let weight = 1.0 / (n * (n - 1)) as f64;
    let mut prob = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j || diff.iter().any(|&k| k != i && k != j) {
                continue;
            }
            // Totals and off-pair coordinates agree, so the pooled sums do too.
            debug_assert_eq!(from.counts[i] + from.counts[j], to.counts[i] + to.counts[j]);
            if from.counts[j] == 0 {
                if to.counts[i] == from.counts[i] && to.counts[j] == 0 {
                    prob += weight;
                }
            } else if to.counts[j] >= 1 {
                prob += weight / (from.counts[i] + from.counts[j]) as f64;
            }
        }
    }
    Ok(prob)
}

/// Number of states that reach `to` by a genuine coagulation–fragmentation
/// move of the ordered pair `(i, j)`: `(to_i + to_j) ∨ 1`.
///
/// The set is empty exactly when the split cannot end with an empty second
/// pocket, i.e. `to_j == 0` with `to_i >= 1`; that case is reported as an
/// error to keep it distinct from the singleton pool-of-zero case.
pub fn preimage_cardinality(to: &DiscretePoint, i: usize, j: usize) -> Result<u64> {
    let n = to.dim();
    if i == j || i >= n || j >= n {
        return Err(Error::Domain(format!(
            "pair indices must be distinct and within 0..{n}, got ({i}, {j})"
        )));
    }
    let pooled = to.counts[i] + to.counts[j];
    if pooled == 0 {
        return Ok(1);
    }
    if to.counts[j] == 0 {
        return Err(Error::EmptyPreimage { i, j });
    }
    Ok(pooled)
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for step in 1..=k {
        acc = acc.checked_mul((n - k + step) as u128)?;
        acc /= step as u128;
    }
    Some(acc)
}

/// Number of occupation vectors of `total` coins over `parts` pockets.
fn compositions(total: u64, parts: usize) -> Option<u128> {
    if parts == 0 {
        return Some(u128::from(total == 0));
    }
    binomial(total + parts as u64 - 1, parts as u64 - 1)
}

/// Size of the state space: `C(total + dim - 1, dim - 1)`.
pub fn state_count(dim: usize, total: u64) -> Result<u64> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    compositions(total, dim)
        .and_then(|c| u64::try_from(c).ok())
        .ok_or_else(|| Error::Domain("state count exceeds u64".into()))
}

/// All states in lexicographic order, refusing spaces larger than `cap`.
pub fn enumerate_states(dim: usize, total: u64, cap: u64) -> Result<Vec<DiscretePoint>> {
    let states = state_count(dim, total)?;
    if states > cap {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    let mut out = Vec::with_capacity(states as usize);
    let mut prefix = Vec::with_capacity(dim);
    fill_states(dim, total, &mut prefix, &mut out);
    Ok(out)
}

fn fill_states(dim: usize, remaining: u64, prefix: &mut Vec<u64>, out: &mut Vec<DiscretePoint>) {
    if prefix.len() == dim - 1 {
        prefix.push(remaining);
        out.push(DiscretePoint {
            counts: prefix.clone(),
            total: prefix.iter().sum(),
        });
        prefix.pop();
        return;
    }
    for v in 0..=remaining {
        prefix.push(v);
        fill_states(dim, remaining - v, prefix, out);
        prefix.pop();
    }
}

/// Lexicographic rank of a state, consistent with [`enumerate_states`].
///
/// Combinatorial number system: each position adds the number of completions
/// that start with a smaller value there.
pub fn rank_state(state: &DiscretePoint) -> Result<u64> {
    let dim = state.dim();
    let mut rank: u128 = 0;
    let mut remaining = state.total;
    for (p, &c) in state.counts.iter().enumerate().take(dim - 1) {
        let parts_after = dim - p - 1;
        for v in 0..c {
            rank += compositions(remaining - v, parts_after)
                .ok_or_else(|| Error::Domain("state count exceeds u64".into()))?;
        }
        remaining -= c;
    }
    u64::try_from(rank).map_err(|_| Error::Domain("state rank exceeds u64".into()))
}

/// Inverse of [`rank_state`].
pub fn unrank_state(dim: usize, total: u64, rank: u64) -> Result<DiscretePoint> {
    let states = state_count(dim, total)?;
    if rank >= states {
        return Err(Error::Domain(format!(
            "rank {rank} out of range for {states} states"
        )));
    }
    let mut counts = Vec::with_capacity(dim);
    let mut remaining = total;
    let mut rank = rank as u128;
    for p in 0..dim - 1 {
        let parts_after = dim - p - 1;
        let mut v = 0;
        loop {
            let block = compositions(remaining - v, parts_after)
                .ok_or_else(|| Error::Domain("state count exceeds u64".into()))?;
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        counts.push(v);
        remaining -= v;
    }
    counts.push(remaining);
    Ok(DiscretePoint { counts, total })
}

/// Draws a state uniformly from the discrete simplex by unranking a uniform
/// index, so the draw is exactly uniform rather than approximately so.
pub fn sample_uniform_state<R: Rng + ?Sized>(
    dim: usize,
    total: u64,
    rng: &mut R,
) -> Result<DiscretePoint> {
    let states = state_count(dim, total)?;
    unrank_state(dim, total, rng.gen_range(0..states))
}

/// The dense transition matrix over the lexicographically ordered states.
pub fn build_transition_matrix(
    dim: usize,
    total: u64,
    cap: u64,
) -> Result<(Vec<DiscretePoint>, Array2<f64>)> {
    let states = enumerate_states(dim, total, cap)?;
    let k = states.len();
    let mut matrix = Array2::zeros((k, k));
    for (a, from) in states.iter().enumerate() {
        for (b, to) in states.iter().enumerate() {
            matrix[(a, b)] = dd_transition_prob(from, to)?;
        }
    }
    Ok((states, matrix))
}

/// Power iteration from the uniform start; see
/// [`stationary_distribution_from`] for the stopping rule.
pub fn stationary_distribution(matrix: &Array2<f64>, tol: f64) -> Result<Vec<f64>> {
    let k = matrix.nrows();
    stationary_distribution_from(matrix, &vec![1.0 / k as f64; k], tol, DEFAULT_MAX_ITERS)
}

/// Power iteration `v <- v M` from a given start until the total-variation
/// change of an iterate drops below `tol`.
///
/// Certifies a fixed point only: on a non-ergodic matrix (e.g. the identity)
/// it simply returns the start vector.
pub fn stationary_distribution_from(
    matrix: &Array2<f64>,
    start: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let k = matrix.nrows();
    if matrix.ncols() != k || start.len() != k {
        return Err(Error::DimensionMismatch {
            left: start.len(),
            right: k,
        });
    }
    let mut v = Array1::from(start.to_vec());
    for _ in 0..max_iters {
        let next = v.dot(matrix);
        let change: f64 = v
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        v = next;
        if change < tol {
            return Ok(v.to_vec());
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_rational::Ratio;

    fn point(counts: &[u64]) -> DiscretePoint {
        DiscretePoint::new(counts.to_vec()).unwrap()
    }

    /// Independent generative oracle: walks every ordered pair and every
    /// fragmentation outcome of the step rule and accumulates the mass each
    /// target state receives. Shares no code with `dd_transition_prob`.
    fn oracle_row(from: &DiscretePoint, states: &[DiscretePoint]) -> Vec<f64> {
        let n = from.dim();
        let weight = 1.0 / (n * (n - 1)) as f64;
        let mut row = vec![0.0; states.len()];
        let index_of = |target: &[u64]| {
            states
                .iter()
                .position(|s| s.counts() == target)
                .expect("target state in enumeration")
        };
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if from.get(j) == 0 {
                    row[index_of(from.counts())] += weight;
                    continue;
                }
                let pooled = from.get(i) + from.get(j);
                for new_i in 0..pooled {
                    let mut target = from.counts().to_vec();
                    target[i] = new_i;
                    target[j] = pooled - new_i;
                    row[index_of(&target)] += weight / pooled as f64;
                }
            }
        }
        row
    }

    // Hand-computed on paper for N=3: the pairs (0,1), (1,0), (2,0), (2,1)
    // all stand pat at (0,0,4) and contribute 1/6 each; (0,2) and (1,2)
    // re-split the 4 coins and land back with probability 1/4, contributing
    // 1/24 each. Total 4/6 + 2/24 = 3/4.
    #[test]
    fn transition_prob_frozen_values() {
        let p = point(&[0, 0, 4]);
        assert_abs_diff_eq!(dd_transition_prob(&p, &p).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(
            dd_transition_prob(&point(&[2, 0]), &point(&[1, 1])).unwrap(),
            0.25
        );
        assert_eq!(
            dd_transition_prob(&point(&[2, 0]), &point(&[2, 0])).unwrap(),
            0.75
        );
        // Moving mass to a third coordinate is impossible in one pair move.
        assert_eq!(
            dd_transition_prob(&point(&[1, 1, 2]), &point(&[0, 0, 4])).unwrap(),
            0.0
        );
    }

    #[test]
    fn transition_prob_rejects_mismatches() {
        assert!(dd_transition_prob(&point(&[1, 1]), &point(&[1, 1, 0])).is_err());
        assert!(dd_transition_prob(&point(&[2, 3, 0]), &point(&[2, 3, 1])).is_err());
    }

    #[test]
    fn formula_matches_generative_oracle() {
        for (dim, total) in [(2, 5), (3, 4), (3, 8), (4, 4)] {
            let states = enumerate_states(dim, total, DEFAULT_STATE_CAP).unwrap();
            for from in &states {
                let row = oracle_row(from, &states);
                for (to, &expected) in states.iter().zip(&row) {
                    let got = dd_transition_prob(from, to).unwrap();
                    assert!(
                        (got - expected).abs() <= 1e-14,
                        "({dim},{total}) {:?}->{:?}: {got} vs oracle {expected}",
                        from.counts(),
                        to.counts()
                    );
                }
            }
        }
    }

    /// Exact-rational double stochasticity: row and column sums are exactly 1,
    /// not merely within a floating-point tolerance.
    #[test]
    fn kernel_is_doubly_stochastic_in_exact_arithmetic() {
        for (dim, total) in [(2, 2), (2, 5), (3, 4), (4, 4)] {
            let states = enumerate_states(dim, total, DEFAULT_STATE_CAP).unwrap();
            let k = states.len();
            let n = dim;
            let w = Ratio::new(1u64, (n * (n - 1)) as u64);
            let mut matrix = vec![vec![Ratio::from_integer(0u64); k]; k];
            for (a, from) in states.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        if from.get(j) == 0 {
                            matrix[a][a] += w;
                            continue;
                        }
                        let pooled = from.get(i) + from.get(j);
                        for new_i in 0..pooled {
                            let mut target = from.counts().to_vec();
                            target[i] = new_i;
                            target[j] = pooled - new_i;
                            let b = rank_state(&point(&target)).unwrap() as usize;
                            matrix[a][b] += w / Ratio::from_integer(pooled);
                        }
                    }
                }
            }
            let one = Ratio::from_integer(1u64);
            for (a, row) in matrix.iter().enumerate() {
                let sum: Ratio<u64> = row.iter().sum();
                assert_eq!(sum, one, "row {a} of ({dim},{total})");
            }
            for b in 0..k {
                let col: Ratio<u64> = matrix.iter().map(|row| row[b]).sum();
                assert_eq!(col, one, "column {b} of ({dim},{total})");
            }
        }
    }

    /// Letting a pair with an empty second pocket fragment anyway ruins the
    /// column sums (the rule would not be doubly stochastic), which is why
    /// `dd_step` stands pat in that case. Kept as an executable record of the
    /// discrepancy rather than reconciling it silently.
    #[test]
    fn unprotected_rule_is_not_doubly_stochastic() {
        let states = enumerate_states(2, 2, DEFAULT_STATE_CAP).unwrap();
        let k = states.len();
        let mut matrix = vec![vec![0.0; k]; k];
        for (a, from) in states.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    if i == j {
                        continue;
                    }
                    let pooled = from.get(i) + from.get(j);
                    if pooled == 0 {
                        matrix[a][a] += 0.5;
                        continue;
                    }
                    for new_i in 0..pooled {
                        let mut target = from.counts().to_vec();
                        target[i] = new_i;
                        target[j] = pooled - new_i;
                        let b = rank_state(&point(&target)).unwrap() as usize;
                        matrix[a][b] += 0.5 / pooled as f64;
                    }
                }
            }
        }
        let col_mid: f64 = (0..k).map(|a| matrix[a][1]).sum();
        assert_abs_diff_eq!(col_mid, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn preimage_cardinality_cases() {
        let p = point(&[2, 3, 0]);
        assert_eq!(preimage_cardinality(&p, 0, 1).unwrap(), 5);
        assert!(matches!(
            preimage_cardinality(&p, 1, 2),
            Err(Error::EmptyPreimage { i: 1, j: 2 })
        ));
        let q = point(&[0, 0, 4]);
        assert_eq!(preimage_cardinality(&q, 0, 1).unwrap(), 1);
        assert!(preimage_cardinality(&q, 1, 1).is_err());
    }

    #[test]
    fn enumeration_counts_and_order() {
        assert_eq!(enumerate_states(3, 4, 1000).unwrap().len(), 15);
        assert_eq!(state_count(3, 4).unwrap(), 15);
        let tiny = enumerate_states(2, 1, 1000).unwrap();
        assert_eq!(
            tiny.iter().map(|s| s.counts().to_vec()).collect::<Vec<_>>(),
            vec![vec![0, 1], vec![1, 0]]
        );
        assert_eq!(enumerate_states(2, 3, 1000).unwrap().len(), 4);
        assert!(matches!(
            enumerate_states(4, 100, 1000),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn rank_unrank_roundtrip_matches_enumeration() {
        for (dim, total) in [(2, 5), (3, 8), (4, 4), (5, 3)] {
            let states = enumerate_states(dim, total, DEFAULT_STATE_CAP).unwrap();
            for (idx, s) in states.iter().enumerate() {
                assert_eq!(rank_state(s).unwrap(), idx as u64);
                assert_eq!(&unrank_state(dim, total, idx as u64).unwrap(), s);
            }
        }
        assert!(unrank_state(3, 4, 15).is_err());
    }

    #[test]
    fn uniform_state_sampler_is_unbiased() {
        let mut rng = crate::rng::seeded_stream(21, 0);
        let k = state_count(2, 5).unwrap() as usize;
        let mut freq = vec![0u64; k];
        let draws = 60_000;
        for _ in 0..draws {
            let s = sample_uniform_state(2, 5, &mut rng).unwrap();
            freq[rank_state(&s).unwrap() as usize] += 1;
        }
        let tv: f64 = freq
            .iter()
            .map(|&f| (f as f64 / draws as f64 - 1.0 / k as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "tv to uniform {tv}");
    }

    #[test]
    fn step_conserves_total_and_protects_second_pocket() {
        let mut rng = crate::rng::seeded_stream(22, 0);
        let mut state = point(&[7, 0, 0, 1]);
        for _ in 0..20_000 {
            let before = state.clone();
            let rec = dd_step(&mut state, &mut rng);
            assert_eq!(state.counts().iter().sum::<u64>(), 8);
            assert_eq!(rec.new_i + rec.new_j, before.get(rec.i) + before.get(rec.j));
            if before.get(rec.j) >= 1 {
                assert!(rec.new_j >= 1);
            } else {
                assert_eq!(state, before);
            }
        }
    }

    #[test]
    fn run_dd_thins_and_includes_initial() {
        let mut rng = crate::rng::seeded_stream(23, 0);
        let initial = point(&[2, 2]);
        let traj = run_dd(&initial, 100, 10, &mut rng).unwrap();
        assert_eq!(traj.len(), 11);
        assert_eq!(traj[0], initial);
        assert!(run_dd(&initial, 10, 0, &mut rng).is_err());
    }

    #[test]
    fn stationary_is_uniform_on_small_spaces() {
        for (dim, total) in [(3, 4), (2, 5)] {
            let (states, matrix) = build_transition_matrix(dim, total, 1000).unwrap();
            let k = states.len();
            let pi = stationary_distribution(&matrix, 1e-13).unwrap();
            let tv: f64 = pi.iter().map(|p| (p - 1.0 / k as f64).abs()).sum::<f64>() / 2.0;
            assert!(tv < 1e-10, "({dim},{total}) tv {tv}");
        }
    }

    #[test]
    fn power_iteration_on_identity_returns_start() {
        let eye = Array2::eye(3);
        let start = vec![0.5, 0.25, 0.25];
        let pi = stationary_distribution_from(&eye, &start, 1e-12, 10).unwrap();
        assert_eq!(pi, start);
    }

    #[test]
    fn to_simplex_scales_counts() {
        let p = point(&[1, 3]);
        let x = p.to_simplex().unwrap();
        assert_abs_diff_eq!(x.get(0), 0.25);
        assert!(point(&[0, 0]).to_simplex().is_err());
    }
}
