//! The continuous coagulation–fragmentation chain on the simplex.
//!
//! One step pools the wealth of an ordered pair `(i, j)` and splits it at a
//! uniform fraction `u`: the pair's coordinates become `u * pool` and
//! `(1 - u) * pool`. The uniform distribution on the simplex is invariant,
//! with Beta(1, N-1) one-dimensional marginals.
//!
//! Besides the random kernel, the module carries a deterministic routing map:
//! between any two strictly interior points there is a plan of exactly `N - 1`
//! pair moves whose fractions lie in `[0, 1]`, used to certify that the chain
//! can reach any neighborhood of any target.

use rand::Rng;

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// What one random step did: the ordered pair and the split fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcStepRecord {
    pub i: usize,
    pub j: usize,
    pub u: f64,
}

/// One deterministic pair move: set coordinate `i` to `fraction` of the pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteStep {
    pub i: usize,
    pub j: usize,
    pub fraction: f64,
}

/// An ordered list of pair moves taking a source point to a target point.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub steps: Vec<RouteStep>,
}

/// Applies one coagulation–fragmentation move with a given fraction.
///
/// Coordinates outside the pair keep their exact bit patterns.
pub fn apply_coag_frag(point: &SimplexPoint, i: usize, j: usize, u: f64) -> Result<SimplexPoint> {
    let n = point.dim();
    if i == j || i >= n || j >= n {
        return Err(Error::Domain(format!(
            "pair indices must be distinct and within 0..{n}, got ({i}, {j})"
        )));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!(
            "split fraction must lie in [0, 1], got {u}"
        )));
    }
    let mut coords = point.coords().to_vec();
    let pool = coords[i] + coords[j];
    coords[i] = u * pool;
    coords[j] = (1.0 - u) * pool;
    Ok(SimplexPoint::from_normalized(coords))
}

/// Advances the chain by one random pair move, mutating `state` in place.
pub fn dc_step<R: Rng + ?Sized>(state: &mut SimplexPoint, rng: &mut R) -> DcStepRecord {
    let n = state.dim();
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let u: f64 = rng.gen();
    let coords = state.coords_mut();
    let pool = coords[i] + coords[j];
    coords[i] = u * pool;
    coords[j] = (1.0 - u) * pool;
    DcStepRecord { i, j, u }
}

/// Runs `steps` random moves and returns every `thin`-th state, starting with
/// the initial one.
pub fn run_dc<R: Rng + ?Sized>(
    initial: &SimplexPoint,
    steps: u64,
    thin: u64,
    rng: &mut R,
) -> Result<Vec<SimplexPoint>> {
    if thin == 0 {
        return Err(Error::InvalidParams("thin must be at least 1".into()));
    }
    let mut state = initial.clone();
    let mut out = Vec::with_capacity((steps / thin + 1) as usize);
    out.push(state.clone());
    for t in 1..=steps {
        dc_step(&mut state, rng);
        if t % thin == 0 {
            out.push(state.clone());
        }
    }
    Ok(out)
}

fn argmin_ties_last(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v <= values[best] {
            best = k;
        }
    }
    best
}

/// Builds a plan of exactly `N - 1` pair moves taking `source` to `target`.
///
/// The smallest source coordinate is reserved out of the first move (such a
/// coordinate has value at most `1 - 1/N`, so the rest carry enough mass to
/// start). Each move then finalizes the lowest-indexed remaining coordinate
/// whose target fits inside the pool it forms with the largest remaining
/// coordinate; the unfinalized coordinates always hold exactly the target
/// mass they jointly need, which keeps such a choice available at every step
/// and makes the last move land on the final two targets simultaneously.
pub fn deterministic_route(source: &SimplexPoint, target: &SimplexPoint) -> Result<RoutePlan> {
    let n = source.dim();
    if target.dim() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: target.dim(),
        });
    }
    if !source.is_interior() || !target.is_interior() {
        return Err(Error::InteriorRequired);
    }
    let y = target.coords();
    let mut cur = source.coords().to_vec();
    let mut active: Vec<usize> = (0..n).collect();
    let reserved = argmin_ties_last(&cur);
    let mut steps = Vec::with_capacity(n - 1);
    while active.len() > 2 {
        let first_move = steps.is_empty();
        let excluded = |k: usize| first_move && k == reserved;
        let mut chosen = None;
        for &t in &active {
            if excluded(t) {
                continue;
            }
            let partner = active
                .iter()
                .copied()
                .filter(|&u| u != t && !excluded(u))
                .max_by(|&a, &b| cur[a].total_cmp(&cur[b]))
                .expect("at least three active coordinates");
            // Relative slack absorbs the rounding of the running masses.
            if y[t] <= (cur[t] + cur[partner]) * (1.0 + 1e-12) {
                chosen = Some((t, partner));
                break;
            }
        }
        let (t, partner) =
            chosen.ok_or_else(|| Error::Domain("no feasible routing move".into()))?;
        let pool = cur[t] + cur[partner];
        steps.push(RouteStep {
            i: t,
            j: partner,
            fraction: (y[t] / pool).clamp(0.0, 1.0),
        });
        cur[partner] = (pool - y[t]).max(0.0);
        cur[t] = y[t];
        active.retain(|&k| k != t);
    }
    let (a, b) = (active[0], active[1]);
    let pool = cur[a] + cur[b];
    steps.push(RouteStep {
        i: a,
        j: b,
        fraction: (y[a] / pool).clamp(0.0, 1.0),
    });
    Ok(RoutePlan { steps })
}

/// Replays a plan from `source`, validating every step.
pub fn apply_route(source: &SimplexPoint, plan: &RoutePlan) -> Result<SimplexPoint> {
    let mut point = source.clone();
    for step in &plan.steps {
        point = apply_coag_frag(&point, step.i, step.j, step.fraction)?;
    }
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{l1_distance, sample_uniform_simplex};
    use approx::assert_abs_diff_eq;

    fn point(coords: &[f64]) -> SimplexPoint {
        SimplexPoint::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn coag_frag_known_value() {
        let p = apply_coag_frag(&point(&[0.5, 0.5]), 0, 1, 0.25).unwrap();
        assert_eq!(p.coords(), &[0.25, 0.75]);
    }

    #[test]
    fn coag_frag_zero_pool_is_identity() {
        let start = point(&[1.0, 0.0, 0.0]);
        let p = apply_coag_frag(&start, 1, 2, 0.7).unwrap();
        assert_eq!(p.coords(), start.coords());
    }

    #[test]
    fn coag_frag_validates_arguments() {
        let p = point(&[0.5, 0.5]);
        assert!(apply_coag_frag(&p, 0, 0, 0.5).is_err());
        assert!(apply_coag_frag(&p, 0, 2, 0.5).is_err());
        assert!(apply_coag_frag(&p, 0, 1, 1.5).is_err());
        assert!(apply_coag_frag(&p, 0, 1, -0.1).is_err());
    }

    #[test]
    fn step_touches_only_the_pair() {
        let mut rng = crate::rng::seeded_stream(31, 0);
        let mut state = sample_uniform_simplex(6, &mut rng).unwrap();
        for _ in 0..500 {
            let before: Vec<u64> = state.coords().iter().map(|c| c.to_bits()).collect();
            let rec = dc_step(&mut state, &mut rng);
            assert_ne!(rec.i, rec.j);
            assert!((0.0..1.0).contains(&rec.u));
            for (k, (&bits, &c)) in before.iter().zip(state.coords()).enumerate() {
                if k != rec.i && k != rec.j {
                    assert_eq!(bits, c.to_bits(), "untouched coordinate {k} changed");
                }
            }
        }
    }

    #[test]
    fn long_trajectory_conserves_mass() {
        let mut rng = crate::rng::seeded_stream(32, 0);
        let mut state = SimplexPoint::barycenter(5).unwrap();
        for _ in 0..100_000 {
            dc_step(&mut state, &mut rng);
        }
        assert_abs_diff_eq!(state.coords().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(state.coords().iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn run_dc_thins_and_includes_initial() {
        let mut rng = crate::rng::seeded_stream(33, 0);
        let initial = SimplexPoint::barycenter(3).unwrap();
        let traj = run_dc(&initial, 0, 1, &mut rng).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj[0], initial);
        let traj = run_dc(&initial, 1000, 100, &mut rng).unwrap();
        assert_eq!(traj.len(), 11);
    }

    // A single step from (u0, 1-u0) re-splits the whole mass at a fresh
    // uniform fraction, so across seeds the first coordinate is uniform.
    #[test]
    fn two_agent_single_step_is_uniform() {
        let draws = 4000;
        let mut values = Vec::with_capacity(draws);
        for seed in 0..draws as u64 {
            let mut rng = crate::rng::seeded_stream(34, seed);
            let mut state = point(&[0.3, 0.7]);
            dc_step(&mut state, &mut rng);
            values.push(state.get(0));
        }
        values.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (k, &v) in values.iter().enumerate() {
            let hi = (k + 1) as f64 / draws as f64 - v;
            let lo = v - k as f64 / draws as f64;
            d = d.max(hi.abs()).max(lo.abs());
        }
        assert!(d < 1.628 / (draws as f64).sqrt(), "KS {d}");
    }

    // Frozen routing example: equal thirds to (1/2, 1/4, 1/4) goes through
    // (1/2, 1/6, 1/3). The final fraction must make the composition land on
    // the target: target_1/(1 - target_0) = 1/2. The tempting variant
    // target_0/(1 - target_1) = 2/3 sends the middle coordinate to 1/3, not
    // 1/4; the assertion message shows both so a failure names the culprit.
    #[test]
    fn route_reproduces_worked_three_agent_example() {
        let source = SimplexPoint::barycenter(3).unwrap();
        let target = point(&[0.5, 0.25, 0.25]);
        let plan = deterministic_route(&source, &target).unwrap();
        assert_eq!(plan.steps.len(), 2);
        assert_eq!((plan.steps[0].i, plan.steps[0].j), (0, 1));
        assert_abs_diff_eq!(plan.steps[0].fraction, 0.75, epsilon = 1e-12);
        assert_eq!((plan.steps[1].i, plan.steps[1].j), (1, 2));
        let composition_consistent = 0.25 / (1.0 - 0.5);
        let alternative = 0.5 / (1.0 - 0.25);
        assert!(
            (plan.steps[1].fraction - composition_consistent).abs() < 1e-12,
            "final fraction {} should be the composition-consistent {} rather than {}",
            plan.steps[1].fraction,
            composition_consistent,
            alternative
        );
        let routed = apply_route(&source, &plan).unwrap();
        assert!(l1_distance(&routed, &target).unwrap() < 1e-12);
    }

    #[test]
    fn route_from_point_to_itself_is_identity() {
        let p = point(&[0.2, 0.3, 0.5]);
        let plan = deterministic_route(&p, &p).unwrap();
        let routed = apply_route(&p, &plan).unwrap();
        assert!(l1_distance(&routed, &p).unwrap() < 1e-12);
        for step in &plan.steps {
            assert!((0.0..=1.0).contains(&step.fraction));
        }
    }

    #[test]
    fn route_requires_interior_points() {
        let boundary = point(&[0.0, 0.4, 0.6]);
        let interior = SimplexPoint::barycenter(3).unwrap();
        assert!(matches!(
            deterministic_route(&boundary, &interior),
            Err(Error::InteriorRequired)
        ));
        assert!(matches!(
            deterministic_route(&interior, &boundary),
            Err(Error::InteriorRequired)
        ));
    }

    #[test]
    fn route_handles_lopsided_targets() {
        let source = SimplexPoint::barycenter(3).unwrap();
        let target = point(&[0.9, 0.05, 0.05]);
        let plan = deterministic_route(&source, &target).unwrap();
        assert_eq!(plan.steps.len(), 2);
        let routed = apply_route(&source, &plan).unwrap();
        assert!(l1_distance(&routed, &target).unwrap() < 1e-12);
    }

    #[test]
    fn route_random_pairs_across_dimensions() {
        let mut rng = crate::rng::seeded_stream(35, 0);
        for dim in 2..=6 {
            for _ in 0..100 {
                let source = sample_uniform_simplex(dim, &mut rng).unwrap();
                let target = sample_uniform_simplex(dim, &mut rng).unwrap();
                let plan = deterministic_route(&source, &target).unwrap();
                assert_eq!(plan.steps.len(), dim - 1);
                assert!(plan.steps.iter().all(|s| (0.0..=1.0).contains(&s.fraction)));
                let routed = apply_route(&source, &plan).unwrap();
                let err = l1_distance(&routed, &target).unwrap();
                assert!(err < 1e-10, "dim {dim}: l1 error {err}");
            }
        }
    }

    #[test]
    fn apply_route_accepts_partial_plans() {
        let plan = RoutePlan {
            steps: vec![RouteStep {
                i: 0,
                j: 1,
                fraction: 0.5,
            }],
        };
        let p = apply_route(&point(&[0.2, 0.4, 0.4]), &plan).unwrap();
        assert_abs_diff_eq!(p.get(0), 0.3);
        assert_abs_diff_eq!(p.get(1), 0.3);
        assert_eq!(p.get(2), 0.4);
    }
}
