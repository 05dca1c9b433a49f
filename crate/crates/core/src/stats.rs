//! Statistical verification: distances, survival curves, and tail fits.
//!
//! These are the instruments the rest of the crate is checked with:
//! [`ks_statistic`] and [`ks_two_sample`] for one-dimensional marginal claims,
//! [`total_variation`] for exact discrete laws, [`return_time_survival`] and
//! [`fit_return_time_tail`] for geometric return-time tails,
//! [`fit_exponential_tail`] for heavy-vs-exponential tail discrimination,
//! and [`dd_dc_convergence`] for the coupling experiment that measures how
//! the discrete chain's marginals approach the continuous chain's as the
//! coin count grows.

use crate::chain_dc::dc_step;
use crate::chain_dd::{dd_step, sample_uniform_state};
use crate::error::{Error, Result};
use crate::simplex::{beta_cdf, sample_uniform_simplex, BetaMarginalSpec, SimplexPoint};
use rand::Rng;
use serde::Serialize;

/// Asymptotic 1% critical coefficient for the Kolmogorov-Smirnov statistic:
/// a sample of effective size n passes at the 1% level when
/// D < 1.628 / sqrt(n).
pub const KS_CRITICAL_1PCT_COEFF: f64 = 1.628;

/// One-dimensional sample with optional positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample values must be finite".into()));
        }
        Ok(EmpiricalSample {
            values,
            weights: None,
        })
    }

    pub fn with_weights(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut sample = EmpiricalSample::new(values)?;
        if weights.len() != sample.values.len() {
            return Err(Error::DimensionMismatch {
                left: sample.values.len(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Domain("weights must be positive and finite".into()));
        }
        sample.weights = Some(weights);
        Ok(sample)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// Kolmogorov-Smirnov distance together with the 1% critical value it
/// should be compared against.
///
/// For weighted samples `n_effective` is the Kish effective size
/// (sum w)^2 / sum w^2; for plain samples it is the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_value_1pct: f64,
    pub n_effective: f64,
}

impl KsResult {
    pub fn passes_1pct(&self) -> bool {
        self.statistic < self.critical_value_1pct
    }
}

/// Sup-norm distance between the sample's empirical CDF and `cdf`.
///
/// `cdf` must be a proper distribution function on the sample range; each
/// evaluation is checked to lie in [0, 1].
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &EmpiricalSample, cdf: F) -> Result<KsResult> {
    let mut order: Vec<usize> = (0..sample.values.len()).collect();
    order.sort_by(|&a, &b| sample.values[a].total_cmp(&sample.values[b]));
    let total_weight = match &sample.weights {
        Some(w) => compensated_sum(w.iter().copied()),
        None => sample.values.len() as f64,
    };
    let mut statistic: f64 = 0.0;
    let mut cum = 0.0;
    for &idx in &order {
        let x = sample.values[idx];
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Domain(format!("cdf({x}) = {f} lies outside [0, 1]")));
        }
        let below = cum / total_weight;
        cum += sample.weights.as_ref().map_or(1.0, |w| w[idx]);
        let at = cum / total_weight;
        statistic = statistic.max((below - f).abs()).max((at - f).abs());
    }
    let n_effective = match &sample.weights {
        Some(w) => {
            let sq = compensated_sum(w.iter().map(|v| v * v));
            total_weight * total_weight / sq
        }
        None => sample.values.len() as f64,
    };
    Ok(KsResult {
        statistic,
        critical_value_1pct: KS_CRITICAL_1PCT_COEFF / n_effective.sqrt(),
        n_effective,
    })
}

/// Two-sample Kolmogorov-Smirnov distance with its 1% critical value
/// 1.628 sqrt((n + m) / (n m)); `n_effective` is n m / (n + m).
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InsufficientData(
            "both samples must be non-empty".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Domain("sample values must be finite".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let mut statistic: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        // Advance past ties in both samples before comparing, so equal
        // values never contribute a spurious gap.
        let v = a[i].min(b[j]);
        while i < n && a[i] == v {
            i += 1;
        }
        while j < m && b[j] == v {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        statistic = statistic.max(gap);
    }
    let n_effective = (n as f64 * m as f64) / (n + m) as f64;
    Ok(KsResult {
        statistic,
        critical_value_1pct: KS_CRITICAL_1PCT_COEFF / n_effective.sqrt(),
        n_effective,
    })
}

/// Total-variation distance (1/2) sum |p_k - q_k| between two probability
/// vectors of the same length.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    for vec in [p, q] {
        if vec.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(
                "probabilities must be non-negative and finite".into(),
            ));
        }
        let total = compensated_sum(vec.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "probability vector sums to {total}, not 1"
            )));
        }
    }
    Ok(0.5 * compensated_sum(p.iter().zip(q).map(|(a, b)| (a - b).abs())))
}

/// Empirical survival function of return times to a set, pooled over all
/// completed excursions of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTimeSurvival {
    pub n_excursions: usize,
    /// (t, fraction of return times exceeding t), for t = 1..=max return time.
    pub points: Vec<(u64, f64)>,
}

/// Return times are gaps between consecutive visits to the set along the
/// trajectory; the trajectory must start inside the set so every gap is a
/// genuine return.
pub fn return_time_survival<F>(trajectory: &[SimplexPoint], in_set: F) -> Result<ReturnTimeSurvival>
where
    F: Fn(&SimplexPoint) -> bool,
{
    let first = trajectory
        .first()
        .ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
    if !in_set(first) {
        return Err(Error::Domain(
            "trajectory must start inside the target set".into(),
        ));
    }
    let mut gaps: Vec<u64> = Vec::new();
    let mut last_visit = 0u64;
    for (idx, point) in trajectory.iter().enumerate().skip(1) {
        if in_set(point) {
            gaps.push(idx as u64 - last_visit);
            last_visit = idx as u64;
        }
    }
    if gaps.is_empty() {
        return Err(Error::InsufficientData(
            "no completed excursion in the trajectory".into(),
        ));
    }
    let max_gap = *gaps.iter().max().expect("gaps is non-empty");
    let n = gaps.len() as f64;
    let points = (1..=max_gap)
        .map(|t| {
            let survivors = gaps.iter().filter(|&&g| g > t).count();
            (t, survivors as f64 / n)
        })
        .collect();
    Ok(ReturnTimeSurvival {
        n_excursions: gaps.len(),
        points,
    })
}

/// Log-linear tail fit: `rate` is the slope of log survival, so geometric or
/// exponential tails give a negative rate and r_squared near 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub support_lo: f64,
}

/// Fits log survival against t over the points still supported by at least
/// `min_survivors` excursions, where the empirical curve is trustworthy.
pub fn fit_return_time_tail(
    survival: &ReturnTimeSurvival,
    min_survivors: usize,
) -> Result<TailFit> {
    let n = survival.n_excursions as f64;
    let mut ts = Vec::new();
    let mut log_s = Vec::new();
    for &(t, s) in &survival.points {
        if s > 0.0 && s * n >= min_survivors as f64 {
            ts.push(t as f64);
            log_s.push(s.ln());
        }
    }
    if ts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} usable survival points for the tail fit",
            ts.len()
        )));
    }
    let line = linear_fit(&ts, &log_s)?;
    Ok(TailFit {
        rate: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        support_lo: ts[0],
    })
}

/// Fits log empirical survival against x for the sample points above the
/// `quantile_lo` quantile. At least 100 tail points are required.
pub fn fit_exponential_tail(sample: &EmpiricalSample, quantile_lo: f64) -> Result<TailFit> {
    if sample.weights.is_some() {
        return Err(Error::Domain(
            "tail fitting expects an unweighted sample".into(),
        ));
    }
    if !(0.0..1.0).contains(&quantile_lo) || quantile_lo <= 0.0 {
        return Err(Error::Domain(format!(
            "quantile_lo must lie strictly inside (0, 1), got {quantile_lo}"
        )));
    }
    let mut sorted = sample.values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cut = ((n as f64) * quantile_lo).floor() as usize;
    if n - cut < 100 {
        return Err(Error::InsufficientData(format!(
            "{} points above the cutoff; need at least 100",
            n - cut
        )));
    }
    let mut xs = Vec::with_capacity(n - cut);
    let mut log_s = Vec::with_capacity(n - cut);
    for (i, &x) in sorted.iter().enumerate().skip(cut) {
        // Survival just past the i-th order statistic; the final point has
        // empirical survival 0 and is dropped.
        let survivors = n - 1 - i;
        if survivors == 0 {
            break;
        }
        xs.push(x);
        log_s.push((survivors as f64 / n as f64).ln());
    }
    let line = linear_fit(&xs, &log_s)?;
    Ok(TailFit {
        rate: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        support_lo: sorted[cut],
    })
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two points for a line".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Domain("line fit inputs must be finite".into()));
    }
    let n = xs.len() as f64;
    let mean_x = compensated_sum(xs.iter().copied()) / n;
    let mean_y = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mean_x) * (x - mean_x)));
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values coincide".into()));
    }
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)));
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot = compensated_sum(ys.iter().map(|y| (y - mean_y) * (y - mean_y)));
    let ss_res = compensated_sum(ys.iter().zip(xs).map(|(y, x)| {
        let r = y - (slope * x + intercept);
        r * r
    }));
    // A perfectly flat target is fit exactly by the horizontal line.
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rank_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("need at least two points".into()));
    }
    let rx = average_ranks(xs)?;
    let ry = average_ranks(ys)?;
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let sxx = compensated_sum(rx.iter().map(|r| (r - mean) * (r - mean)));
    let syy = compensated_sum(ry.iter().map(|r| (r - mean) * (r - mean)));
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData(
            "ranks are constant; correlation undefined".into(),
        ));
    }
    let sxy = compensated_sum(rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)));
    Ok(sxy / (sxx * syy).sqrt())
}

fn average_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("rank inputs must be finite".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // 1-based ranks; a tied block shares the average of its positions.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

/// Kolmogorov-Smirnov distances between the first-coordinate marginals of
/// the rescaled discrete chain (n coins) and the continuous chain, after
/// `k_steps` of each from their respective uniform initial laws, one entry
/// per n in `n_list`.
///
/// Sampling order is deterministic for a given rng: the continuous
/// reference sample is drawn first, then one discrete sample per n in the
/// given order.
pub fn dd_dc_convergence<R: Rng + ?Sized>(
    n_list: &[u64],
    n_agents: usize,
    k_steps: usize,
    replicas: usize,
    rng: &mut R,
) -> Result<Vec<(u64, f64)>> {
    if replicas < 100 {
        return Err(Error::InsufficientData(format!(
            "{replicas} replicas; need at least 100 for a usable distance"
        )));
    }
    if n_list.contains(&0) {
        return Err(Error::Domain("coin counts must be at least 1".into()));
    }
    let mut continuous = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let mut point = sample_uniform_simplex(n_agents, rng)?;
        for _ in 0..k_steps {
            dc_step(&mut point, rng);
        }
        continuous.push(point.coords()[0]);
    }
    let mut distances = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut discrete = Vec::with_capacity(replicas);
        for _ in 0..replicas {
            let mut state = sample_uniform_state(n_agents, n, rng)?;
            for _ in 0..k_steps {
                dd_step(&mut state, rng);
            }
            discrete.push(state.counts()[0] as f64 / n as f64);
        }
        let ks = ks_two_sample(&discrete, &continuous)?;
        distances.push((n, ks.statistic));
    }
    Ok(distances)
}

/// KS check of every coordinate of a simplex sample against the Beta(1, N-1)
/// marginal of the uniform law.
pub fn per_coordinate_beta_ks(points: &[SimplexPoint]) -> Result<Vec<KsResult>> {
    let first = points
        .first()
        .ok_or_else(|| Error::InsufficientData("empty point sample".into()))?;
    let dim = first.dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::Domain("all points must share one dimension".into()));
    }
    let marginal = BetaMarginalSpec::uniform_simplex_marginal(dim)?;
    let mut reports = Vec::with_capacity(dim);
    for coord in 0..dim {
        let values: Vec<f64> = points.iter().map(|p| p.coords()[coord]).collect();
        let sample = EmpiricalSample::new(values)?;
        let ks = ks_statistic(&sample, |x| {
            beta_cdf(marginal, x).expect("simplex coordinates lie in [0, 1]")
        })?;
        reports.push(ks);
    }
    Ok(reports)
}

/// One verification line, shaped for machine-readable reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub test: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub n: u64,
    pub pass: bool,
    /// Thinning factor of the underlying trajectory, when one was applied;
    /// critical values treat thinned draws as independent, so the factor is
    /// part of the honest record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thinning: Option<u64>,
}

impl CheckReport {
    pub fn from_ks(test: impl Into<String>, ks: &KsResult, thinning: Option<u64>) -> Self {
        CheckReport {
            test: test.into(),
            statistic: ks.statistic,
            critical_value: ks.critical_value_1pct,
            n: ks.n_effective.round() as u64,
            pass: ks.passes_1pct(),
            thinning,
        }
    }
}

/// Neumaier variant of Kahan summation. Used wherever a check needs the sum
/// itself to be far more accurate than the quantity being verified, e.g.
/// conservation checks over millions of updates.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
