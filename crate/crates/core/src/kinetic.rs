//! Binary wealth exchange simulated by direct Monte Carlo over interaction
//! events.
//!
//! Two agents with wealths v and w trade according to
//!
//! ```text
//! v* = (1 - lambda) v + lambda w + eta1 v
//! w* = (1 - lambda) w + lambda v + eta2 w
//! ```
//!
//! with independent zero-mean noises eta1, eta2 multiplying each agent's own
//! pre-trade wealth. Noise supports are bounded below by -(1 - lambda), so
//! post-trade wealths never go negative and the state space stays [0, inf).
//! With zero noise each trade conserves v + w identically, so the population
//! mean is an exact invariant; the s-th moment of the wealth law grows or
//! decays at the rate [`moment_rate`] S(s) = (1-lambda)^s + lambda^s - 1.
//!
//! [`dsmc_run`] executes the process event by event: an unordered pair is
//! drawn uniformly, one trade is applied, and kinetic time advances by 2/N,
//! so one unit of time corresponds to one expected trade per agent.

use crate::error::{Error, Result};
use crate::stats::compensated_sum;
use rand::Rng;
use serde::Serialize;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Distribution of the multiplicative noise factors.
///
/// All variants have mean zero and variance sigma^2; the support bound that
/// keeps wealths non-negative is enforced by [`ExchangeParams::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Zero,
    /// eta = +sigma or -sigma with probability 1/2 each.
    TwoPoint {
        sigma: f64,
    },
    /// eta uniform on [-sigma sqrt(3), sigma sqrt(3)].
    Uniform {
        sigma: f64,
    },
}

impl NoiseSpec {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Zero => 0.0,
            NoiseSpec::TwoPoint { sigma } => {
                if rng.gen_bool(0.5) {
                    sigma
                } else {
                    -sigma
                }
            }
            NoiseSpec::Uniform { sigma } => (2.0 * rng.gen::<f64>() - 1.0) * (sigma * SQRT_3),
        }
    }

    /// Noise variance sigma^2.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::Zero => 0.0,
            NoiseSpec::TwoPoint { sigma } | NoiseSpec::Uniform { sigma } => sigma * sigma,
        }
    }
}

/// Validated trade parameters: the propensity lambda and the noise law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeParams {
    lambda: f64,
    eta_spec: NoiseSpec,
}

impl ExchangeParams {
    pub fn new(lambda: f64, eta_spec: NoiseSpec) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 || lambda >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "lambda must lie in (0,1), got {lambda}"
            )));
        }
        match eta_spec {
            NoiseSpec::Zero => {}
            NoiseSpec::TwoPoint { sigma } => {
                if !sigma.is_finite() || sigma < 0.0 || sigma > 1.0 - lambda {
                    return Err(Error::InvalidParams(format!(
                        "two_point noise must satisfy 0 <= sigma <= 1 - lambda so wealths \
                         stay non-negative, got sigma = {sigma}, lambda = {lambda}"
                    )));
                }
            }
            NoiseSpec::Uniform { sigma } => {
                if !sigma.is_finite() || sigma < 0.0 || sigma * SQRT_3 > 1.0 - lambda {
                    return Err(Error::InvalidParams(format!(
                        "uniform noise must satisfy sigma * sqrt(3) <= 1 - lambda so wealths \
                         stay non-negative, got sigma = {sigma}, lambda = {lambda}"
                    )));
                }
            }
        }
        Ok(ExchangeParams { lambda, eta_spec })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta_spec(&self) -> NoiseSpec {
        self.eta_spec
    }
}

/// One binary trade with freshly drawn noises; the first noise multiplies
/// `v`, the second `w`.
pub fn exchange_pair<R: Rng + ?Sized>(
    v: f64,
    w: f64,
    params: &ExchangeParams,
    rng: &mut R,
) -> (f64, f64) {
    debug_assert!(v.is_finite() && v >= 0.0, "pre-trade wealth {v}");
    debug_assert!(w.is_finite() && w >= 0.0, "pre-trade wealth {w}");
    let lambda = params.lambda;
    let eta_v = params.eta_spec.draw(rng);
    let eta_w = params.eta_spec.draw(rng);
    let v_star = (1.0 - lambda) * v + lambda * w + eta_v * v;
    let w_star = (1.0 - lambda) * w + lambda * v + eta_w * w;
    debug_assert!(v_star >= 0.0, "trade produced {v_star} from ({v}, {w})");
    debug_assert!(w_star >= 0.0, "trade produced {w_star} from ({v}, {w})");
    (v_star, w_star)
}

/// Growth rate of the s-th moment, S(s) = (1-lambda)^s + lambda^s - 1.
///
/// S(1) = 0 encodes mean conservation and S(2) = -2 lambda (1 - lambda) the
/// variance decay of the noiseless process. Callers must supply s > 0 and
/// lambda in (0, 1).
pub fn moment_rate(s: f64, lambda: f64) -> f64 {
    debug_assert!(s > 0.0, "moment order {s}");
    debug_assert!(lambda > 0.0 && lambda < 1.0, "lambda {lambda}");
    (1.0 - lambda).powf(s) + lambda.powf(s) - 1.0
}

/// A population of non-negative wealths at a kinetic time.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPopulation {
    wealths: Vec<f64>,
    time: f64,
    initial_mean: f64,
}

impl WealthPopulation {
    pub fn new(wealths: Vec<f64>) -> Result<Self> {
        if wealths.len() < 2 {
            return Err(Error::InvalidDimension(wealths.len()));
        }
        if wealths.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParams(
                "wealths must be finite and non-negative".into(),
            ));
        }
        let initial_mean = compensated_sum(wealths.iter().copied()) / wealths.len() as f64;
        Ok(WealthPopulation {
            wealths,
            time: 0.0,
            initial_mean,
        })
    }

    /// Population of `n` i.i.d. exponential wealths with the given mean.
    pub fn iid_exponential<R: Rng + ?Sized>(n: usize, mean: f64, rng: &mut R) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "mean must be positive, got {mean}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        let wealths = (0..n)
            .map(|_| -mean * (1.0 - rng.gen::<f64>()).ln())
            .collect();
        WealthPopulation::new(wealths)
    }

    pub fn wealths(&self) -> &[f64] {
        &self.wealths
    }

    pub fn n_agents(&self) -> usize {
        self.wealths.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Mean wealth at construction; with zero noise the current mean equals
    /// it up to accumulated rounding.
    pub fn initial_mean(&self) -> f64 {
        self.initial_mean
    }

    /// (1/N) sum of w_i^s; s = 0 returns exactly 1.
    pub fn empirical_moment(&self, s: f64) -> Result<f64> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Domain(format!(
                "moment order must be non-negative, got {s}"
            )));
        }
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok(compensated_sum(self.wealths.iter().map(|w| w.powf(s))) / self.wealths.len() as f64)
    }
}

/// Moment snapshot at one kinetic time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSample {
    pub t: f64,
    pub m1: f64,
    pub m2: f64,
    /// Values of the extra moment orders requested in [`dsmc_run`], in the
    /// same order.
    pub extra: Vec<f64>,
}

/// Final population plus the recorded moment series.
#[derive(Debug, Clone)]
pub struct DsmcRun {
    pub population: WealthPopulation,
    pub series: Vec<MomentSample>,
}

/// Runs interaction events until kinetic time reaches `t_end` (rounded up to
/// a whole number of events), recording roughly `samples` moment rows plus
/// the initial and final states.
pub fn dsmc_run<R: Rng + ?Sized>(
    mut pop: WealthPopulation,
    t_end: f64,
    params: &ExchangeParams,
    extra_moments: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<DsmcRun> {
    if !t_end.is_finite() || t_end < pop.time {
        return Err(Error::Domain(format!(
            "t_end = {t_end} precedes the population time {}",
            pop.time
        )));
    }
    if extra_moments.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::Domain(
            "extra moment orders must be non-negative".into(),
        ));
    }
    let n = pop.wealths.len();
    let dtau = 2.0 / n as f64;
    let events = ((t_end - pop.time) / dtau).ceil() as u64;
    let stride = (events / samples.max(1) as u64).max(1);
    let record = |pop: &WealthPopulation, rows: &mut Vec<MomentSample>| -> Result<()> {
        rows.push(MomentSample {
            t: pop.time,
            m1: pop.empirical_moment(1.0)?,
            m2: pop.empirical_moment(2.0)?,
            extra: extra_moments
                .iter()
                .map(|&s| pop.empirical_moment(s))
                .collect::<Result<_>>()?,
        });
        Ok(())
    };
    let mut series = Vec::new();
    record(&pop, &mut series)?;
    for event in 1..=events {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (v_star, w_star) = exchange_pair(pop.wealths[i], pop.wealths[j], params, rng);
        pop.wealths[i] = v_star;
        pop.wealths[j] = w_star;
        pop.time += dtau;
        if event % stride == 0 || event == events {
            record(&pop, &mut series)?;
        }
    }
    Ok(DsmcRun {
        population: pop,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_stream;
    use crate::stats::{fit_exponential_tail, linear_fit, EmpiricalSample};

    fn zero_noise(lambda: f64) -> ExchangeParams {
        ExchangeParams::new(lambda, NoiseSpec::Zero).unwrap()
    }

    #[test]
    fn equal_wealths_are_a_fixed_point_without_noise() {
        let mut rng = seeded_stream(20, 0);
        let (v, w) = exchange_pair(1.0, 1.0, &zero_noise(0.3), &mut rng);
        assert_eq!((v, w), (1.0, 1.0));
    }

    #[test]
    fn half_propensity_splits_a_concentrated_pair_evenly() {
        let mut rng = seeded_stream(20, 1);
        let (v, w) = exchange_pair(2.0, 0.0, &zero_noise(0.5), &mut rng);
        assert_eq!((v, w), (1.0, 1.0));
    }

    #[test]
    fn noiseless_trades_conserve_each_pair_to_rounding() {
        let mut rng = seeded_stream(20, 2);
        let params = zero_noise(0.3);
        for _ in 0..10_000 {
            let v = 10.0 * rng.gen::<f64>();
            let w = 10.0 * rng.gen::<f64>();
            let (a, b) = exchange_pair(v, w, &params, &mut rng);
            let drift = ((a + b) - (v + w)).abs();
            assert!(drift <= 1e-15 * (v + w), "pair sum drifted by {drift:.3e}");
        }
    }

    #[test]
    fn trade_roles_are_exchangeable_in_law() {
        // exchange_pair(v, w) swapped should match exchange_pair(w, v)
        // distributionally. Matched seeds reuse the same noise draws, so the
        // two samples differ only by which draw lands on which agent; their
        // first two moments must agree to Monte Carlo accuracy.
        let params = ExchangeParams::new(0.3, NoiseSpec::TwoPoint { sigma: 0.2 }).unwrap();
        let (v, w) = (1.3, 0.4);
        let runs = 20_000;
        let (mut sum_a1, mut sum_b2, mut sq_a1, mut sq_b2) = (0.0, 0.0, 0.0, 0.0);
        let (mut sum_b1, mut sum_a2) = (0.0, 0.0);
        for seed in 0..runs {
            let mut rng = seeded_stream(21, seed);
            let (a1, b1) = exchange_pair(v, w, &params, &mut rng);
            let mut rng = seeded_stream(21, seed);
            let (a2, b2) = exchange_pair(w, v, &params, &mut rng);
            sum_a1 += a1;
            sum_b2 += b2;
            sq_a1 += a1 * a1;
            sq_b2 += b2 * b2;
            sum_b1 += b1;
            sum_a2 += a2;
        }
        let n = runs as f64;
        assert!((sum_a1 / n - sum_b2 / n).abs() < 0.02);
        assert!((sum_b1 / n - sum_a2 / n).abs() < 0.02);
        assert!((sq_a1 / n - sq_b2 / n).abs() < 0.05);
    }

    #[test]
    fn wealths_stay_non_negative_at_the_support_edge() {
        // sigma exactly at the bound: eta = -(1 - lambda) zeroes the agent's
        // retained share and the trade must still land at >= 0.
        for (idx, &lambda) in [0.1, 0.5, 0.9].iter().enumerate() {
            let two_point = ExchangeParams::new(
                lambda,
                NoiseSpec::TwoPoint {
                    sigma: 1.0 - lambda,
                },
            )
            .unwrap();
            let near_edge = (1.0 - lambda) / SQRT_3 * 0.999_999;
            let uniform =
                ExchangeParams::new(lambda, NoiseSpec::Uniform { sigma: near_edge }).unwrap();
            for (stream, params) in [(0u64, &two_point), (1, &uniform)] {
                let mut rng = seeded_stream(22, 2 * idx as u64 + stream);
                for _ in 0..500_000 {
                    let v = 5.0 * rng.gen::<f64>();
                    let w = 5.0 * rng.gen::<f64>();
                    let (a, b) = exchange_pair(v, w, params, &mut rng);
                    assert!(a >= 0.0 && b >= 0.0, "negative wealth from ({v}, {w})");
                }
            }
        }
    }

    #[test]
    fn params_reject_out_of_range_inputs() {
        assert!(ExchangeParams::new(0.0, NoiseSpec::Zero).is_err());
        assert!(ExchangeParams::new(1.0, NoiseSpec::Zero).is_err());
        assert!(ExchangeParams::new(1.2, NoiseSpec::Zero).is_err());
        assert!(ExchangeParams::new(f64::NAN, NoiseSpec::Zero).is_err());
        assert!(ExchangeParams::new(0.3, NoiseSpec::TwoPoint { sigma: 0.71 }).is_err());
        assert!(ExchangeParams::new(0.3, NoiseSpec::TwoPoint { sigma: -0.1 }).is_err());
        assert!(ExchangeParams::new(0.3, NoiseSpec::TwoPoint { sigma: 0.7 }).is_ok());
        assert!(ExchangeParams::new(0.3, NoiseSpec::Uniform { sigma: 0.41 }).is_err());
        assert!(ExchangeParams::new(0.3, NoiseSpec::Uniform { sigma: 0.4 }).is_ok());
    }

    #[test]
    fn moment_rate_known_values() {
        assert!((moment_rate(2.0, 0.25) + 0.375).abs() < 1e-15);
        for &lambda in &[0.1, 0.3, 0.7] {
            assert!(
                moment_rate(1.0, lambda).abs() < 1e-15,
                "S(1) at lambda = {lambda}"
            );
        }
        assert!((moment_rate(60.0, 0.5) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_moment_known_values() {
        let pop = WealthPopulation::new(vec![0.0, 2.0]).unwrap();
        assert_eq!(pop.empirical_moment(0.0).unwrap(), 1.0);
        assert_eq!(pop.empirical_moment(2.0).unwrap(), 2.0);
        let ones = WealthPopulation::new(vec![1.0; 5]).unwrap();
        assert_eq!(ones.empirical_moment(1.0).unwrap(), 1.0);
        assert!(pop.empirical_moment(-1.0).is_err());
    }

    #[test]
    fn population_construction_validates() {
        assert!(WealthPopulation::new(vec![1.0]).is_err());
        assert!(WealthPopulation::new(vec![1.0, -0.5]).is_err());
        assert!(WealthPopulation::new(vec![1.0, f64::NAN]).is_err());
        let pop = WealthPopulation::new(vec![1.0, 3.0]).unwrap();
        assert_eq!(pop.time(), 0.0);
        assert_eq!(pop.initial_mean(), 2.0);
    }

    #[test]
    fn iid_exponential_has_the_requested_mean() {
        let mut rng = seeded_stream(23, 0);
        let pop = WealthPopulation::iid_exponential(40_000, 1.5, &mut rng).unwrap();
        assert!(pop.wealths().iter().all(|&w| w >= 0.0));
        let mean = pop.empirical_moment(1.0).unwrap();
        // Standard error is mean/sqrt(n) = 0.0075.
        assert!((mean - 1.5).abs() < 0.03, "sample mean {mean}");
        assert!(WealthPopulation::iid_exponential(1, 1.0, &mut rng).is_err());
        assert!(WealthPopulation::iid_exponential(10, 0.0, &mut rng).is_err());
    }

    #[test]
    fn ten_million_events_conserve_total_wealth() {
        let mut rng = seeded_stream(24, 0);
        let pop = WealthPopulation::iid_exponential(1000, 1.0, &mut rng).unwrap();
        let before = compensated_sum(pop.wealths().iter().copied());
        let t_end = 2.0 * 1e7 / 1000.0;
        let run = dsmc_run(pop, t_end, &zero_noise(0.3), &[], 10, &mut rng).unwrap();
        let after = compensated_sum(run.population.wealths().iter().copied());
        let rel = ((after - before) / before).abs();
        assert!(rel < 1e-12, "total wealth drifted by {rel:.3e} relative");
    }

    #[test]
    fn mean_is_constant_along_a_noiseless_run() {
        let mut rng = seeded_stream(25, 0);
        let pop = WealthPopulation::iid_exponential(1000, 1.0, &mut rng).unwrap();
        let run = dsmc_run(pop, 10.0, &zero_noise(0.25), &[], 50, &mut rng).unwrap();
        let m0 = run.series[0].m1;
        for row in &run.series {
            assert!(
                (row.m1 - m0).abs() <= 1e-12 * m0,
                "mean moved from {m0} to {} at t = {}",
                row.m1,
                row.t
            );
        }
    }

    #[test]
    fn variance_decays_at_the_predicted_rate() {
        let lambda = 0.25;
        let mut rng = seeded_stream(26, 0);
        let pop = WealthPopulation::iid_exponential(10_000, 1.0, &mut rng).unwrap();
        let run = dsmc_run(pop, 6.0, &zero_noise(lambda), &[], 60, &mut rng).unwrap();
        let mut ts = Vec::new();
        let mut log_var = Vec::new();
        for row in &run.series {
            if row.t >= 1.0 && row.t <= 5.0 {
                ts.push(row.t);
                log_var.push((row.m2 - row.m1 * row.m1).ln());
            }
        }
        let fit = linear_fit(&ts, &log_var).unwrap();
        let target = moment_rate(2.0, lambda);
        assert!(
            (fit.slope - target).abs() < 0.1 * target.abs(),
            "fitted rate {} vs S(2) = {target}",
            fit.slope
        );
    }

    #[test]
    fn noisy_steady_state_has_an_exponential_tail() {
        let params = ExchangeParams::new(0.3, NoiseSpec::TwoPoint { sigma: 0.2 }).unwrap();
        let mut rng = seeded_stream(27, 0);
        let pop = WealthPopulation::iid_exponential(5000, 1.0, &mut rng).unwrap();
        let run = dsmc_run(pop, 30.0, &params, &[], 10, &mut rng).unwrap();
        let sample = EmpiricalSample::new(run.population.wealths().to_vec()).unwrap();
        let fit = fit_exponential_tail(&sample, 0.8).unwrap();
        assert!(fit.rate < 0.0, "tail rate {}", fit.rate);
        assert!(fit.r_squared >= 0.9, "tail fit r2 {}", fit.r_squared);
    }

    #[test]
    fn run_records_requested_extra_moments() {
        let mut rng = seeded_stream(28, 0);
        let pop = WealthPopulation::iid_exponential(500, 1.0, &mut rng).unwrap();
        let run = dsmc_run(pop, 2.0, &zero_noise(0.4), &[0.5, 3.0], 5, &mut rng).unwrap();
        let last = run.series.last().unwrap();
        assert_eq!(last.extra.len(), 2);
        assert!((last.extra[0] - run.population.empirical_moment(0.5).unwrap()).abs() < 1e-15);
        assert!((last.extra[1] - run.population.empirical_moment(3.0).unwrap()).abs() < 1e-15);
        assert!((last.t - run.population.time()).abs() < 1e-12);
    }

    #[test]
    fn run_validates_times_and_moment_orders() {
        let mut rng = seeded_stream(29, 0);
        let pop = WealthPopulation::iid_exponential(100, 1.0, &mut rng).unwrap();
        assert!(dsmc_run(pop.clone(), -1.0, &zero_noise(0.3), &[], 5, &mut rng).is_err());
        assert!(dsmc_run(pop.clone(), 1.0, &zero_noise(0.3), &[-0.5], 5, &mut rng).is_err());
        // t_end equal to the current time is a legal zero-event run.
        let run = dsmc_run(pop, 0.0, &zero_noise(0.3), &[], 5, &mut rng).unwrap();
        assert_eq!(run.series.len(), 1);
        assert_eq!(run.population.time(), 0.0);
    }

    #[test]
    fn matched_seeds_reproduce_a_run_exactly() {
        let params = ExchangeParams::new(0.35, NoiseSpec::Uniform { sigma: 0.2 }).unwrap();
        let run_once = || {
            let mut rng = seeded_stream(30, 7);
            let pop = WealthPopulation::iid_exponential(300, 1.0, &mut rng).unwrap();
            dsmc_run(pop, 5.0, &params, &[3.0], 8, &mut rng).unwrap()
        };
        let a = run_once();
        let b = run_once();
        assert_eq!(a.population.wealths(), b.population.wealths());
        assert_eq!(a.series, b.series);
        let mut other = seeded_stream(30, 8);
        let pop = WealthPopulation::iid_exponential(300, 1.0, &mut other).unwrap();
        let c = dsmc_run(pop, 5.0, &params, &[3.0], 8, &mut other).unwrap();
        assert_ne!(a.population.wealths(), c.population.wealths());
    }
}
