//! Subcommand schemas, config resolution, and execution.
//!
//! Every parameter can come from a flag or a config file key of the same
//! name (flags win), so each subcommand has a `plan_*` step that resolves
//! and validates without side effects, and an `exec_*` step that runs the
//! model and fills the run context. `validate` reuses the plan step alone.

use std::path::PathBuf;

use clap::Args;

use cofrag::chain_dc::run_dc;
use cofrag::chain_dd::{
    build_transition_matrix, dd_step, rank_state, sample_uniform_state, state_count, DiscretePoint,
};
use cofrag::fokker_planck::{fp_solve, stationary_solution, DensityField, FpConfig};
use cofrag::kinetic::{dsmc_run, moment_rate, ExchangeParams, NoiseSpec, WealthPopulation};
use cofrag::simplex::SimplexPoint;
use cofrag::stats::{
    dd_dc_convergence, fit_exponential_tail, linear_fit, per_coordinate_beta_ks,
    spearman_rank_correlation, total_variation, CheckReport, EmpiricalSample,
};

use crate::config::{F64List, FileConfig, NoiseKind, OutputFormat, Resolver, StartKind, U64List};
use crate::output::Cell;
use crate::runctx::{RunCtx, RunError, RunSettings};

#[derive(Args, Default)]
pub struct CommonArgs {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Global seed; each purpose draws from its own derived stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for data files and summary.json.
    #[arg(long, value_name = "DIR")]
    pub out: Option<String>,
    /// Data file format.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

pub fn resolve_common(r: &mut Resolver, args: &CommonArgs) -> Option<RunSettings> {
    let seed = r.optional("seed", args.seed, 0u64);
    let out = r.optional("out", args.out.clone(), ".".to_string());
    let format = r.optional("format", args.format, OutputFormat::Csv);
    Some(RunSettings {
        seed: seed?,
        out: PathBuf::from(out?),
        format: format?,
    })
}

#[derive(Args, Default)]
pub struct DdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of agents (coordinates of the coin vector).
    #[arg(long)]
    agents: Option<usize>,
    /// Total coins shared by the agents.
    #[arg(long)]
    coins: Option<u64>,
    /// Pair moves to simulate (0 skips the trajectory).
    #[arg(long)]
    steps: Option<u64>,
    /// Record every thin-th trajectory state.
    #[arg(long)]
    thin: Option<u64>,
    /// Enumerate the state space and write the exact transition matrix.
    #[arg(long)]
    matrix: bool,
    /// Compare trajectory visit frequencies with the uniform law.
    #[arg(long)]
    check_uniform: bool,
    /// Largest state space the matrix and uniform paths may enumerate.
    #[arg(long)]
    max_states: Option<u64>,
    /// Pass bound for the uniform-visit total-variation check.
    #[arg(long)]
    uniform_tv_max: Option<f64>,
}

pub struct DdPlan {
    agents: usize,
    coins: u64,
    steps: u64,
    thin: u64,
    matrix: bool,
    check_uniform: bool,
    max_states: u64,
    uniform_tv_max: f64,
}

pub fn plan_dd(args: &DdArgs, r: &mut Resolver) -> Option<DdPlan> {
    let agents = r.required("agents", args.agents);
    let coins = r.required("coins", args.coins);
    let steps = r.optional("steps", args.steps, 100_000u64);
    let thin = r.optional("thin", args.thin, 1u64);
    let matrix = r.optional("matrix", args.matrix.then_some(true), false);
    let check_uniform = r.optional("check_uniform", args.check_uniform.then_some(true), false);
    let max_states = r.optional("max_states", args.max_states, 2000u64);
    let uniform_tv_max = r.optional("uniform_tv_max", args.uniform_tv_max, 0.02f64);

    if let Some(a) = agents {
        if a < 2 {
            r.violation("agents", format!("need at least 2 agents, got {a}"));
        }
    }
    if thin == Some(0) {
        r.violation("thin", "thin must be at least 1");
    }
    if let Some(bound) = uniform_tv_max {
        if !(bound.is_finite() && bound > 0.0) {
            r.violation(
                "uniform_tv_max",
                format!("bound must be positive and finite, got {bound}"),
            );
        }
    }
    if check_uniform == Some(true) && steps == Some(0) {
        r.violation("check_uniform", "the uniform check needs steps >= 1");
    }
    if let (Some(a), Some(c), Some(cap)) = (agents, coins, max_states) {
        if a >= 2 && (matrix == Some(true) || check_uniform == Some(true)) {
            match state_count(a, c) {
                Ok(k) if k <= cap => {}
                Ok(k) => r.violation(
                    "max_states",
                    format!("state space has {k} states, above the cap of {cap}"),
                ),
                Err(err) => r.violation("coins", err),
            }
        }
    }
    Some(DdPlan {
        agents: agents?,
        coins: coins?,
        steps: steps?,
        thin: thin?,
        matrix: matrix?,
        check_uniform: check_uniform?,
        max_states: max_states?,
        uniform_tv_max: uniform_tv_max?,
    })
}

pub fn exec_dd(plan: &DdPlan, ctx: &mut RunCtx) -> Result<(), RunError> {
    if plan.matrix {
        let (states, matrix) = build_transition_matrix(plan.agents, plan.coins, plan.max_states)?;
        let k = states.len();
        let mut columns = vec!["rank".to_string()];
        columns.extend((0..plan.agents).map(|i| format!("c{i}")));
        let rows: Vec<Vec<Cell>> = states
            .iter()
            .enumerate()
            .map(|(rank, state)| {
                let mut row = vec![Cell::U(rank as u64)];
                row.extend(state.counts().iter().map(|&c| Cell::U(c)));
                row
            })
            .collect();
        ctx.table("states", &columns, &rows)?;
        ctx.matrix("transition_matrix", &matrix)?;

        let mut worst = 0.0f64;
        for row in matrix.rows() {
            worst = worst.max((row.sum() - 1.0).abs());
        }
        for col in matrix.columns() {
            worst = worst.max((col.sum() - 1.0).abs());
        }
        ctx.stat_u("states", k as u64);
        ctx.stat_f("max_row_col_deviation", worst);
        ctx.check(CheckReport {
            test: "doubly_stochastic".to_string(),
            statistic: worst,
            critical_value: 1e-12,
            n: k as u64,
            pass: worst < 1e-12,
            thinning: None,
        });
    }
    if plan.steps > 0 {
        let mut rng = ctx.stream("trajectory");
        let mut state = sample_uniform_state(plan.agents, plan.coins, &mut rng)?;
        let mut visits = if plan.check_uniform {
            Some(vec![0u64; state_count(plan.agents, plan.coins)? as usize])
        } else {
            None
        };
        let mut columns = vec!["step".to_string()];
        columns.extend((0..plan.agents).map(|i| format!("c{i}")));
        let record = |step: u64, state: &DiscretePoint, rows: &mut Vec<Vec<Cell>>| {
            let mut row = vec![Cell::U(step)];
            row.extend(state.counts().iter().map(|&c| Cell::U(c)));
            rows.push(row);
        };
        let mut rows = Vec::new();
        record(0, &state, &mut rows);
        for step in 1..=plan.steps {
            dd_step(&mut state, &mut rng);
            if step % plan.thin == 0 {
                record(step, &state, &mut rows);
            }
            if let Some(counts) = visits.as_mut() {
                counts[rank_state(&state)? as usize] += 1;
            }
        }
        ctx.table("trajectory", &columns, &rows)?;
        if let Some(counts) = visits {
            let k = counts.len();
            let empirical: Vec<f64> = counts
                .iter()
                .map(|&v| v as f64 / plan.steps as f64)
                .collect();
            let uniform = vec![1.0 / k as f64; k];
            let tv = total_variation(&empirical, &uniform)?;
            ctx.stat_f("uniform_tv", tv);
            ctx.check(CheckReport {
                test: "uniform_tv".to_string(),
                statistic: tv,
                critical_value: plan.uniform_tv_max,
                n: plan.steps,
                pass: tv < plan.uniform_tv_max,
                thinning: None,
            });
        }
    }
    Ok(())
}

#[derive(Args, Default)]
pub struct DcArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of agents.
    #[arg(long)]
    agents: Option<usize>,
    /// Pair moves to simulate.
    #[arg(long)]
    steps: Option<u64>,
    /// Record every thin-th state (default: agents squared).
    #[arg(long)]
    thin: Option<u64>,
    /// Fraction of recorded rows dropped from the front before checks.
    #[arg(long)]
    burn_fraction: Option<f64>,
    /// KS-test each coordinate against its equilibrium Beta marginal.
    #[arg(long)]
    check_beta: bool,
}

pub struct DcPlan {
    agents: usize,
    steps: u64,
    thin: u64,
    burn_fraction: f64,
    check_beta: bool,
}

pub fn plan_dc(args: &DcArgs, r: &mut Resolver) -> Option<DcPlan> {
    let agents = r.required("agents", args.agents);
    let steps = r.required("steps", args.steps);
    let default_thin = agents.map_or(1, |a| (a * a) as u64);
    let thin = r.optional("thin", args.thin, default_thin);
    let burn_fraction = r.optional("burn_fraction", args.burn_fraction, 0.1f64);
    let check_beta = r.optional("check_beta", args.check_beta.then_some(true), false);

    if let Some(a) = agents {
        if a < 2 {
            r.violation("agents", format!("need at least 2 agents, got {a}"));
        }
    }
    if steps == Some(0) {
        r.violation("steps", "steps must be at least 1");
    }
    if thin == Some(0) {
        r.violation("thin", "thin must be at least 1");
    }
    if let Some(b) = burn_fraction {
        if !(b.is_finite() && (0.0..1.0).contains(&b)) {
            r.violation(
                "burn_fraction",
                format!("burn fraction must lie in [0, 1), got {b}"),
            );
        }
    }
    Some(DcPlan {
        agents: agents?,
        steps: steps?,
        thin: thin?,
        burn_fraction: burn_fraction?,
        check_beta: check_beta?,
    })
}

pub fn exec_dc(plan: &DcPlan, ctx: &mut RunCtx) -> Result<(), RunError> {
    let mut rng = ctx.stream("trajectory");
    let initial = SimplexPoint::barycenter(plan.agents)?;
    let points = run_dc(&initial, plan.steps, plan.thin, &mut rng)?;

    let mut columns = vec!["step".to_string()];
    columns.extend((0..plan.agents).map(|i| format!("x{i}")));
    let rows: Vec<Vec<Cell>> = points
        .iter()
        .enumerate()
        .map(|(idx, point)| {
            let mut row = vec![Cell::U(idx as u64 * plan.thin)];
            row.extend(point.coords().iter().map(|&x| Cell::F(x)));
            row
        })
        .collect();
    ctx.table("trajectory", &columns, &rows)?;

    let burn = (points.len() as f64 * plan.burn_fraction).floor() as usize;
    let kept = &points[burn..];
    ctx.stat_u("recorded_points", points.len() as u64);
    ctx.stat_u("kept_points", kept.len() as u64);
    if plan.check_beta {
        for (i, ks) in per_coordinate_beta_ks(kept)?.iter().enumerate() {
            ctx.check(CheckReport::from_ks(
                format!("beta_marginal_coord_{i}"),
                ks,
                Some(plan.thin),
            ));
        }
    }
    Ok(())
}

#[derive(Args, Default)]
pub struct KineticArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of agents.
    #[arg(long)]
    agents: Option<usize>,
    /// Fraction of wealth committed per trade, in (0,1).
    #[arg(long)]
    lambda: Option<f64>,
    /// Kinetic time horizon (one unit = one expected trade per agent).
    #[arg(long)]
    t_end: Option<f64>,
    /// Noise law for the multiplicative shocks.
    #[arg(long, value_enum)]
    noise: Option<NoiseKind>,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Mean of the exponential initial wealths.
    #[arg(long)]
    initial_mean: Option<f64>,
    /// Moment rows to record.
    #[arg(long)]
    samples: Option<usize>,
    /// Extra moment orders to record, e.g. "0.5,3".
    #[arg(long)]
    moments: Option<F64List>,
    /// Verify mean conservation and the variance-decay rate (zero noise).
    #[arg(long)]
    check_moments: bool,
    /// Fit an exponential to the upper tail of the final wealths.
    #[arg(long)]
    check_tail: bool,
    /// Quantile where the tail fit starts.
    #[arg(long)]
    tail_quantile: Option<f64>,
}

pub struct KineticPlan {
    agents: usize,
    params: ExchangeParams,
    t_end: f64,
    initial_mean: f64,
    samples: usize,
    moments: Vec<f64>,
    check_moments: bool,
    check_tail: bool,
    tail_quantile: f64,
}

pub fn plan_kinetic(args: &KineticArgs, r: &mut Resolver) -> Option<KineticPlan> {
    let agents = r.required("agents", args.agents);
    let lambda = r.required("lambda", args.lambda);
    let t_end = r.required("t_end", args.t_end);
    let noise = r.optional("noise", args.noise, NoiseKind::Zero);
    let sigma = r.optional("sigma", args.sigma, 0.0f64);
    let initial_mean = r.optional("initial_mean", args.initial_mean, 1.0f64);
    let samples = r.optional("samples", args.samples, 50usize);
    let moments = r.optional("moments", args.moments.clone(), F64List(Vec::new()));
    let check_moments = r.optional("check_moments", args.check_moments.then_some(true), false);
    let check_tail = r.optional("check_tail", args.check_tail.then_some(true), false);
    let tail_quantile = r.optional("tail_quantile", args.tail_quantile, 0.8f64);

    if let Some(a) = agents {
        if a < 2 {
            r.violation("agents", format!("need at least 2 agents, got {a}"));
        }
    }
    if let Some(t) = t_end {
        if !(t.is_finite() && t > 0.0) {
            r.violation(
                "t_end",
                format!("t_end must be positive and finite, got {t}"),
            );
        }
    }
    if let Some(m) = initial_mean {
        if !(m.is_finite() && m > 0.0) {
            r.violation(
                "initial_mean",
                format!("initial mean must be positive and finite, got {m}"),
            );
        }
    }
    if let Some(list) = &moments {
        for &s in &list.0 {
            if !(s.is_finite() && s >= 0.0) {
                r.violation(
                    "moments",
                    format!("moment orders must be non-negative, got {s}"),
                );
            }
        }
    }
    if let Some(q) = tail_quantile {
        if !(q > 0.0 && q < 1.0) {
            r.violation(
                "tail_quantile",
                format!("quantile must lie strictly inside (0, 1), got {q}"),
            );
        }
    }
    if check_moments == Some(true) && noise.is_some() && noise != Some(NoiseKind::Zero) {
        r.violation(
            "check_moments",
            "moment checks assume zero noise: the mean is conserved pathwise only without shocks",
        );
    }
    let params = match (lambda, noise, sigma) {
        (Some(l), Some(kind), Some(s)) => {
            if kind == NoiseKind::Zero && s != 0.0 {
                r.violation(
                    "sigma",
                    "sigma has no effect with zero noise; drop it or choose two_point or uniform",
                );
            }
            let spec = match kind {
                NoiseKind::Zero => NoiseSpec::Zero,
                NoiseKind::TwoPoint => NoiseSpec::TwoPoint { sigma: s },
                NoiseKind::Uniform => NoiseSpec::Uniform { sigma: s },
            };
            match ExchangeParams::new(l, spec) {
                Ok(params) => Some(params),
                Err(err) => {
                    let message = err.to_string();
                    let key = if message.contains("sigma") {
                        "sigma"
                    } else {
                        "lambda"
                    };
                    r.violation(key, message);
                    None
                }
            }
        }
        _ => None,
    };
    Some(KineticPlan {
        agents: agents?,
        params: params?,
        t_end: t_end?,
        initial_mean: initial_mean?,
        samples: samples?,
        moments: moments?.0,
        check_moments: check_moments?,
        check_tail: check_tail?,
        tail_quantile: tail_quantile?,
    })
}

pub fn exec_kinetic(plan: &KineticPlan, ctx: &mut RunCtx) -> Result<(), RunError> {
    let mut population_rng = ctx.stream("population");
    let population =
        WealthPopulation::iid_exponential(plan.agents, plan.initial_mean, &mut population_rng)?;
    let mut event_rng = ctx.stream("events");
    let run = dsmc_run(
        population,
        plan.t_end,
        &plan.params,
        &plan.moments,
        plan.samples,
        &mut event_rng,
    )?;

    let mut columns = vec!["t".to_string(), "m1".to_string(), "m2".to_string()];
    columns.extend(plan.moments.iter().map(|s| format!("m_{s}")));
    let rows: Vec<Vec<Cell>> = run
        .series
        .iter()
        .map(|row| {
            let mut cells = vec![Cell::F(row.t), Cell::F(row.m1), Cell::F(row.m2)];
            cells.extend(row.extra.iter().map(|&v| Cell::F(v)));
            cells
        })
        .collect();
    ctx.table("moments", &columns, &rows)?;

    let events = ((plan.t_end * plan.agents as f64) / 2.0).ceil() as u64;
    ctx.stat_u("events", events);
    let last = run
        .series
        .last()
        .expect("series always has the initial row");
    ctx.stat_f("final_m1", last.m1);
    ctx.stat_f("final_m2", last.m2);

    if plan.check_moments {
        let m0 = run.series[0].m1;
        let drift = run
            .series
            .iter()
            .map(|row| ((row.m1 - m0) / m0).abs())
            .fold(0.0f64, f64::max);
        ctx.stat_f("mean_drift", drift);
        ctx.check(CheckReport {
            test: "mean_conservation".to_string(),
            statistic: drift,
            critical_value: 1e-12,
            n: plan.agents as u64,
            pass: drift <= 1e-12,
            thinning: None,
        });

        let (lo, hi) = (0.15 * plan.t_end, 0.85 * plan.t_end);
        let mut ts = Vec::new();
        let mut log_var = Vec::new();
        for row in &run.series {
            let var = row.m2 - row.m1 * row.m1;
            if row.t >= lo && row.t <= hi && var > 0.0 {
                ts.push(row.t);
                log_var.push(var.ln());
            }
        }
        let fit = linear_fit(&ts, &log_var)?;
        let target = moment_rate(2.0, plan.params.lambda());
        let relative = ((fit.slope - target) / target).abs();
        ctx.stat_f("fitted_variance_rate", fit.slope);
        ctx.stat_f("predicted_variance_rate", target);
        ctx.check(CheckReport {
            test: "variance_decay_rate".to_string(),
            statistic: relative,
            critical_value: 0.1,
            n: plan.agents as u64,
            pass: relative < 0.1,
            thinning: None,
        });
    }
    if plan.check_tail {
        let sample = EmpiricalSample::new(run.population.wealths().to_vec())?;
        let fit = fit_exponential_tail(&sample, plan.tail_quantile)?;
        ctx.stat_f("tail_rate", fit.rate);
        ctx.stat_f("tail_r2", fit.r_squared);
        ctx.stat_f("tail_support_lo", fit.support_lo);
        ctx.check(CheckReport {
            test: "tail_rate_negative".to_string(),
            statistic: fit.rate,
            critical_value: 0.0,
            n: plan.agents as u64,
            pass: fit.rate < 0.0,
            thinning: None,
        });
        ctx.check(CheckReport {
            test: "tail_fit_r2".to_string(),
            statistic: fit.r_squared,
            critical_value: 0.9,
            n: plan.agents as u64,
            pass: fit.r_squared >= 0.9,
            thinning: None,
        });
    }
    Ok(())
}

#[derive(Args, Default)]
pub struct FpArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Diffusion strength of the wealth equation.
    #[arg(long)]
    gamma: Option<f64>,
    /// Mean wealth pinned by the drift term.
    #[arg(long)]
    mean_wealth: Option<f64>,
    /// Domain truncation (default 50 * mean_wealth).
    #[arg(long)]
    w_max: Option<f64>,
    /// Number of uniform cells.
    #[arg(long)]
    cells: Option<usize>,
    /// Backward Euler step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Time horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Initial condition.
    #[arg(long, value_enum)]
    start: Option<StartKind>,
    /// Lower edge of the bump start.
    #[arg(long)]
    bump_lo: Option<f64>,
    /// Upper edge of the bump start.
    #[arg(long)]
    bump_hi: Option<f64>,
    /// Diagnostics rows to record.
    #[arg(long)]
    outputs: Option<usize>,
    /// Verify mass conservation and relaxation to the stationary profile.
    #[arg(long)]
    check_stationary: bool,
}

pub struct FpPlan {
    gamma: f64,
    mean_wealth: f64,
    w_max: f64,
    cells: usize,
    dt: f64,
    t_end: f64,
    start: StartKind,
    bump_lo: f64,
    bump_hi: f64,
    outputs: usize,
    check_stationary: bool,
}

pub fn plan_fp(args: &FpArgs, r: &mut Resolver) -> Option<FpPlan> {
    let gamma = r.required("gamma", args.gamma);
    let mean_wealth = r.optional("mean_wealth", args.mean_wealth, 1.0f64);
    let default_w_max = 50.0 * mean_wealth.unwrap_or(1.0);
    let w_max = r.optional("w_max", args.w_max, default_w_max);
    let cells = r.optional("cells", args.cells, 256usize);
    let dt = r.optional("dt", args.dt, 0.01f64);
    let t_end = r.required("t_end", args.t_end);
    let start = r.optional("start", args.start, StartKind::Bump);
    let default_bump_hi = 2.0 * mean_wealth.unwrap_or(1.0);
    let bump_lo = r.optional("bump_lo", args.bump_lo, 0.0f64);
    let bump_hi = r.optional("bump_hi", args.bump_hi, default_bump_hi);
    let outputs = r.optional("outputs", args.outputs, 20usize);

    // Mirrors the solver config's own validation so `validate` can diagnose
    // without constructing anything.
    if let Some(g) = gamma {
        if !(g.is_finite() && g > 0.0) {
            r.violation(
                "gamma",
                format!("gamma must be positive and finite, got {g}"),
            );
        }
    }
    if let Some(m) = mean_wealth {
        if !(m.is_finite() && m > 0.0) {
            r.violation(
                "mean_wealth",
                format!("mean_wealth must be positive and finite, got {m}"),
            );
        }
    }
    if let (Some(w), Some(m)) = (w_max, mean_wealth) {
        if !(w.is_finite() && w > m) {
            r.violation(
                "w_max",
                format!("w_max must be finite and exceed mean_wealth, got w_max = {w}, mean_wealth = {m}"),
            );
        }
    }
    if let Some(k) = cells {
        if k < 16 {
            r.violation("cells", format!("need at least 16 cells, got {k}"));
        }
    }
    if let Some(d) = dt {
        if !(d.is_finite() && d > 0.0) {
            r.violation("dt", format!("dt must be positive and finite, got {d}"));
        }
    }
    if let Some(t) = t_end {
        if !(t.is_finite() && t > 0.0) {
            r.violation(
                "t_end",
                format!("t_end must be positive and finite, got {t}"),
            );
        }
    }
    if outputs == Some(0) {
        r.violation("outputs", "need at least one diagnostics row");
    }
    if let (Some(StartKind::Bump), Some(lo), Some(hi), Some(w)) = (start, bump_lo, bump_hi, w_max) {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo && hi <= w) {
            r.violation(
                "bump_lo",
                format!("bump support must satisfy 0 <= lo < hi <= w_max, got [{lo}, {hi}]"),
            );
        }
    }
    Some(FpPlan {
        gamma: gamma?,
        mean_wealth: mean_wealth?,
        w_max: w_max?,
        cells: cells?,
        dt: dt?,
        t_end: t_end?,
        start: start?,
        bump_lo: bump_lo?,
        bump_hi: bump_hi?,
        outputs: outputs?,
        check_stationary: r.optional(
            "check_stationary",
            args.check_stationary.then_some(true),
            false,
        )?,
    })
}

pub fn exec_fp(plan: &FpPlan, ctx: &mut RunCtx) -> Result<(), RunError> {
    let cfg = FpConfig::new(
        plan.gamma,
        plan.mean_wealth,
        plan.w_max,
        plan.cells,
        plan.dt,
    )?;
    let initial = match plan.start {
        StartKind::Bump => DensityField::uniform_bump(&cfg, plan.bump_lo, plan.bump_hi)?,
        StartKind::Stationary => stationary_solution(&cfg),
    };
    let run = fp_solve(&initial, &cfg, plan.t_end, plan.outputs)?;

    let columns: Vec<String> = ["t", "mass", "mean", "l1_to_stationary"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<Cell>> = run
        .diagnostics
        .iter()
        .map(|d| {
            vec![
                Cell::F(d.t),
                Cell::F(d.mass),
                Cell::F(d.mean),
                Cell::F(d.l1_to_stationary),
            ]
        })
        .collect();
    ctx.table("diagnostics", &columns, &rows)?;

    let density_columns = vec!["w".to_string(), "g".to_string()];
    let density_rows: Vec<Vec<Cell>> = run
        .field
        .cell_averages()
        .iter()
        .enumerate()
        .map(|(i, &g)| vec![Cell::F(cfg.cell_center(i)), Cell::F(g)])
        .collect();
    ctx.table("final_density", &density_columns, &density_rows)?;

    let mass_drift = run
        .diagnostics
        .iter()
        .map(|d| (d.mass - 1.0).abs())
        .fold(0.0f64, f64::max);
    let final_row = run.diagnostics.last().expect("diagnostics start at t = 0");
    ctx.stat_f("mass_drift", mass_drift);
    ctx.stat_f("final_l1_to_stationary", final_row.l1_to_stationary);
    ctx.stat_f("final_mean", final_row.mean);
    if plan.check_stationary {
        ctx.check(CheckReport {
            test: "mass_conservation".to_string(),
            statistic: mass_drift,
            critical_value: 1e-9,
            n: plan.cells as u64,
            pass: mass_drift < 1e-9,
            thinning: None,
        });
        ctx.check(CheckReport {
            test: "stationary_l1".to_string(),
            statistic: final_row.l1_to_stationary,
            critical_value: 0.02,
            n: plan.cells as u64,
            pass: final_row.l1_to_stationary < 0.02,
            thinning: None,
        });
    }
    Ok(())
}

#[derive(Args, Default)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of agents in both chains.
    #[arg(long)]
    agents: Option<usize>,
    /// Comma-separated coin totals for the discrete chain, e.g. "10,100,1000".
    #[arg(long)]
    coins: Option<U64List>,
    /// Chain steps before sampling the first coordinate.
    #[arg(long)]
    k_steps: Option<usize>,
    /// Independent replicas per sample.
    #[arg(long)]
    replicas: Option<usize>,
    /// Require the KS distance to shrink as coins grow.
    #[arg(long)]
    check_monotone: bool,
}

pub struct ConvergePlan {
    agents: usize,
    coins: Vec<u64>,
    k_steps: usize,
    replicas: usize,
    check_monotone: bool,
}

pub fn plan_converge(args: &ConvergeArgs, r: &mut Resolver) -> Option<ConvergePlan> {
    let agents = r.required("agents", args.agents);
    let coins = r.required("coins", args.coins.clone());
    let k_steps = r.required("k_steps", args.k_steps);
    let replicas = r.required("replicas", args.replicas);
    let check_monotone = r.optional("check_monotone", args.check_monotone.then_some(true), false);

    if let Some(a) = agents {
        if a < 2 {
            r.violation("agents", format!("need at least 2 agents, got {a}"));
        }
    }
    if let Some(list) = &coins {
        if list.0.is_empty() {
            r.violation("coins", "need at least one coin total");
        }
        if list.0.contains(&0) {
            r.violation("coins", "coin totals must be at least 1");
        }
        if check_monotone == Some(true) && list.0.len() < 2 {
            r.violation(
                "check_monotone",
                "the monotonicity check needs at least two coin totals",
            );
        }
    }
    if let Some(n) = replicas {
        if n < 100 {
            r.violation("replicas", format!("need at least 100 replicas, got {n}"));
        }
    }
    Some(ConvergePlan {
        agents: agents?,
        coins: coins?.0,
        k_steps: k_steps?,
        replicas: replicas?,
        check_monotone: check_monotone?,
    })
}

pub fn exec_converge(plan: &ConvergePlan, ctx: &mut RunCtx) -> Result<(), RunError> {
    let mut rng = ctx.stream("replicas");
    let distances = dd_dc_convergence(
        &plan.coins,
        plan.agents,
        plan.k_steps,
        plan.replicas,
        &mut rng,
    )?;

    let columns = vec!["coins".to_string(), "ks_distance".to_string()];
    let rows: Vec<Vec<Cell>> = distances
        .iter()
        .map(|&(n, d)| vec![Cell::U(n), Cell::F(d)])
        .collect();
    ctx.table("distances", &columns, &rows)?;

    let first = distances.first().expect("coin list is non-empty").1;
    let last = distances.last().expect("coin list is non-empty").1;
    ctx.stat_f("first_distance", first);
    ctx.stat_f("last_distance", last);
    let rank_corr = if distances.len() >= 2 {
        let ns: Vec<f64> = distances.iter().map(|&(n, _)| n as f64).collect();
        let ds: Vec<f64> = distances.iter().map(|&(_, d)| d).collect();
        let rho = spearman_rank_correlation(&ns, &ds)?;
        ctx.stat_f("rank_correlation", rho);
        Some(rho)
    } else {
        None
    };
    if plan.check_monotone {
        ctx.check(CheckReport {
            test: "distance_shrinks".to_string(),
            statistic: last,
            critical_value: first,
            n: plan.replicas as u64,
            pass: last <= first,
            thinning: None,
        });
        let rho = rank_corr.expect("validated: at least two coin totals");
        ctx.check(CheckReport {
            test: "rank_correlation_nonpositive".to_string(),
            statistic: rho,
            critical_value: 0.0,
            n: plan.replicas as u64,
            pass: rho <= 0.0,
            thinning: None,
        });
    }
    Ok(())
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Config file to check.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
}

/// Checks a config file against its model's schema without running anything;
/// diagnostics go to stdout, one per line.
pub fn run_validate(args: &ValidateArgs) -> u8 {
    let mut diags = Vec::new();
    let Some(file) = FileConfig::load(&args.config, &mut diags) else {
        for diag in &diags {
            println!("{diag}");
        }
        return 1;
    };
    let model = file.get("model").map(str::to_string);
    let model_location = file.location("model");
    let mut r = Resolver::new(Some(file), diags);
    let _ = resolve_common(&mut r, &CommonArgs::default());
    match model.as_deref() {
        None => r.diags.push(format!(
            "{}: missing required key \"model\" (dd, dc, kinetic, fp, or converge)",
            args.config.display()
        )),
        Some(name @ ("dd" | "dc" | "kinetic" | "fp" | "converge")) => {
            r.model_gate(name);
            match name {
                "dd" => {
                    plan_dd(&DdArgs::default(), &mut r);
                }
                "dc" => {
                    plan_dc(&DcArgs::default(), &mut r);
                }
                "kinetic" => {
                    plan_kinetic(&KineticArgs::default(), &mut r);
                }
                "fp" => {
                    plan_fp(&FpArgs::default(), &mut r);
                }
                "converge" => {
                    plan_converge(&ConvergeArgs::default(), &mut r);
                }
                _ => unreachable!(),
            }
        }
        Some(other) => {
            r.consume("model");
            r.diags.push(format!(
                "{}: unknown model \"{other}\" (expected dd, dc, kinetic, fp, or converge)",
                model_location.expect("the model key was read from the file")
            ));
        }
    }
    r.finish();
    if r.diags.is_empty() {
        println!("ok: configuration is valid");
        0
    } else {
        for diag in &r.diags {
            println!("{diag}");
        }
        1
    }
}
