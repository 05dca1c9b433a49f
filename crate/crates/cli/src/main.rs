//! Command-line runner for the pairwise-exchange models in `cofrag`.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 runtime failure,
//! 3 when the run finished but a requested check failed.

mod commands;
mod config;
mod output;
mod runctx;

use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};

use commands::{
    exec_converge, exec_dc, exec_dd, exec_fp, exec_kinetic, plan_converge, plan_dc, plan_dd,
    plan_fp, plan_kinetic, resolve_common, run_validate, CommonArgs, ConvergeArgs, DcArgs, DdArgs,
    FpArgs, KineticArgs, ValidateArgs,
};
use config::{FileConfig, Resolver};
use runctx::{RunCtx, RunError};

#[derive(Parser)]
#[command(
    name = "cofrag",
    version,
    about = "Simulation and verification runner for pairwise wealth-exchange models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integer-coin redistribution chain; exact matrices on small spaces.
    Dd(DdArgs),
    /// Continuous proportional-split chain on the simplex.
    Dc(DcArgs),
    /// Binary-trade wealth exchange with optional multiplicative noise.
    Kinetic(KineticArgs),
    /// Mean-field wealth density evolution on a truncated domain.
    Fp(FpArgs),
    /// Distance between the discrete and continuous chains as coins grow.
    Converge(ConvergeArgs),
    /// Check a config file for problems without running anything.
    Validate(ValidateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let code = match &cli.command {
        Command::Dd(args) => drive("dd", &args.common, |r| plan_dd(args, r), exec_dd),
        Command::Dc(args) => drive("dc", &args.common, |r| plan_dc(args, r), exec_dc),
        Command::Kinetic(args) => drive(
            "kinetic",
            &args.common,
            |r| plan_kinetic(args, r),
            exec_kinetic,
        ),
        Command::Fp(args) => drive("fp", &args.common, |r| plan_fp(args, r), exec_fp),
        Command::Converge(args) => drive(
            "converge",
            &args.common,
            |r| plan_converge(args, r),
            exec_converge,
        ),
        Command::Validate(args) => run_validate(args),
    };
    ExitCode::from(code)
}

/// Shared run scaffold: resolve the config, bail with every diagnostic on
/// any problem, otherwise execute and write summary.json whatever happens.
fn drive<P>(
    name: &'static str,
    common: &CommonArgs,
    plan: impl FnOnce(&mut Resolver) -> Option<P>,
    exec: impl FnOnce(&P, &mut RunCtx) -> Result<(), RunError>,
) -> u8 {
    let mut diags = Vec::new();
    let file = common
        .config
        .as_ref()
        .and_then(|path| FileConfig::load(path, &mut diags));
    let mut r = Resolver::new(file, diags);
    r.model_gate(name);
    let settings = resolve_common(&mut r, common);
    let plan = plan(&mut r);
    r.finish();
    if !r.diags.is_empty() {
        for diag in &r.diags {
            eprintln!("{diag}");
        }
        eprintln!("{name}: invalid configuration; nothing was run");
        return 1;
    }
    let settings = settings.expect("no diagnostics implies settings resolved");
    let plan = plan.expect("no diagnostics implies a complete plan");
    let mut ctx = match RunCtx::create(name, settings, r.resolved) {
        Ok(ctx) => ctx,
        Err(err) => {
            eprintln!("{name}: {err}");
            return 2;
        }
    };
    match exec(&plan, &mut ctx) {
        Ok(()) => {
            match ctx.write_summary(None) {
                Ok(path) => println!("summary: {}", path.display()),
                Err(err) => {
                    eprintln!("{name}: failed to write summary: {err}");
                    return 2;
                }
            }
            if ctx.all_pass() {
                0
            } else {
                eprintln!("{name}: one or more checks failed");
                3
            }
        }
        Err(err) => {
            eprintln!("{name}: {err}");
            let _ = ctx.write_summary(Some(&err));
            2
        }
    }
}
