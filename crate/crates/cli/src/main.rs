//! Experiment runner: deterministic execution of the workbench's checks,
//! sweeps, and estimators with machine-readable output.
//!
//! Exit codes: 0 all requested checks pass, 1 runtime error, 2 usage error,
//! 3 a check exceeded its stated tolerance.
//!
//! Sweep subcommands run their cells serially by default; pass `--parallel`
//! (or set `NCELAB_PARALLEL=1`) to fan cells out across threads. Cell seeds
//! are derived independently, so both modes produce identical numbers.

mod commands;
mod config;
mod output;

use clap::Parser;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "ncelab",
    version,
    about = "Contrastive-loss and robust-reweighting experiment runner",
    arg_required_else_help = true
)]
enum Cli {
    /// Identity and oracle checks for the robust-reweighting duals.
    DroCheck(commands::dro_check::Args),
    /// Tabulate the finite-sample deviation bound over N and tau grids.
    Bound(commands::bound::Args),
    /// Mutual-information estimation on correlated Gaussians.
    Mi(commands::mi::Args),
    /// Variational divergence estimation on discrete toy distributions.
    Divergence(commands::divergence::Args),
    /// Accuracy over a (false-negative ratio, temperature) grid.
    TauSweep(commands::tau_sweep::Args),
    /// Logged score statistics per temperature.
    VarianceSweep(commands::variance_sweep::Args),
    /// One synthetic contrastive training run.
    TrainToy(commands::train_toy::Args),
    /// Weight-versus-score curves for the reweighting kernels.
    Weights(commands::weights::Args),
}

fn main() -> ExitCode {
    // clap handles usage errors with exit code 2 via its own error kinds.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli {
        Cli::DroCheck(args) => commands::dro_check::run(&args),
        Cli::Bound(args) => commands::bound::run(&args),
        Cli::Mi(args) => commands::mi::run(&args),
        Cli::Divergence(args) => commands::divergence::run(&args),
        Cli::TauSweep(args) => commands::tau_sweep::run(&args),
        Cli::VarianceSweep(args) => commands::variance_sweep::run(&args),
        Cli::TrainToy(args) => commands::train_toy::run(&args),
        Cli::Weights(args) => commands::weights::run(&args),
    };
    match outcome {
        Ok(summary) if summary.tolerance_failures == 0 => ExitCode::SUCCESS,
        Ok(summary) => {
            eprintln!(
                "{} check(s) exceeded their stated tolerance",
                summary.tolerance_failures
            );
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
