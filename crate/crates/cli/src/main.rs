//! `eapf` — plan, optimize, simulate and compare potential-field motions.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eapf_cli::{cmd_compare, cmd_export_trajectory, cmd_run};
use eapf_core::PlanMode;

#[derive(Parser)]
#[command(
    name = "eapf",
    version,
    about = "Potential-field path planning, minimum-jerk trajectory optimization and \
             computed-torque tracking for serial manipulators",
    after_help = "Exit codes: 0 success, 1 planner failure, 2 collision, 3 config error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Force law selection on the command line.
#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    /// Classical artificial potential field.
    Apf,
    /// Energy-based variant with kinetic potentials.
    Eapf,
}

impl From<ModeArg> for PlanMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Apf => PlanMode::Apf,
            ModeArg::Eapf => PlanMode::Eapf,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one mode end to end; writes waypoints.csv, trajectory.csv,
    /// simlog.csv and metrics.txt into --out.
    Run {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Which force law drives the planner.
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Reserved for future randomized scenes; the current pipeline is
        /// deterministic and ignores it.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run both modes with their respective gains; writes per-mode artifacts
    /// into --out/apf and --out/eapf plus a side-by-side comparison.csv.
    Compare {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Reserved for future randomized scenes; the current pipeline is
        /// deterministic and ignores it.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plan and optimize without simulating; writes trajectory.csv sampled
    /// at --rate into --out.
    ExportTrajectory {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Which force law drives the planner.
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Sample rate in Hz.
        #[arg(long, default_value_t = 1000.0)]
        rate: f64,
        /// Reserved for future randomized scenes; the current pipeline is
        /// deterministic and ignores it.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    // Map usage errors to the config-error exit code instead of clap's
    // default 2, which is reserved for collisions here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.exit_code() == 0 {
                0 // --help / --version
            } else {
                eapf_cli::EXIT_CONFIG
            };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match cli.command {
        Command::Run {
            scenario,
            mode,
            out,
            seed: _,
        } => cmd_run(&scenario, mode.into(), &out),
        Command::Compare {
            scenario,
            out,
            seed: _,
        } => cmd_compare(&scenario, &out),
        Command::ExportTrajectory {
            scenario,
            mode,
            out,
            rate,
            seed: _,
        } => cmd_export_trajectory(&scenario, mode.into(), &out, rate),
    };
    ExitCode::from(code as u8)
}
