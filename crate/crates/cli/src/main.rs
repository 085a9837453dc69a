//! `hydrodual`: batch front end for the hydropower duality toolkit.
//!
//! Every subcommand except `report` prints one JSON document on stdout.
//! Diagnostics go to stderr. Exit codes: 0 success, 1 validation failure,
//! 2 non-optimal solver status, 3 usage error.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "hydrodual", version, about = "Primal and dual LPs for stochastic hydropower planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a scenario tree and report its structure and invariants.
    Validate {
        tree: PathBuf,
        /// Also check a dam system against the tree.
        #[arg(long)]
        system: Option<PathBuf>,
    },
    /// Solve the primal LP, the dual LP, or both.
    Solve {
        tree: PathBuf,
        #[command(flatten)]
        common: SolveArgs,
        #[arg(long, value_enum, default_value_t = Side::Both)]
        side: Side,
    },
    /// Solve both LPs and compare their optima.
    Gap {
        tree: PathBuf,
        #[command(flatten)]
        common: SolveArgs,
    },
    /// Classify the price process and check the no-flood condition.
    Classify {
        tree: PathBuf,
        #[arg(long)]
        system: Option<PathBuf>,
    },
    /// Generate a synthetic scenario tree.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Tree destination; the tree is printed on stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a machine report as a table.
    Report { run: PathBuf },
    /// Verification harness.
    Analysis {
        #[command(subcommand)]
        command: AnalysisCommand,
    },
}

#[derive(Subcommand, Debug)]
enum AnalysisCommand {
    /// Randomized property campaign.
    Campaign {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 5)]
        pairs: usize,
        #[arg(long, value_enum, default_value_t = Mutation::None)]
        mutation: Mutation,
        /// Skip the LP-based checks.
        #[arg(long)]
        skip_lp: bool,
        /// Directory receiving one `failure_<n>.json` per failure.
        #[arg(long)]
        failures_dir: Option<PathBuf>,
    },
    /// Rerun a recorded campaign failure.
    Replay { failure: PathBuf },
    /// Variable and constraint counts against the closed formulas.
    Counts {
        tree: PathBuf,
        #[arg(long)]
        system: PathBuf,
    },
    /// Optimal values under individual caps and under the total cap Σb.
    Ordering {
        tree: PathBuf,
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    system: PathBuf,
    /// Overrides the solver's feasibility and optimality tolerances.
    #[arg(long)]
    tol: Option<f64>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving `primal.mps` and `dual.mps`.
    #[arg(long)]
    dump_mps: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Side {
    Primal,
    Dual,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mutation {
    None,
    FlipLambda,
    FlipW,
}

fn run(cli: Cli) -> Result<commands::Output, CliError> {
    match cli.command {
        Command::Validate { tree, system } => commands::validate(&tree, system.as_deref()),
        Command::Solve { tree, common, side } => commands::solve(&tree, &common.into(), side.into()),
        Command::Gap { tree, common } => commands::gap(&tree, &common.into()),
        Command::Classify { tree, system } => commands::classify(&tree, system.as_deref()),
        Command::Generate { spec, seed, out } => commands::generate(&spec, seed, out.as_deref()),
        Command::Report { run } => commands::report(&run),
        Command::Analysis { command } => match command {
            AnalysisCommand::Campaign {
                seed,
                cases,
                pairs,
                mutation,
                skip_lp,
                failures_dir,
            } => commands::campaign(seed, cases, pairs, mutation.into(), skip_lp, failures_dir.as_deref()),
            AnalysisCommand::Replay { failure } => commands::replay(&failure),
            AnalysisCommand::Counts { tree, system } => commands::counts(&tree, &system),
            AnalysisCommand::Ordering { tree, system, tol } => commands::ordering(&tree, &system, tol),
        },
    }
}

impl From<SolveArgs> for commands::SolveConfig {
    fn from(a: SolveArgs) -> Self {
        Self {
            system: a.system,
            tol: a.tol,
            out: a.out,
            dump_mps: a.dump_mps,
        }
    }
}

impl From<Side> for commands::Side {
    fn from(s: Side) -> Self {
        match s {
            Side::Primal => commands::Side::Primal,
            Side::Dual => commands::Side::Dual,
            Side::Both => commands::Side::Both,
        }
    }
}

impl From<Mutation> for hydro_duality::dual::DualMutation {
    fn from(m: Mutation) -> Self {
        match m {
            Mutation::None => Self::None,
            Mutation::FlipLambda => Self::FlipLambdaSign,
            Mutation::FlipW => Self::FlipWSign,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            let err = CliError::Usage(e.kind().to_string());
            println!("{}", err.to_json());
            return ExitCode::from(err.code());
        }
    };
    match run(cli) {
        Ok(out) => {
            for line in &out.diagnostics {
                eprintln!("{line}");
            }
            println!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(err) => {
            eprintln!("error: {err}");
            println!("{}", err.to_json());
            ExitCode::from(err.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use serde_json::json;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_documents_carry_the_exit_code() {
        let doc: serde_json::Value = serde_json::from_str(&CliError::Usage("x".into()).to_json()).unwrap();
        assert_eq!(doc, json!({"kind": "error", "error": {"code": 3, "class": "usage", "message": "x"}}));
    }
}
