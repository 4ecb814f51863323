use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rfde_cli::load_config;
use rfde_cli::run::{self, Overrides, RunError};

#[derive(Parser)]
#[command(
    name = "rfde",
    version,
    about = "Laguerre collocation for delay differential equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one or more truncations and write samples and coefficients.
    Solve(RunArgs),
    /// Tabulate the RK4 oracle against the collocation solutions.
    Compare(RunArgs),
    /// Error norms, timing and conditioning over a list of truncations.
    Converge(RunArgs),
    /// Check the basis matrix identities at random points.
    Validate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "N-list", value_delimiter = ',', conflicts_with = "n")]
    n_list: Option<Vec<usize>>,
    #[arg(long, default_value = "rfde-out")]
    out: PathBuf,
    #[arg(long = "oracle-step")]
    oracle_step: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

fn execute(command: Command) -> Result<String, RunError> {
    let (verb, args) = match command {
        Command::Validate { out } => return Ok(run::run_validate(out.as_deref())?.summary()),
        Command::Solve(a) => (run::run_solve as RunFn, a),
        Command::Compare(a) => (run::run_compare as RunFn, a),
        Command::Converge(a) => (run::run_converge as RunFn, a),
    };
    let loaded = load_config(&args.config)?;
    let overrides = Overrides {
        n: args.n,
        n_list: args.n_list,
        oracle_step: args.oracle_step,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    Ok(verb(&loaded, &overrides, &args.out, Some(&args.config))?.summary())
}

type RunFn = fn(
    &rfde_cli::LoadedConfig,
    &Overrides,
    &std::path::Path,
    Option<&std::path::Path>,
) -> Result<rfde_cli::RunReport, RunError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
