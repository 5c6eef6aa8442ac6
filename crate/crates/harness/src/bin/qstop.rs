use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qstop_harness::{run_converge, run_truncation_sweep, run_verify, write_files, Emit, Execution, HarnessError, Scenario};

#[derive(Parser)]
#[command(name = "qstop", version, about = "Verify stopped-cocycle identities on a truncated Fock space")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the scenario-wide tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Directory for the CSV and structured reports (default: beside the scenario).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// What to print on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Run instances one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's checks over all its instances.
    Verify { scenario: PathBuf },
    /// Coarsen the scenario's S over refinement levels and track convergence.
    Converge {
        scenario: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Exponential-vector kernel error as the occupation cap grows.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',')]
        caps: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario, HarnessError> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        scenario = scenario.with_seed(seed);
    }
    if let Some(tol) = cli.tol {
        scenario = scenario.with_tol(tol)?;
    }
    Ok(scenario)
}

fn run(cli: &Cli) -> Result<bool, HarnessError> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let (report, scenario): (Box<dyn Emit>, Scenario) = match &cli.command {
        Command::Verify { scenario } => {
            let s = load(cli, scenario)?;
            (Box::new(run_verify(&s, exec)?), s)
        }
        Command::Converge { scenario, levels } => {
            let s = load(cli, scenario)?;
            let levels = levels.unwrap_or(s.file.converge.levels);
            (Box::new(run_converge(&s, levels, exec)?), s)
        }
        Command::Sweep { scenario, caps } => {
            let s = load(cli, scenario)?;
            let caps = caps.clone().unwrap_or_else(|| s.file.sweep.caps.clone());
            (Box::new(run_truncation_sweep(&s, &caps, exec)?), s)
        }
    };
    let dir = cli.out.clone().unwrap_or_else(|| scenario.default_out_dir());
    write_files(report.as_ref(), &dir)?;
    match cli.format {
        Format::Csv => print!("{}", report.csv()),
        Format::Text => print!("{}", report.text()),
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
