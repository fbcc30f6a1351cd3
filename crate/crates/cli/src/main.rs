//! `chg`: verification, scanning and point evaluation for the Cartan–Hartogs
//! domain `Y_II(r, p; K)`.
//!
//! Exit status is 0 when every check passes, 1 when a check fails or a point
//! lies outside the domain, and 2 on usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chg_core::DomainParams;

mod eval;
mod input;
mod report;
mod scan;
mod verify;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] chg_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Write { .. } => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chg", version)]
#[command(about = "Kähler–Einstein and Bergman geometry checks on Cartan–Hartogs domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the identity and inequality checks on seeded random points
    Verify {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Override a tolerance, `name=value`; repeatable or comma-separated.
        #[arg(long = "tol-overrides", value_delimiter = ',')]
        tol_overrides: Vec<String>,
    },
    /// Tabulate holomorphic sectional curvature over random point/tangent pairs
    ScanCurvature {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tabulate the Bergman/Kähler–Einstein eigenvalue ratios over an (X, λ) grid
    ScanEquivalence {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Coefficient file; fitted automatically for p = 1, K = 1.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        /// Nodes per axis of the scan grid.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Evaluate a quantity at one point
    Eval {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Point as a file path or inline text, e.g. `Z = [[0,0]]; w = [[0.5,0]]`.
        #[arg(long)]
        point: String,
        #[arg(long, value_enum)]
        what: What,
        /// Tangent for `--what curvature`: `dz = [...]; dw = [...]`.
        #[arg(long)]
        tangent: Option<String>,
        /// Coefficient file for `--what kernel`.
        #[arg(long)]
        coeffs: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    /// Generating function g = −log det(metric)
    G,
    /// Kähler–Einstein metric matrix
    Metric,
    /// Bergman kernel on the diagonal
    Kernel,
    /// Holomorphic sectional curvature along --tangent
    Curvature,
}

#[derive(Debug, Args)]
struct DomainArgs {
    /// Order of the symmetric matrix block.
    #[arg(long)]
    p: usize,
    /// Dimension of the w block.
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Exponent K.
    #[arg(long = "K", conflicts_with = "special_k")]
    k: Option<f64>,
    /// Use K = p/2 + 1/(p+1) (the default when --K is absent).
    #[arg(long = "special-K")]
    special_k: bool,
}

impl DomainArgs {
    fn params(&self) -> Result<DomainParams, CliError> {
        let params = match self.k {
            Some(k) => DomainParams::new(self.r, self.p, k),
            None => DomainParams::with_special_k(self.r, self.p),
        };
        params.map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, env = "CHG_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of random samples.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Sample right up to the boundary instead of staying 5% inside.
    #[arg(long)]
    near_boundary: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the wall-clock timestamp out of reports.
    #[arg(long)]
    no_timestamp: bool,
}

impl OutputArgs {
    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, text).map_err(|source| CliError::Write { path: path.clone(), source })
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify { domain, run, output, tol_overrides } => {
            let params = domain.params()?;
            let mut tolerances = verify::Tolerances::default();
            tolerances.apply(&tol_overrides)?;
            let opts = verify::Options { seed: run.seed, count: run.count, near_boundary: run.near_boundary };
            let report = thread_pool(run.jobs)?.install(|| verify::run(&params, &opts, &tolerances, !output.no_timestamp));
            output.emit(&report.render())?;
            Ok(report.passed())
        }
        Command::ScanCurvature { domain, run, output } => {
            let params = domain.params()?;
            let opts = verify::Options { seed: run.seed, count: run.count, near_boundary: run.near_boundary };
            let (table, pass) = thread_pool(run.jobs)?.install(|| scan::curvature(&params, &opts))?;
            output.emit(&table.render())?;
            Ok(pass)
        }
        Command::ScanEquivalence { domain, output, coeffs, grid, jobs } => {
            let params = domain.params()?;
            let coeffs = scan::load_coeffs(&params, coeffs.as_deref())?;
            let (table, pass) = thread_pool(jobs)?.install(|| scan::equivalence(&params, &coeffs, grid))?;
            output.emit(&table.render())?;
            Ok(pass)
        }
        Command::Eval { domain, output, point, what, tangent, coeffs } => {
            let params = domain.params()?;
            let req = eval::Request { point: &point, what, tangent: tangent.as_deref(), coeffs: coeffs.as_deref() };
            let report = eval::run(&params, &req, !output.no_timestamp)?;
            output.emit(&report.render())?;
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("chg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
