use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riccati_mor::harness::{parse_list, run_experiment, scaling_sweep, ExperimentConfig, Method, MethodStatus};
use riccati_mor::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(version, about = "Reduced-order LQR experiments for the algebraic Riccati equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Run the methods of a config and write CSVs plus manifest.json.
    Run { config: PathBuf },
    /// Time GARK/PGARK over several grid spacings and write scaling.csv.
    Sweep {
        config: PathBuf,
        /// Comma-separated grid spacings, e.g. 0.1,0.05,0.025.
        #[arg(long)]
        dx: String,
    },
}

#[derive(Args)]
struct Overrides {
    /// Comma-separated subset of pod,bt,gark,pgark.
    #[arg(long, global = true)]
    methods: Option<String>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fill the elapsed_s column of the convergence CSVs.
    #[arg(long, global = true)]
    timings: bool,
}

fn load(path: &PathBuf, o: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(m) = &o.methods {
        cfg.methods = parse_list::<Method>(m)?;
    }
    if let Some(t) = o.tol {
        cfg.tol = t;
    }
    if let Some(out) = &o.out {
        cfg.out = out.clone();
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    cfg.timings |= o.timings;
    cfg.validate()?;
    Ok(cfg)
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::EmptyRegion(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_SOLVER),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => {
            let cfg = match load(config, &cli.overrides) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let report = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            println!("n = {}, results in {}", report.n, report.out_dir.display());
            for o in &report.methods {
                let status = match &o.status {
                    MethodStatus::Converged { r } => format!("converged at r = {r}"),
                    MethodStatus::NotConverged { best_residual } => {
                        format!("not converged (best R_P {:e})", best_residual.unwrap_or(f64::NAN))
                    }
                    MethodStatus::Failed { error } => format!("failed: {error}"),
                };
                println!("{:>6}: {status}", o.method);
                for ev in &o.events {
                    println!("        {ev}");
                }
            }
            if report.all_converged() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SOLVER)
            }
        }
        Command::Sweep { config, dx } => {
            let cfg = match load(config, &cli.overrides) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let dx_list = match parse_list::<f64>(dx) {
                Ok(l) => l,
                Err(e) => return fail(e),
            };
            let rows = match scaling_sweep(&cfg, &dx_list) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            for row in &rows {
                println!(
                    "dx = {:<8} n = {:<7} {:>6}: r = {:>3}  {:.3}s  {}",
                    row.dx,
                    row.n,
                    row.method,
                    row.r.map_or("-".into(), |r| r.to_string()),
                    row.elapsed_s,
                    row.status
                );
            }
            if rows.iter().all(|r| r.converged()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SOLVER)
            }
        }
    }
}
