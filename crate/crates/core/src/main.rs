use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsplast::cli::{self, Outcome, Overrides, EXIT_CONFIG};

/// Incremental solver and verification harness for quasistatic perfect
/// plasticity.
///
/// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
/// 4 verification failure. The thread count can be set with QSPLAST_THREADS.
#[derive(Parser)]
#[command(name = "qsplast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one evolution and write energies, fields and verification tables.
    Run {
        manifest: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run the manifest's grids and write the refinement study.
    Converge {
        manifest: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Re-audit a finished run directory.
    Verify { run_dir: PathBuf },
    /// Drive a single material point through a strain history.
    Point {
        material: PathBuf,
        history: PathBuf,
        /// Directory for point.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Flags {
    /// Uniform grid with this many steps (overrides the manifest).
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory (overrides the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Equilibrium residual tolerance of the solver.
    #[arg(long)]
    tol_res: Option<f64>,
    /// Proceed past failed safe-load and initial-stability checks.
    #[arg(long)]
    force: bool,
    /// Also write long-format plotdata.csv.
    #[arg(long)]
    emit_plotdata: bool,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Self {
            steps: f.steps,
            out: f.out,
            tol_res: f.tol_res,
            force: f.force,
            emit_plotdata: f.emit_plotdata,
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("QSPLAST_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("QSPLAST_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn finish(o: Outcome) -> ExitCode {
    if !o.summary.is_empty() {
        if o.code == 0 {
            println!("{}", o.summary);
        } else {
            eprintln!("{}", o.summary);
        }
    }
    ExitCode::from(o.code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    match cli.command {
        Command::Run { manifest, flags } => finish(cli::cmd_run(&manifest, &flags.into())),
        Command::Converge { manifest, flags } => finish(cli::cmd_converge(&manifest, &flags.into())),
        Command::Verify { run_dir } => finish(cli::cmd_verify(&run_dir)),
        Command::Point { material, history, out } => {
            let (o, text) = cli::cmd_point(&material, &history, out.as_deref());
            if let Some(t) = text {
                print!("{t}");
            }
            finish(o)
        }
    }
}
