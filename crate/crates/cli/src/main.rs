//! `fcofdm` command-line tool.
//!
//! Exit status: 0 on success, 2 when the design misses its constraint,
//! 1 on configuration or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcofdm::scenario::{self, Overrides, RunStatus, Scenario};

#[derive(Parser)]
#[command(name = "fcofdm", version, about = "Fast-convolution filtered OFDM scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Design seed; measurement uses seed + 1000.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's, else out/<name>).
    #[arg(long, global = true, env = "FCOFDM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Optimizer iteration cap per stage.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Design (if configured), synthesize and measure.
    Run { scenario: PathBuf },
    /// Run every point of the declared sweep axis.
    Sweep { scenario: PathBuf },
    /// Write operation counts.
    Counts { scenario: PathBuf },
    /// Window file export and import.
    #[command(subcommand)]
    Windows(WindowsCommand),
}

#[derive(Subcommand)]
enum WindowsCommand {
    /// Design windows and write them to a file.
    Export {
        scenario: PathBuf,
        /// Destination (default: <out-dir>/windows.txt).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Measure a window file with the scenario's numerology.
    Import { scenario: PathBuf, windows: PathBuf },
}

fn load(path: &Path, common: &Common) -> fcofdm::Result<Scenario> {
    let mut sc = Scenario::load(path)?;
    sc.apply(&Overrides {
        seed: common.seed,
        max_iters: common.max_iters,
        out_dir: common.out_dir.clone(),
    });
    Ok(sc)
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

fn execute(cli: &Cli) -> fcofdm::Result<RunStatus> {
    if let Some(j) = cli.common.jobs {
        scenario::set_jobs(j)?;
    }
    match &cli.command {
        Command::Run { scenario: path } => {
            let sc = load(path, &cli.common)?;
            let out = scenario::run(&sc)?;
            print!("{}", out.summary);
            report_files(&out.write(&sc.out_dir())?);
            Ok(out.status)
        }
        Command::Sweep { scenario: path } => {
            let sc = load(path, &cli.common)?;
            let out = scenario::sweep(&sc)?;
            print!("{}", out.csv);
            report_files(&out.write(&sc.out_dir())?);
            Ok(out.status)
        }
        Command::Counts { scenario: path } => {
            let sc = load(path, &cli.common)?;
            let out = scenario::run_counts(&sc)?;
            for body in out.files.values() {
                print!("{body}");
            }
            report_files(&out.write(&sc.out_dir())?);
            Ok(out.status)
        }
        Command::Windows(WindowsCommand::Export { scenario: path, output }) => {
            let sc = load(path, &cli.common)?;
            let (status, body) = scenario::export_windows(&sc)?;
            let dest = output.clone().unwrap_or_else(|| sc.out_dir().join("windows.txt"));
            if let Some(dir) = dest.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&dest, body)?;
            report_files(&[dest]);
            Ok(status)
        }
        Command::Windows(WindowsCommand::Import { scenario: path, windows }) => {
            let sc = load(path, &cli.common)?;
            let out = scenario::import_windows(&sc, windows)?;
            print!("{}", out.summary);
            report_files(&out.write(&sc.out_dir())?);
            Ok(out.status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
