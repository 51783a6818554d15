use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use slicesim_core::calibrate::calibrate_file;
use slicesim_core::config::OUTPUT_DIR_ENV;
use slicesim_core::experiment::{cmd_run, cmd_sweep, summary_table};
use slicesim_core::metrics::fmt_opt_pct;
use slicesim_core::{ScenarioConfig, SweepAxis};

/// Simulate SLO-aware LLM inference scheduling (SLICE vs Orca vs FastServe).
#[derive(Parser)]
#[command(name = "slicesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write one report per scheduler and seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this scheduler.
        #[arg(long)]
        scheduler: Option<String>,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Sweep arrival rate or real-time fraction.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Normalize raw `batch,latency_ms` measurements into a calibration file.
    Calibrate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Rate,
    Ratio,
}

fn load(path: &Path, output_dir: Option<PathBuf>) -> slicesim_core::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> slicesim_core::Result<()> {
    match cli.command {
        Command::Run { config, scheduler, output_dir } => {
            let cfg = load(&config, output_dir)?;
            let reports = cmd_run(&cfg, scheduler.as_deref())?;
            print!("{}", summary_table(&reports));
            println!("reports written to {}", cfg.output_path().display());
        }
        Command::Sweep { config, axis, output_dir } => {
            let cfg = load(&config, output_dir)?;
            let axis = match axis {
                Axis::Rate => SweepAxis::ArrivalRate,
                Axis::Ratio => SweepAxis::RtFraction,
            };
            let result = cmd_sweep(&cfg, axis)?;
            println!("{:>12} {:<10} {:>9} {:>9} {:>9}", axis.as_str(), "scheduler", "overall", "rt", "nrt");
            for c in result.means() {
                println!(
                    "{:>12} {:<10} {:>9} {:>9} {:>9}",
                    c.value,
                    c.scheduler,
                    fmt_opt_pct(c.overall),
                    fmt_opt_pct(c.real_time),
                    fmt_opt_pct(c.non_real_time)
                );
            }
            if result.reused > 0 {
                println!("reused {} finished cells", result.reused);
            }
            println!("sweep written to {}", cfg.output_path().display());
        }
        Command::Calibrate { input, out } => {
            for w in calibrate_file(&input, &out)? {
                eprintln!("warning: {w}");
            }
            println!("calibration written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
