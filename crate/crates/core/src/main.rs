use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ledrx::sim::{run_frames, run_point, run_sweep, Experiment, ExperimentConfig};
use ledrx::verification::acceptance::{self, Effort};

#[derive(Parser)]
#[command(
    name = "ledrx",
    version,
    about = "BER experiments for post-distorting LED receivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); the built-in default when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory for results.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, short = 'j', global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs every receiver over the SNR grid and writes results.json and results.csv.
    Sweep,
    /// Runs one receiver at one SNR and prints the tallies.
    Point {
        #[arg(long, short)]
        receiver: String,
        #[arg(long)]
        snr: f64,
        /// Fixed frame count instead of the config's stopping rule.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Runs the acceptance checks and writes verify.json.
    Verify {
        /// Runs only these criteria (1-9).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        /// Reduced frame counts, for smoke runs.
        #[arg(long)]
        quick: bool,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ExperimentConfig::default_config(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool, String> {
    let common = &cli.common;
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    match cli.command {
        Command::Sweep => {
            let cfg = load_config(common)?;
            let result = run_sweep(&cfg).map_err(|e| e.to_string())?;
            for p in &result.points {
                println!(
                    "{:<28} {:>5.1} dB  ber {:.3e}  fer {:.3}  frames {}{}",
                    p.receiver,
                    p.snr_db,
                    p.ber,
                    p.fer,
                    p.frames,
                    p.error
                        .as_deref()
                        .map(|e| format!("  error: {e}"))
                        .unwrap_or_default()
                );
            }
            write(
                &common.out,
                "results.json",
                &ledrx::sim::to_json(&result).map_err(|e| e.to_string())?,
            )?;
            write(&common.out, "results.csv", &ledrx::sim::to_csv(&result))?;
            Ok(result.points.iter().all(|p| p.error.is_none()))
        }
        Command::Point {
            receiver,
            snr,
            frames,
        } => {
            let cfg = load_config(common)?;
            let exp = Experiment::new(cfg).map_err(|e| e.to_string())?;
            let rx = exp.prepare(&receiver).map_err(|e| e.to_string())?;
            let p = match frames {
                Some(n) => run_frames(&rx, snr, 0, n),
                None => run_point(&rx, snr, &exp.config.stopping),
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&p).map_err(|e| e.to_string())?
            );
            Ok(p.failures == 0)
        }
        Command::Verify { only, quick } => {
            let effort = if quick { Effort::Quick } else { Effort::Full };
            let mut reports = Vec::new();
            for id in 1..=acceptance::CRITERIA {
                if !only.is_empty() && !only.contains(&id) {
                    continue;
                }
                let r = acceptance::run_criterion(id, effort);
                println!("{}", r.line());
                reports.push(r);
            }
            let json = serde_json::to_string_pretty(&reports).map_err(|e| e.to_string())?;
            write(&common.out, "verify.json", &json)?;
            Ok(reports.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
