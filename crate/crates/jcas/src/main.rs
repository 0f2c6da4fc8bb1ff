use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jcas::commands::{self, resolve_out_dir};
use jcas::parallel::resolve_threads;
use jcas::plot::{plot_files, PlotSpec};
use jcas::{CliError, ExperimentConfig};

/// Autoencoder-based joint communication and sensing experiments.
#[derive(Parser)]
#[command(name = "jcas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: config `out_dir`, then $JCAS_OUT_DIR, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes history.csv and checkpoints.
    Train(Common),
    /// Evaluate a checkpoint for every u; writes metrics.csv.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train counting and one-hot models and compare their detection metrics.
    EncodingCompare(Common),
    /// ESPRIT RMSE on synthetic scans; writes esprit_bench.csv.
    EspritBench(Common),
    /// Render CSV columns as an SVG line chart.
    Plot {
        /// Input CSV files.
        #[arg(long = "csv", required = true)]
        inputs: Vec<PathBuf>,
        /// Column for the x axis.
        #[arg(long, default_value = "u")]
        x: String,
        /// Comma-separated columns for the y axis.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        /// Logarithmic y axis.
        #[arg(long)]
        log_y: bool,
        #[arg(long, default_value = "")]
        title: String,
        /// Output SVG file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => {
            let cfg = c.config()?;
            let out = resolve_out_dir(c.out.as_deref(), &cfg);
            let (_, _, outs) = commands::train(&cfg, &out, |r| {
                eprintln!(
                    "epoch {:>3} stage {} loss {:.4} bmi {} pd {} pf {}",
                    r.epoch,
                    r.stage,
                    r.loss_total,
                    fmt(r.bmi),
                    fmt(r.pd),
                    fmt(r.pf)
                )
            })?;
            println!("{}", outs.history.display());
            println!("{}", outs.checkpoint.display());
        }
        Command::Validate { common, checkpoint } => {
            let cfg = common.config()?;
            let out = resolve_out_dir(common.out.as_deref(), &cfg);
            let p = commands::validate(&cfg, &checkpoint, &out, resolve_threads(common.threads))?;
            println!("{}", p.display());
        }
        Command::EncodingCompare(c) => {
            let cfg = c.config()?;
            let out = resolve_out_dir(c.out.as_deref(), &cfg);
            println!("{}", commands::encoding_compare(&cfg, &out, resolve_threads(c.threads))?.display());
        }
        Command::EspritBench(c) => {
            let cfg = c.config()?;
            let out = resolve_out_dir(c.out.as_deref(), &cfg);
            println!("{}", commands::esprit_bench(&cfg, &out, resolve_threads(c.threads))?.display());
        }
        Command::Plot {
            inputs,
            x,
            y,
            log_y,
            title,
            out,
        } => {
            plot_files(&inputs, &PlotSpec { x, y, log_y, title }, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
