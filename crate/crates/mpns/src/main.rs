//! Command-line front end: dataset generation, single training runs, the
//! full comparison grid, and report rendering.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpns::harness::{
    load_table_csv, render_report, run_experiment, ExperimentConfig, ReportFormat, RunOptions,
};
use mpns::model::ArchConfig;
use mpns::objectives::Mode;
use mpns::synthgen::{generate_dataset, read_ndjson, write_ndjson, KappaForm, SynthConfig};
use mpns::trainer::{run_mode, TrainConfig};
use mpns::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mpns",
    version,
    about = "Two-modality representation learning with necessity/sufficiency-style objectives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_kappa_form(s: &str) -> std::result::Result<KappaForm, String> {
    match s {
        "sum" => Ok(KappaForm::Sum),
        "literal_product" => Ok(KappaForm::LiteralProduct),
        other => Err(format!(
            "unknown kappa form '{other}' (expected sum or literal_product)"
        )),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-modality dataset as NDJSON.
    Gen {
        /// Spurious-correlation degree in [0, 1).
        #[arg(long)]
        s: f64,
        /// Number of samples.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output NDJSON path.
        #[arg(long)]
        out: PathBuf,
        /// Feature nonlinearity variant.
        #[arg(long, default_value = "sum", value_parser = parse_kappa_form)]
        kappa_form: KappaForm,
    },
    /// Train one objective on an NDJSON dataset and save the model.
    Train {
        /// Objective: net, mpns_minus_c, or mpns.
        #[arg(long)]
        mode: Mode,
        /// Training dataset (NDJSON).
        #[arg(long)]
        data: PathBuf,
        /// Optional held-out dataset; accuracy falls back to the training
        /// data when absent.
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Where to write the trained model checkpoint.
        #[arg(long)]
        out_model: PathBuf,
        /// Where to write the training history (JSON).
        #[arg(long)]
        out_history: Option<PathBuf>,
    },
    /// Run the (mode x s x seed) comparison grid into a results directory.
    Experiment {
        /// Grid config (JSON); an empty object selects the defaults.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for cell files, tables, and the summary.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for cells (0 = auto).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Reuse valid per-cell files already present in the directory.
        #[arg(long)]
        resume: bool,
    },
    /// Render a results table (CSV) to text or markdown.
    Report {
        /// Table produced by the experiment subcommand.
        #[arg(long)]
        table: PathBuf,
        /// Output path; a .md extension selects markdown.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { s, n, seed, out, kappa_form } => {
            let mut cfg = SynthConfig::new(s, n, seed);
            cfg.kappa_form = kappa_form;
            let samples = generate_dataset(&cfg)?;
            write_ndjson(&out, &samples)?;
            println!("wrote {} samples to {}", samples.len(), out.display());
        }
        Command::Train {
            mode,
            data,
            eval,
            seed,
            epochs,
            batch_size,
            learning_rate,
            out_model,
            out_history,
        } => {
            let train_data = read_ndjson(&data)?;
            let eval_data = match &eval {
                Some(path) => Some(read_ndjson(path)?),
                None => None,
            };
            let mut cfg = TrainConfig::new(mode, seed);
            if let Some(v) = epochs {
                cfg.epochs = v;
            }
            if let Some(v) = batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = learning_rate {
                cfg.learning_rate = v;
            }
            let arch = ArchConfig::default();
            let outcome = run_mode(
                mode,
                &arch,
                &train_data,
                eval_data.as_deref().unwrap_or(&train_data),
                &cfg,
            )?;
            outcome.model.save(&out_model)?;
            if let Some(path) = &out_history {
                outcome.history.save(path)?;
            }
            println!(
                "trained {} for {} epochs on {} samples; {} accuracy {:.4}; model at {}",
                mode.name(),
                cfg.epochs,
                train_data.len(),
                if eval.is_some() { "held-out" } else { "training-set" },
                outcome.eval_accuracy,
                out_model.display(),
            );
        }
        Command::Experiment { config, out, jobs, resume } => {
            let bytes = fs::read(&config).map_err(|e| Error::io(&config, e))?;
            let cfg: ExperimentConfig =
                serde_json::from_slice(&bytes).map_err(|e| Error::json(&config, e))?;
            let opts = RunOptions { jobs, resume, log_progress: true };
            let outcome = run_experiment(&cfg, &out, &opts)?;
            print!("{}", render_report(&outcome.table, ReportFormat::Text));
            for (cell, error) in &outcome.failures {
                eprintln!("cell {cell} failed: {error}");
            }
            outcome.ensure_complete()?;
            println!("results in {}", out.display());
        }
        Command::Report { table, out } => {
            let loaded = load_table_csv(&table)?;
            let format = match out.extension().and_then(|e| e.to_str()) {
                Some("md" | "markdown") => ReportFormat::Markdown,
                _ => ReportFormat::Text,
            };
            fs::write(&out, render_report(&loaded, format)).map_err(|e| Error::io(&out, e))?;
            println!("wrote report to {}", out.display());
        }
    }
    Ok(())
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
