use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qae_ids_cli::dataset::{generate_synthetic, load_dataset, write_dataset};
use qae_ids_cli::pipeline::{
    evaluate_run, loss_summary, read_train_log, MetricsRecord, TimingRecord, KERNEL_LOSS_FILE, METRICS_FILE,
    QAE_LOSS_FILE, TIMING_FILE,
};
use qae_ids_cli::{run_experiment, CliError, ExperimentConfig, Result};

#[derive(Debug, Parser)]
#[command(name = "qae-ids", version, about = "Quantum autoencoder + fidelity-kernel SVM anomaly detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic two-cluster dataset to CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full pipeline and write its artifacts.
    Train(TrainArgs),
    /// Score a labelled CSV with a finished run.
    Evaluate {
        /// Output directory of a `train` run.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
    /// Summarize the metrics and training logs of a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML config; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Enable depolarizing noise.
    #[arg(long)]
    noise: bool,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    shots: Option<u64>,
    /// Exact probabilities (shots = 0).
    #[arg(long, conflicts_with = "shots")]
    analytic: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl TrainArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.noise {
            c.noise.enabled = true;
        }
        if let Some(p) = self.p1 {
            c.noise.p1 = p;
        }
        if let Some(p) = self.p2 {
            c.noise.p2 = p;
        }
        if let Some(s) = self.shots {
            c.shots = s;
        }
        if self.analytic {
            c.shots = 0;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.out {
            c.out_dir = o.clone();
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        Ok(c)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let io = |e: &dyn std::fmt::Display| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(&e))?;
    serde_json::from_str(&text).map_err(|e| io(&e))
}

fn print_metrics_row(name: &str, acc: f64, prec: f64, rec: f64, f1: f64) {
    println!("{name:<6} acc {acc:.4}  prec {prec:.4}  rec {rec:.4}  f1 {f1:.4}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            n,
            d,
            separation,
            seed,
        } => {
            let samples = generate_synthetic(n, d, separation, seed)?;
            write_dataset(&samples, &out)?;
            println!("wrote {} rows to {}", samples.len(), out.display());
        }
        Command::Train(args) => {
            let config = args.resolve()?;
            let report = run_experiment(&config)?;
            let (tr, te) = (&report.train_metrics, &report.test_metrics);
            println!("config {}", report.config_hash);
            print_metrics_row("train", tr.accuracy, tr.precision, tr.recall, tr.f1);
            print_metrics_row("test", te.accuracy, te.precision, te.recall, te.f1);
            println!("time {:.1}s, artifacts in {}", report.timing.time_s, config.out_dir.display());
        }
        Command::Evaluate {
            run,
            data,
            label_column,
        } => {
            let dataset = load_dataset(&data, &label_column)?;
            let m = evaluate_run(&run, &dataset.samples)?;
            print_metrics_row("eval", m.accuracy, m.precision, m.recall, m.f1);
        }
        Command::Report { run } => {
            let m: MetricsRecord = read_json(&run.join(METRICS_FILE))?;
            println!("config {}", m.config_hash);
            print_metrics_row("train", m.train_acc, m.train_prec, m.train_rec, m.train_f1);
            print_metrics_row("test", m.test_acc, m.test_prec, m.test_rec, m.test_f1);
            if let Ok(t) = read_json::<TimingRecord>(&run.join(TIMING_FILE)) {
                let phases: Vec<String> = t.phases.iter().map(|p| format!("{} {:.1}s", p.phase, p.seconds)).collect();
                println!("time {:.1}s ({})", t.time_s, phases.join(", "));
            }
            for (name, file) in [("qae", QAE_LOSS_FILE), ("kernel", KERNEL_LOSS_FILE)] {
                let rows = read_train_log(&run.join(file))?;
                if let (Some(last), Some((std, lo, hi))) = (rows.last(), loss_summary(&rows)) {
                    println!(
                        "{name:<6} {} iters, final loss {:.5}, mean std {std:.5}, mean CI [{lo:.5}, {hi:.5}]",
                        rows.len(),
                        last.loss
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
