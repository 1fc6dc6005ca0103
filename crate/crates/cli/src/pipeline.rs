//! End-to-end run: data → preprocessing → QAE → latents → kernel training →
//! QSVC → evaluation, with artifacts written to the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use qae_ids_core::encoding::{fit_standardizer, preprocess};
use qae_ids_core::kernel::{self, write_matrix_csv};
use qae_ids_core::qae::{self, extract_latents};
use qae_ids_core::qsvc::{self, compute_metrics, predict};
use qae_ids_core::stats::write_log;
use qae_ids_core::{
    seed, DepolarizingModel, EncodedSample, EncoderParams, FeatureMapConfig, KernelParams, KernelTrainOptions, Metrics,
    QaeConfig, RawSample, StandardizationStats, SvmModel, TrainLogRow,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::{generate_synthetic, load_dataset, stratified_split};
use crate::error::{CliError, PhaseContext, Result};

pub const QAE_LOSS_FILE: &str = "qae_loss.csv";
pub const KERNEL_LOSS_FILE: &str = "kernel_loss.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const TIMING_FILE: &str = "timing.json";
pub const KERNEL_MATRIX_FILE: &str = "kernel_train.csv";
pub const MODEL_FILE: &str = "model.json";
pub const PIPELINE_FILE: &str = "pipeline.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Contents of `metrics.json`, in column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub config_hash: String,
    pub train_acc: f64,
    pub test_acc: f64,
    pub train_prec: f64,
    pub test_prec: f64,
    pub train_rec: f64,
    pub test_rec: f64,
    pub train_f1: f64,
    pub test_f1: f64,
}

impl MetricsRecord {
    pub const KEYS: [&'static str; 9] = [
        "config_hash",
        "train_acc",
        "test_acc",
        "train_prec",
        "test_prec",
        "train_rec",
        "test_rec",
        "train_f1",
        "test_f1",
    ];

    pub fn new(config_hash: String, train: &Metrics, test: &Metrics) -> Self {
        Self {
            config_hash,
            train_acc: train.accuracy,
            test_acc: test.accuracy,
            train_prec: train.precision,
            test_prec: test.precision,
            train_rec: train.recall,
            test_rec: test.recall,
            train_f1: train.f1,
            test_f1: test.f1,
        }
    }
}

/// Contents of `timing.json`: wall-clock seconds per phase and in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub config_hash: String,
    pub phases: Vec<PhaseTime>,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTime {
    pub phase: String,
    pub seconds: f64,
}

/// Everything `evaluate` needs to score new rows without retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub config_hash: String,
    pub seed: u64,
    pub shots: u64,
    pub noise: Option<DepolarizingModel>,
    pub standardization: StandardizationStats,
    pub qae: QaeConfig,
    pub theta: EncoderParams,
    pub feature_map: FeatureMapConfig,
    pub phi: KernelParams,
    pub train_latents: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifacts {
    pub qae_loss: PathBuf,
    pub kernel_loss: PathBuf,
    pub metrics: PathBuf,
    pub timing: PathBuf,
    pub kernel_matrix: PathBuf,
    pub model: PathBuf,
    pub pipeline: PathBuf,
    pub config: PathBuf,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            qae_loss: dir.join(QAE_LOSS_FILE),
            kernel_loss: dir.join(KERNEL_LOSS_FILE),
            metrics: dir.join(METRICS_FILE),
            timing: dir.join(TIMING_FILE),
            kernel_matrix: dir.join(KERNEL_MATRIX_FILE),
            model: dir.join(MODEL_FILE),
            pipeline: dir.join(PIPELINE_FILE),
            config: dir.join(CONFIG_FILE),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub qae_log: Vec<TrainLogRow>,
    pub kernel_log: Vec<TrainLogRow>,
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
    pub timing: TimingRecord,
    pub model: SvmModel,
    pub artifacts: Artifacts,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_train_log(path: &Path, rows: &[TrainLogRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_log(rows, std::io::BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_matrix_csv(m, std::io::BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

/// Phase timer that keeps the order phases ran in.
struct Clock {
    start: Instant,
    phases: Vec<PhaseTime>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            phases: Vec::new(),
        }
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        log::info!("phase {phase}");
        let t = Instant::now();
        let out = f();
        self.phases.push(PhaseTime {
            phase: phase.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    fn record(&self, config_hash: &str) -> TimingRecord {
        TimingRecord {
            config_hash: config_hash.to_string(),
            phases: self.phases.clone(),
            time_s: self.start.elapsed().as_secs_f64(),
        }
    }
}

fn load_samples(config: &ExperimentConfig) -> Result<Vec<RawSample>> {
    match &config.data.path {
        Some(path) => Ok(load_dataset(path, &config.data.label_column)?.samples),
        None => {
            let s = &config.data.synthetic;
            generate_synthetic(s.n, s.d, s.separation, s.seed)
        }
    }
}

fn encode_all(samples: &[RawSample], stats: &StandardizationStats) -> Result<Vec<EncodedSample>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| preprocess(s, stats).map_err(|e| CliError::Data(format!("sample {i}: {e}"))))
        .collect()
}

fn phase_seed(config: &ExperimentConfig, phase: &str) -> u64 {
    seed::derive(config.seed, &[seed::tag(phase)])
}

/// Runs the whole pipeline and writes every artifact. On a phase failure
/// the logs of the phases that finished are already on disk.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?
            .install(|| run_validated(config)),
        None => run_validated(config),
    }
}

fn run_validated(config: &ExperimentConfig) -> Result<RunReport> {
    let noise = config.noise_model()?;
    let noise = noise.as_ref();
    let hash = config.hash();
    let out = config.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let artifacts = Artifacts::in_dir(&out);
    write_text(&artifacts.config, &config.to_toml_string()?)?;
    let mut clock = Clock::new();

    let (train_raw, test_raw) = clock.time("data", || {
        let samples = load_samples(config)?;
        let labels: Vec<i8> = samples.iter().map(RawSample::label).collect();
        let (train, test) =
            stratified_split(&labels, config.data.train_size, config.data.test_size, config.data.split_seed)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
        Ok((pick(&train), pick(&test)))
    })?;
    let y_train: Vec<i8> = train_raw.iter().map(RawSample::label).collect();
    let y_test: Vec<i8> = test_raw.iter().map(RawSample::label).collect();

    let (stats, train_enc, test_enc) = clock.time("preprocess", || {
        let stats = fit_standardizer(&train_raw).phase("preprocess")?;
        let train = encode_all(&train_raw, &stats)?;
        let test = encode_all(&test_raw, &stats)?;
        Ok((stats, train, test))
    })?;

    let qae_config = config.qae_config(train_enc[0].num_qubits());
    qae_config
        .validate()
        .map_err(|e| CliError::Config(format!("autoencoder for {} input qubits: {e}", qae_config.num_qubits)))?;
    let qae_run = clock.time("qae", || {
        let run = qae::train_qae(&qae_config, &train_enc, &config.cobyla(), noise, phase_seed(config, "qae"))
            .phase("qae")?;
        write_train_log(&artifacts.qae_loss, &run.log)?;
        Ok(run)
    })?;
    let theta = qae_run.params.clone();

    let (z_train, z_test) = clock.time("latent", || {
        let z_train = extract_latents(&qae_config, &theta, &train_enc, config.shots, noise, phase_seed(config, "latent-train"))
            .phase("latent")?;
        let z_test = extract_latents(&qae_config, &theta, &test_enc, config.shots, noise, phase_seed(config, "latent-test"))
            .phase("latent")?;
        Ok((z_train, z_test))
    })?;

    let fm = config.feature_map();
    let (phi, kernel_log, k_train) = clock.time("kernel", || {
        let phi0 = KernelParams::random(&fm, phase_seed(config, "kernel-init"));
        let options = KernelTrainOptions {
            c: config.svm.c,
            log_repeats: config.kernel.log_repeats,
        };
        let run = kernel::train_kernel(
            &z_train,
            &y_train,
            &phi0,
            &config.spsa(phase_seed(config, "kernel-spsa")),
            &fm,
            &options,
            noise,
        )
        .phase("kernel")?;
        write_train_log(&artifacts.kernel_loss, &run.log)?;
        let k = kernel::kernel_matrix(&z_train, &run.params, &fm, noise, phase_seed(config, "kernel-final"))
            .phase("kernel")?
            .into_entries();
        write_matrix(&artifacts.kernel_matrix, &k)?;
        Ok((run.params, run.log, k))
    })?;

    let model = clock.time("qsvc", || {
        let model = qsvc::solve_dual(&k_train, &y_train, config.svm.c, config.svm.tol).phase("qsvc")?;
        write_text(&artifacts.model, &model.to_json().phase("qsvc")?)?;
        Ok(model)
    })?;

    let (train_metrics, test_metrics) = clock.time("evaluate", || {
        let train_pred = predict(&model, &k_train).phase("evaluate")?;
        let k_cross = kernel::kernel_cross(&z_test, &z_train, &phi, &fm, noise, phase_seed(config, "kernel-test"))
            .phase("evaluate")?;
        let test_pred = predict(&model, &k_cross).phase("evaluate")?;
        Ok((
            compute_metrics(&train_pred, &y_train).phase("evaluate")?,
            compute_metrics(&test_pred, &y_test).phase("evaluate")?,
        ))
    })?;

    write_json(&artifacts.metrics, &MetricsRecord::new(hash.clone(), &train_metrics, &test_metrics))?;
    write_json(
        &artifacts.pipeline,
        &PipelineState {
            config_hash: hash.clone(),
            seed: config.seed,
            shots: config.shots,
            noise: noise.copied(),
            standardization: stats,
            qae: qae_config,
            theta,
            feature_map: fm,
            phi,
            train_latents: z_train,
        },
    )?;
    let timing = clock.record(&hash);
    write_json(&artifacts.timing, &timing)?;

    Ok(RunReport {
        config: config.clone(),
        config_hash: hash,
        qae_log: qae_run.log,
        kernel_log,
        train_metrics: Metrics {
            elapsed_seconds: timing.time_s,
            ..train_metrics
        },
        test_metrics: Metrics {
            elapsed_seconds: timing.time_s,
            ..test_metrics
        },
        timing,
        model,
        artifacts,
    })
}

/// Scores labelled rows with a finished run's artifacts.
pub fn evaluate_run(run_dir: &Path, samples: &[RawSample]) -> Result<Metrics> {
    let read = |name: &str| -> Result<String> {
        let p = run_dir.join(name);
        fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))
    };
    let state: PipelineState =
        serde_json::from_str(&read(PIPELINE_FILE)?).map_err(|e| CliError::io(&run_dir.join(PIPELINE_FILE), e))?;
    let model = SvmModel::from_json(&read(MODEL_FILE)?).phase("evaluate")?;
    if samples.is_empty() {
        return Err(CliError::Data("no rows to evaluate".into()));
    }
    let encoded = encode_all(samples, &state.standardization)?;
    let noise = state.noise.as_ref();
    let eval_seed = |phase: &str| seed::derive(state.seed, &[seed::tag(phase)]);
    let z = extract_latents(&state.qae, &state.theta, &encoded, state.shots, noise, eval_seed("latent-eval"))
        .phase("evaluate")?;
    let k = kernel::kernel_cross(&z, &state.train_latents, &state.phi, &state.feature_map, noise, eval_seed("kernel-eval"))
        .phase("evaluate")?;
    let predicted = predict(&model, &k).phase("evaluate")?;
    let truth: Vec<i8> = samples.iter().map(RawSample::label).collect();
    compute_metrics(&predicted, &truth).phase("evaluate")
}

/// Column means of `loss_std`, `lower_bound` and `upper_bound`.
pub fn loss_summary(rows: &[TrainLogRow]) -> Option<(f64, f64, f64)> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&TrainLogRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some((mean(|r| r.loss_std), mean(|r| r.lower_bound), mean(|r| r.upper_bound)))
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainLogRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::io(path, e))).collect()
}
