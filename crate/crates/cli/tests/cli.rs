use std::path::Path;
use std::process::Command;

use qae_ids_cli::dataset::{generate_synthetic, load_dataset, stratified_split, write_dataset};
use qae_ids_cli::pipeline::{evaluate_run, MetricsRecord, PipelineState, PIPELINE_FILE};
use qae_ids_cli::{run_experiment, CliError, ExperimentConfig};
use qae_ids_core::encoding::fit_standardizer;

fn small_config(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.shots = 0;
    c.out_dir = out.to_path_buf();
    c.data.synthetic.n = 60;
    c.data.train_size = 40;
    c.data.test_size = 20;
    c.qae.max_iters = 30;
    c.kernel.max_iters = 5;
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qae-ids"))
}

#[test]
fn artifacts_and_report_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(&dir.path().join("run"));
    let report = run_experiment(&config).unwrap();
    let a = &report.artifacts;
    for p in [&a.qae_loss, &a.kernel_loss, &a.metrics, &a.timing, &a.kernel_matrix, &a.model, &a.pipeline] {
        assert!(p.is_file(), "{} missing", p.display());
    }
    let metrics: MetricsRecord = serde_json::from_str(&std::fs::read_to_string(&a.metrics).unwrap()).unwrap();
    assert_eq!(metrics.config_hash, report.config_hash);
    assert_eq!(metrics.test_acc, report.test_metrics.accuracy);
    assert_eq!(report.kernel_log.len(), config.kernel.max_iters);
    for (i, row) in report.qae_log.iter().chain(&report.kernel_log).enumerate() {
        assert!(row.lower_bound <= row.loss && row.loss <= row.upper_bound, "row {i}");
    }
    let qae_iters: Vec<usize> = report.qae_log.iter().map(|r| r.iteration).collect();
    assert_eq!(qae_iters, (0..report.qae_log.len()).collect::<Vec<_>>());
    let phases: Vec<&str> = report.timing.phases.iter().map(|p| p.phase.as_str()).collect();
    assert_eq!(phases, ["data", "preprocess", "qae", "latent", "kernel", "qsvc", "evaluate"]);
    let k = std::fs::read_to_string(&a.kernel_matrix).unwrap();
    assert_eq!(k.lines().count(), config.data.train_size + 1);
}

#[test]
fn noise_toggle_changes_only_noise_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut clean = small_config(&dir.path().join("clean"));
    clean.shots = 64;
    clean.qae.max_iters = 4;
    clean.kernel.max_iters = 1;
    clean.data.synthetic.n = 20;
    clean.data.train_size = 16;
    clean.data.test_size = 4;
    clean.qae.batch_size = 4;
    let mut noisy = clean.clone();
    noisy.noise.enabled = true;
    let a = run_experiment(&clean).unwrap();
    let b = run_experiment(&noisy).unwrap();
    let mut echo = b.config.clone();
    echo.noise = a.config.noise;
    echo.out_dir = a.config.out_dir.clone();
    assert_eq!(echo, a.config);
    assert_ne!(a.config_hash, b.config_hash);
}

#[test]
fn evaluate_reuses_trained_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(&dir.path().join("run"));
    let report = run_experiment(&config).unwrap();
    let samples = generate_synthetic(60, 4, 6.0, 0).unwrap();
    let m = evaluate_run(&config.out_dir, &samples).unwrap();
    assert!((0.0..=1.0).contains(&m.accuracy));
    let state: PipelineState =
        serde_json::from_str(&std::fs::read_to_string(config.out_dir.join(PIPELINE_FILE)).unwrap()).unwrap();
    assert_eq!(state.config_hash, report.config_hash);
    assert_eq!(state.train_latents.len(), config.data.train_size);
}

#[test]
fn standardization_uses_training_rows_only() {
    let samples = generate_synthetic(60, 4, 6.0, 3).unwrap();
    let labels: Vec<i8> = samples.iter().map(|s| s.label()).collect();
    let (train, test) = stratified_split(&labels, 40, 20, 0).unwrap();
    assert!(train.iter().all(|i| !test.contains(i)));
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let fit_train = fit_standardizer(&pick(&train)).unwrap();
    let leaked: Vec<usize> = train.iter().chain(&test).copied().collect();
    let fit_leaked = fit_standardizer(&pick(&leaked)).unwrap();
    assert_ne!(fit_train, fit_leaked);
}

#[test]
fn oversized_split_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    write_dataset(&generate_synthetic(20, 4, 6.0, 0).unwrap(), &csv).unwrap();
    let mut config = small_config(&dir.path().join("run"));
    config.data.path = Some(csv.clone());
    let err = run_experiment(&config).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    assert!(config.out_dir.join("config.toml").is_file());
    assert_eq!(load_dataset(&csv, "label").unwrap().samples.len(), 20);
}

#[test]
fn binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let synth = bin()
        .args(["synth", "--n", "60", "--seed", "2", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(synth.status.success());

    let cfg_path = dir.path().join("exp.toml");
    let mut config = small_config(&dir.path().join("unused"));
    config.data.path = Some(csv.clone());
    std::fs::write(&cfg_path, config.to_toml_string().unwrap()).unwrap();
    let run_dir = dir.path().join("run");
    let out = bin()
        .args(["train", "--analytic", "--seed", "5", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("test"));

    let report = bin().arg("report").arg("--run").arg(&run_dir).output().unwrap();
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("qae") && text.contains("kernel"), "{text}");

    let eval = bin().arg("evaluate").arg("--run").arg(&run_dir).arg("--data").arg(&csv).output().unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(String::from_utf8_lossy(&eval.stdout).starts_with("eval"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "shotz = 1\n").unwrap();
    let out = bin().arg("train").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["train", "--analytic", "--noise", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "a,b,label\n1,2,1\n").unwrap();
    let out = bin()
        .arg("evaluate")
        .arg("--run")
        .arg(dir.path())
        .arg("--data")
        .arg(&csv)
        .args(["--label-column", "y"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));

    let out = bin().arg("report").arg("--run").arg(dir.path().join("missing")).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_errors_map_to_config_variant() {
    let mut c = ExperimentConfig::default();
    c.data.test_size = 0;
    assert!(matches!(run_experiment(&c), Err(CliError::Config(_))));
}
