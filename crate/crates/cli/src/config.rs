//! Experiment configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid config: the
//! synthetic two-cluster dataset, a 160/40 split, 2048 shots per circuit
//! and no noise.

use std::path::{Path, PathBuf};

use qae_ids_core::qsvc::{DEFAULT_C, DEFAULT_TOL};
use qae_ids_core::{CobylaConfig, DepolarizingModel, FeatureMapConfig, QaeConfig, SpsaConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global seed; every random stream is derived from it.
    pub seed: u64,
    /// Shots per circuit; 0 selects exact (analytic) probabilities.
    pub shots: u64,
    pub out_dir: PathBuf,
    /// Worker threads for circuit evaluation (default: all processors).
    pub workers: Option<usize>,
    pub data: DataConfig,
    pub qae: QaeSection,
    pub kernel: KernelSection,
    pub svm: SvmSection,
    pub noise: NoiseSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            shots: 2048,
            out_dir: PathBuf::from("runs/latest"),
            workers: None,
            data: DataConfig::default(),
            qae: QaeSection::default(),
            kernel: KernelSection::default(),
            svm: SvmSection::default(),
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV input; the synthetic generator is used when absent.
    pub path: Option<PathBuf>,
    pub label_column: String,
    pub train_size: usize,
    pub test_size: usize,
    pub split_seed: u64,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            label_column: "label".into(),
            train_size: 160,
            test_size: 40,
            split_seed: 0,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 4,
            separation: 6.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaeSection {
    pub latent_qubits: usize,
    pub reps: usize,
    pub batch_size: usize,
    pub num_batches: usize,
    pub max_iters: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl Default for QaeSection {
    fn default() -> Self {
        let cobyla = CobylaConfig::default();
        Self {
            latent_qubits: 1,
            reps: 2,
            batch_size: 16,
            num_batches: 5,
            max_iters: cobyla.max_iters,
            rho_begin: cobyla.rho_begin,
            rho_end: cobyla.rho_end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub layers: usize,
    pub max_iters: usize,
    pub a: f64,
    pub c: f64,
    /// SPSA stability constant; `max_iters / 10` when absent.
    pub stability: Option<f64>,
    pub alpha_exp: f64,
    pub gamma_exp: f64,
    pub log_repeats: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        let spsa = SpsaConfig::new(20, 0);
        Self {
            layers: 2,
            max_iters: spsa.max_iters,
            a: spsa.a,
            c: spsa.c,
            stability: None,
            alpha_exp: spsa.alpha_exp,
            gamma_exp: spsa.gamma_exp,
            log_repeats: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
}

impl Default for SvmSection {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub enabled: bool,
    pub p1: f64,
    pub p2: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            enabled: false,
            p1: DepolarizingModel::DEFAULT_P1,
            p2: DepolarizingModel::DEFAULT_P2,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    /// Checks everything that can be checked before the data is read.
    pub fn validate(&self) -> Result<()> {
        self.noise_model()?;
        if self.noise.enabled && self.shots == 0 {
            return Err(CliError::Config(
                "analytic mode (shots = 0) cannot be combined with noise".into(),
            ));
        }
        if self.data.train_size < 2 || self.data.test_size < 1 {
            return Err(CliError::Config("need train_size >= 2 and test_size >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        self.cobyla().validate().map_err(config_err)?;
        self.spsa(0).validate().map_err(config_err)?;
        self.feature_map().validate().map_err(config_err)?;
        if !(self.svm.c > 0.0 && self.svm.tol > 0.0) {
            return Err(CliError::Config("svm C and tol must be positive".into()));
        }
        if self.kernel.log_repeats < 2 && self.shots > 0 {
            return Err(CliError::Config("kernel.log_repeats must be >= 2 in shot mode".into()));
        }
        if self.qae.num_batches < 2 {
            return Err(CliError::Config("qae.num_batches must be >= 2".into()));
        }
        if self.qae.batch_size > self.data.train_size {
            return Err(CliError::Config("qae.batch_size exceeds train_size".into()));
        }
        if self.data.path.is_none() {
            let s = &self.data.synthetic;
            if s.n < self.data.train_size + self.data.test_size {
                return Err(CliError::Config(format!(
                    "synthetic n = {} is smaller than train_size + test_size",
                    s.n
                )));
            }
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<Option<DepolarizingModel>> {
        if !self.noise.enabled {
            return Ok(None);
        }
        DepolarizingModel::new(self.noise.p1, self.noise.p2)
            .map(Some)
            .map_err(config_err)
    }

    /// Autoencoder config for `num_qubits` input qubits.
    pub fn qae_config(&self, num_qubits: usize) -> QaeConfig {
        QaeConfig {
            num_qubits,
            latent_qubits: self.qae.latent_qubits,
            reps: self.qae.reps,
            shots: self.shots,
            batch_size: self.qae.batch_size,
            num_batches: self.qae.num_batches,
            max_iters: self.qae.max_iters,
            seed: self.seed,
        }
    }

    pub fn cobyla(&self) -> CobylaConfig {
        CobylaConfig {
            max_iters: self.qae.max_iters,
            rho_begin: self.qae.rho_begin,
            rho_end: self.qae.rho_end,
        }
    }

    pub fn spsa(&self, seed: u64) -> SpsaConfig {
        let k = &self.kernel;
        let mut s = SpsaConfig::new(k.max_iters, seed);
        s.a = k.a;
        s.c = k.c;
        s.alpha_exp = k.alpha_exp;
        s.gamma_exp = k.gamma_exp;
        if let Some(st) = k.stability {
            s.stability = st;
        }
        s
    }

    /// Kernel qubits equal the latent qubits.
    pub fn feature_map(&self) -> FeatureMapConfig {
        FeatureMapConfig {
            num_qubits: self.qae.latent_qubits,
            layers: self.kernel.layers,
            shots: self.shots,
        }
    }

    /// SHA-256 prefix of the canonical JSON form, ignoring `out_dir` and
    /// `workers` (neither changes results).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.workers = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::default();
        c.noise.enabled = true;
        c.kernel.stability = Some(3.0);
        c.data.path = Some("x.csv".into());
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("shotz = 3"),
            Err(CliError::Config(_))
        ));
        let mut c = ExperimentConfig::default();
        c.shots = 0;
        c.noise.enabled = true;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.noise.enabled = true;
        c.noise.p2 = 1.5;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.qae.latent_qubits = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        b.workers = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
