//! Classical preprocessing and amplitude encoding.
//!
//! Raw rows are z-scored with statistics fitted on the training split, scaled
//! to unit L2 norm, and zero-padded to the next power of two so they can be
//! loaded directly as the amplitudes of `n_q = max(1, ⌈log₂ d⌉)` qubits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::StateVector;

/// Norm tolerance accepted by [`amplitude_encode`].
pub const ENCODE_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    features: Vec<f64>,
    label: i8,
}

impl RawSample {
    pub fn new(features: Vec<f64>, label: i64) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("feature vector"));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite feature {bad}")));
        }
        Ok(Self {
            features,
            label: check_label(label)?,
        })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> i8 {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

pub fn check_label(label: i64) -> Result<i8> {
    match label {
        -1 => Ok(-1),
        1 => Ok(1),
        other => Err(Error::InvalidLabel(other)),
    }
}

/// Feature-wise mean and population standard deviation of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl StandardizationStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

pub fn fit_standardizer(train: &[RawSample]) -> Result<StandardizationStats> {
    let first = train.first().ok_or(Error::Empty("training set"))?;
    let d = first.dim();
    if let Some(bad) = train.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.dim(),
            context: "training sample dimension",
        });
    }
    let n = train.len() as f64;
    let mut mu = vec![0.0; d];
    for s in train {
        for (m, x) in mu.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for s in train {
        for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mu) {
            *v += (x - m) * (x - m);
        }
    }
    let sigma = var.into_iter().map(|v| (v / n).sqrt()).collect();
    Ok(StandardizationStats { mu, sigma })
}

/// `max(1, ⌈log₂ d⌉)`.
pub fn qubits_for_dim(d: usize) -> usize {
    if d <= 2 {
        1
    } else {
        (usize::BITS - (d - 1).leading_zeros()) as usize
    }
}

/// Preprocessed, padded, unit-norm feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    values: Vec<f64>,
    num_qubits: usize,
    original_dim: usize,
}

impl EncodedSample {
    /// Normalizes and pads an arbitrary nonzero real vector.
    pub fn from_features(features: &[f64]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("feature vector"));
        }
        let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateSample);
        }
        let d = features.len();
        let num_qubits = qubits_for_dim(d);
        let mut values: Vec<f64> = features.iter().map(|x| x / norm).collect();
        values.resize(1 << num_qubits, 0.0);
        Ok(Self {
            values,
            num_qubits,
            original_dim: d,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn original_dim(&self) -> usize {
        self.original_dim
    }
}

/// z-score (σ = 0 features map to 0), L2-normalize, zero-pad.
pub fn preprocess(sample: &RawSample, stats: &StandardizationStats) -> Result<EncodedSample> {
    if sample.dim() != stats.dim() {
        return Err(Error::DimensionMismatch {
            expected: stats.dim(),
            actual: sample.dim(),
            context: "sample dimension vs standardization stats",
        });
    }
    let scaled: Vec<f64> = sample
        .features
        .iter()
        .zip(stats.mu.iter().zip(&stats.sigma))
        .map(|(x, (m, s))| if *s == 0.0 { 0.0 } else { (x - m) / s })
        .collect();
    EncodedSample::from_features(&scaled)
}

/// Loads the padded vector as real amplitudes.
pub fn amplitude_encode(sample: &EncodedSample) -> Result<StateVector> {
    let norm: f64 = sample.values.iter().map(|x| x * x).sum();
    if (norm - 1.0).abs() > ENCODE_NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    StateVector::from_real(&sample.values)
}
