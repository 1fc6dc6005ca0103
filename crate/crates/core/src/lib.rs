//! Quantum autoencoder, trainable fidelity kernel and kernel SVM for
//! anomaly detection, running on an embedded statevector simulator with an
//! optional per-gate depolarizing noise model.
//!
//! Pipeline: [`encoding`] turns raw rows into amplitude-encodable vectors,
//! [`qae`] trains an encoder whose latent marginals feed the fidelity
//! kernel in [`kernel`], and [`qsvc`] solves the SVM dual on that kernel.

pub mod encoding;
pub mod error;
pub mod execute;
pub mod kernel;
pub mod noise;
pub mod optim;
pub mod qae;
pub mod qsim;
pub mod qsvc;
pub mod seed;
pub mod stats;

pub use encoding::{EncodedSample, RawSample, StandardizationStats};
pub use error::{Error, Result};
pub use kernel::{FeatureMapConfig, KernelMatrix, KernelParams, KernelTrainOptions};
pub use noise::DepolarizingModel;
pub use optim::{CobylaConfig, Minimizer, OptimResult, SpsaConfig};
pub use qae::{EncoderParams, QaeConfig};
pub use qsim::{Circuit, Gate, MeasurementCounts, StateVector};
pub use qsvc::{Metrics, SvmModel};
pub use stats::{LossStats, TrainLogRow};
