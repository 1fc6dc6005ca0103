//! Quantum autoencoder: encoder ansatz, SWAP-test loss, batched loss
//! statistics, training and latent extraction.
//!
//! Register layout of the loss circuit (width `n_l + 2·n_t + 1`):
//!
//! ```text
//! [0, n_l)                 latent
//! [n_l, n_l + n_t)         trash A (encoder output)
//! [n_q, n_q + n_t)         trash B, reference |0…0⟩
//! n_q + n_t                auxiliary
//! ```

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{amplitude_encode, EncodedSample};
use crate::error::{Error, Result};
use crate::execute::outcome_distribution;
use crate::noise::DepolarizingModel;
use crate::optim::{CobylaConfig, Minimizer, OptimResult};
use crate::qsim::{Circuit, StateVector, MAX_QUBITS};
use crate::seed;
use crate::stats::{LossStats, TrainLogRow};

/// Perturbation used for the logged gradient-norm estimate.
pub const GRAD_PROBE_C: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaeConfig {
    /// Input qubits `n_q`.
    pub num_qubits: usize,
    /// Latent qubits `n_l`.
    pub latent_qubits: usize,
    pub reps: usize,
    /// Shots per circuit, 0 for the exact marginal.
    pub shots: u64,
    pub batch_size: usize,
    pub num_batches: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl QaeConfig {
    pub fn new(num_qubits: usize, latent_qubits: usize) -> Self {
        Self {
            num_qubits,
            latent_qubits,
            reps: 2,
            shots: 0,
            batch_size: 16,
            num_batches: 5,
            max_iters: 150,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_qubits < 1 || self.latent_qubits >= self.num_qubits {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= latent qubits < input qubits, got n_l = {} and n_q = {}",
                self.latent_qubits, self.num_qubits
            )));
        }
        if self.reps < 1 {
            return Err(Error::InvalidArgument("encoder needs at least one repetition".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.width() > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                requested: self.width(),
                max: MAX_QUBITS,
            });
        }
        Ok(())
    }

    /// Trash qubits `n_t = n_q − n_l`.
    pub fn trash_qubits(&self) -> usize {
        self.num_qubits - self.latent_qubits
    }

    /// Width of the SWAP-test circuit.
    pub fn width(&self) -> usize {
        self.num_qubits + self.trash_qubits() + 1
    }

    pub fn aux_qubit(&self) -> usize {
        self.width() - 1
    }

    pub fn num_parameters(&self) -> usize {
        self.reps * self.num_qubits
    }

    /// The COBYLA-style optimizer with this config's iteration budget.
    pub fn cobyla(&self) -> CobylaConfig {
        CobylaConfig {
            max_iters: self.max_iters,
            ..CobylaConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    theta: Vec<f64>,
}

impl EncoderParams {
    pub fn new(config: &QaeConfig, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != config.num_parameters() {
            return Err(Error::DimensionMismatch {
                expected: config.num_parameters(),
                actual: theta.len(),
                context: "encoder parameter count",
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("encoder angles must be finite".into()));
        }
        Ok(Self { theta })
    }

    pub fn zeros(config: &QaeConfig) -> Self {
        Self {
            theta: vec![0.0; config.num_parameters()],
        }
    }

    /// Uniform in `[0, π)`.
    pub fn random(config: &QaeConfig, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        Self {
            theta: (0..config.num_parameters())
                .map(|_| rng.random_range(0.0..std::f64::consts::PI))
                .collect(),
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// RY layer then CX(j, j+1) ladder, `reps` times, on `n_q` qubits.
pub fn build_encoder(config: &QaeConfig) -> Result<Circuit> {
    config.validate()?;
    let n = config.num_qubits;
    let mut c = Circuit::new(n)?;
    for r in 0..config.reps {
        for j in 0..n {
            c.ry_slot(j, format!("theta[{r}][{j}]"))?;
        }
        for j in 0..n - 1 {
            c.cx(j, j + 1)?;
        }
    }
    Ok(c)
}

pub fn build_swaptest_circuit(config: &QaeConfig) -> Result<Circuit> {
    let mut c = build_encoder(config)?.widened(config.width())?;
    let (n_l, n_t, aux) = (config.latent_qubits, config.trash_qubits(), config.aux_qubit());
    c.h(aux)?;
    for i in 0..n_t {
        c.cswap(aux, n_l + i, config.num_qubits + i)?;
    }
    c.h(aux)?;
    Ok(c)
}

fn check_sample(config: &QaeConfig, sample: &EncodedSample) -> Result<()> {
    if sample.num_qubits() != config.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: config.num_qubits,
            actual: sample.num_qubits(),
            context: "encoded sample qubits vs autoencoder input",
        });
    }
    Ok(())
}

fn check_params(config: &QaeConfig, theta: &[f64]) -> Result<()> {
    if theta.len() != config.num_parameters() {
        return Err(Error::DimensionMismatch {
            expected: config.num_parameters(),
            actual: theta.len(),
            context: "encoder parameter count",
        });
    }
    Ok(())
}

/// Estimated `P(aux = 1)` for one sample.
fn swap_probability(
    config: &QaeConfig,
    circuit: &Circuit,
    theta: &[f64],
    sample: &EncodedSample,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<f64> {
    let initial = swaptest_initial_state(config, sample)?;
    let dist = outcome_distribution(circuit, theta, &initial, &[config.aux_qubit()], config.shots, noise, seed)?;
    Ok(dist[1])
}

/// Per-sample SWAP-test probabilities; sample `i` uses seed `derive(seed, [i])`.
fn sample_losses(
    config: &QaeConfig,
    circuit: &Circuit,
    theta: &[f64],
    samples: &[&EncodedSample],
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| swap_probability(config, circuit, theta, s, noise, seed::derive(seed, &[i as u64])))
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Batch mean of the SWAP-test `P(aux = 1)`.
pub fn qae_loss(
    config: &QaeConfig,
    params: &EncoderParams,
    batch: &[EncodedSample],
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    check_params(config, &params.theta)?;
    let circuit = build_swaptest_circuit(config)?;
    let refs: Vec<&EncodedSample> = batch.iter().collect();
    Ok(mean(&sample_losses(config, &circuit, &params.theta, &refs, noise, seed)?))
}

/// Draws `num_batches` batches (without replacement within a batch) from
/// `pool` and summarizes the per-batch losses.
pub fn batched_loss_stats(
    config: &QaeConfig,
    params: &EncoderParams,
    pool: &[EncodedSample],
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<LossStats> {
    config.validate()?;
    check_params(config, &params.theta)?;
    let circuit = build_swaptest_circuit(config)?;
    batch_stats(config, &circuit, &params.theta, pool, noise, seed)
}

fn batch_stats(
    config: &QaeConfig,
    circuit: &Circuit,
    theta: &[f64],
    pool: &[EncodedSample],
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<LossStats> {
    if config.num_batches < 2 {
        return Err(Error::InvalidArgument(format!(
            "loss statistics need at least 2 batches, got {}",
            config.num_batches
        )));
    }
    if pool.len() < config.batch_size {
        return Err(Error::InvalidArgument(format!(
            "pool of {} samples is smaller than the batch size {}",
            pool.len(),
            config.batch_size
        )));
    }
    let batches: Vec<Vec<usize>> = (0..config.num_batches as u64)
        .map(|b| {
            let mut rng = seed::rng(seed::derive(seed, &[seed::tag("batch"), b]));
            rand::seq::index::sample(&mut rng, pool.len(), config.batch_size).into_vec()
        })
        .collect();

    let losses: Vec<f64> = if config.shots == 0 && noise.is_none() {
        // Exact per-sample losses do not depend on the seed, so each pool
        // member is simulated at most once.
        let mut used: Vec<usize> = batches.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        let refs: Vec<&EncodedSample> = used.iter().map(|&i| &pool[i]).collect();
        let values = sample_losses(config, circuit, theta, &refs, None, 0)?;
        let mut by_index = vec![0.0; pool.len()];
        for (&i, v) in used.iter().zip(values) {
            by_index[i] = v;
        }
        batches
            .iter()
            .map(|b| mean(&b.iter().map(|&i| by_index[i]).collect::<Vec<_>>()))
            .collect()
    } else {
        batches
            .iter()
            .enumerate()
            .map(|(b, idx)| {
                let refs: Vec<&EncodedSample> = idx.iter().map(|&i| &pool[i]).collect();
                let s = seed::derive(seed, &[seed::tag("loss"), b as u64]);
                Ok(mean(&sample_losses(config, circuit, theta, &refs, noise, s)?))
            })
            .collect::<Result<_>>()?
    };
    LossStats::from_samples(&losses)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaeTraining {
    pub params: EncoderParams,
    /// One row per objective evaluation.
    pub log: Vec<TrainLogRow>,
    pub optim: OptimResult,
}

/// Minimizes the batched mean loss from a uniform `[0, π)` start.
///
/// Evaluation `e` draws fresh batches with seed `derive(seed, [tag, e])`.
/// Every evaluation also probes `θ ± c·Δ` on the same batches to log a
/// two-sided gradient-norm estimate; the probes are not seen by the
/// optimizer.
pub fn train_qae(
    config: &QaeConfig,
    pool: &[EncodedSample],
    optimizer: &dyn Minimizer,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<QaeTraining> {
    config.validate()?;
    if pool.is_empty() {
        return Err(Error::Empty("training pool"));
    }
    for s in pool {
        check_sample(config, s)?;
    }
    let circuit = build_swaptest_circuit(config)?;
    let theta0 = EncoderParams::random(config, seed::derive(seed, &[seed::tag("qae-init")]));
    let mut log: Vec<TrainLogRow> = Vec::new();

    let optim = {
        let mut objective = |theta: &[f64]| -> Result<f64> {
            let e = log.len() as u64;
            let eval_seed = seed::derive(seed, &[seed::tag("qae-eval"), e]);
            let stats = batch_stats(config, &circuit, theta, pool, noise, eval_seed)?;

            let mut rng = seed::rng(seed::derive(seed, &[seed::tag("qae-grad"), e]));
            let delta: Vec<f64> = (0..theta.len())
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let probe = |sign: f64| -> Result<f64> {
                let shifted: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + sign * GRAD_PROBE_C * d).collect();
                Ok(batch_stats(config, &circuit, &shifted, pool, noise, eval_seed)?.mean)
            };
            let slope = (probe(1.0)? - probe(-1.0)?) / (2.0 * GRAD_PROBE_C);
            let grad_norm = slope.abs() * (theta.len() as f64).sqrt();

            log.push(TrainLogRow::new(log.len(), &stats, grad_norm));
            Ok(stats.mean)
        };
        optimizer.minimize(&mut objective, theta0.theta())?
    };
    if optim.f_best.is_none() {
        return Err(Error::Empty("optimizer evaluations"));
    }
    Ok(QaeTraining {
        params: EncoderParams::new(config, optim.x_best.clone())?,
        log,
        optim,
    })
}

/// Marginal distribution of the latent qubits after the encoder.
pub fn extract_latent(
    config: &QaeConfig,
    params: &EncoderParams,
    sample: &EncodedSample,
    shots: u64,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<Vec<f64>> {
    check_params(config, &params.theta)?;
    check_sample(config, sample)?;
    let encoder = build_encoder(config)?;
    latent_of(config, &encoder, &params.theta, sample, shots, noise, seed)
}

fn latent_of(
    config: &QaeConfig,
    encoder: &Circuit,
    theta: &[f64],
    sample: &EncodedSample,
    shots: u64,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<Vec<f64>> {
    check_sample(config, sample)?;
    let latent: Vec<usize> = (0..config.latent_qubits).collect();
    let initial = amplitude_encode(sample)?;
    outcome_distribution(encoder, theta, &initial, &latent, shots, noise, seed)
}

/// [`extract_latent`] over many samples in parallel; sample `i` uses seed
/// `derive(seed, [i])`.
pub fn extract_latents(
    config: &QaeConfig,
    params: &EncoderParams,
    samples: &[EncodedSample],
    shots: u64,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_params(config, &params.theta)?;
    let encoder = build_encoder(config)?;
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| latent_of(config, &encoder, &params.theta, s, shots, noise, seed::derive(seed, &[i as u64])))
        .collect()
}

/// Pool of exactly compressible states `|ψ⟩ ⊗ |0…0⟩_trash`, with random
/// real latent states `|ψ⟩`.
pub fn compressible_pool(config: &QaeConfig, size: usize, seed: u64) -> Result<Vec<EncodedSample>> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let latent_dim = 1usize << config.latent_qubits;
    (0..size)
        .map(|_| {
            let mut values = vec![0.0f64; 1 << config.num_qubits];
            loop {
                for v in values.iter_mut().take(latent_dim) {
                    *v = rng.random_range(-1.0..1.0);
                }
                if values.iter().any(|v| v.abs() > 1e-3) {
                    break;
                }
            }
            EncodedSample::from_features(&values)
        })
        .collect()
}

/// Encodes a sample into a state on the full SWAP-test register.
pub fn swaptest_initial_state(config: &QaeConfig, sample: &EncodedSample) -> Result<StateVector> {
    check_sample(config, sample)?;
    amplitude_encode(sample)?.with_ancillas(config.trash_qubits() + 1)
}
