//! Trainable fidelity kernel on QAE latents.
//!
//! Feature map, per layer `ℓ`: `RY(π·z_{j mod |z|})` and `RY(φ_{ℓ,j})` on
//! every qubit `j`, then a CX(j, j+1) ladder. Entries are estimated with the
//! compute–uncompute protocol: `Φ(z_i)` then `Φ(z_j)†` on `|0…0⟩`, reading
//! the probability of `|0…0⟩`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::execute::outcome_distribution;
use crate::noise::DepolarizingModel;
use crate::optim::{spsa_minimize_with, OptimResult, SpsaConfig};
use crate::qsim::{Angle, Circuit, Gate, StateVector, MAX_QUBITS};
use crate::qsvc::{self, DEFAULT_TOL};
use crate::seed;
use crate::stats::{LossStats, TrainLogRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapConfig {
    /// Kernel qubits `n_k`.
    pub num_qubits: usize,
    pub layers: usize,
    /// Shots per entry, 0 for the exact fidelity.
    pub shots: u64,
}

impl FeatureMapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_qubits < 1 || self.layers < 1 {
            return Err(Error::InvalidArgument(format!(
                "feature map needs n_k >= 1 and L >= 1, got {} and {}",
                self.num_qubits, self.layers
            )));
        }
        if self.num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                requested: self.num_qubits,
                max: MAX_QUBITS,
            });
        }
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.layers * self.num_qubits
    }

    fn is_analytic(&self, noise: Option<&DepolarizingModel>) -> bool {
        self.shots == 0 && noise.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    phi: Vec<f64>,
}

impl KernelParams {
    pub fn new(config: &FeatureMapConfig, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != config.num_parameters() {
            return Err(Error::DimensionMismatch {
                expected: config.num_parameters(),
                actual: phi.len(),
                context: "kernel parameter count",
            });
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("kernel angles must be finite".into()));
        }
        Ok(Self { phi })
    }

    pub fn zeros(config: &FeatureMapConfig) -> Self {
        Self {
            phi: vec![0.0; config.num_parameters()],
        }
    }

    /// Uniform in `[0, π)`.
    pub fn random(config: &FeatureMapConfig, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        Self {
            phi: (0..config.num_parameters()).map(|_| rng.random_range(0.0..PI)).collect(),
        }
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// First 16 hex digits of the SHA-256 of the little-endian angles.
    pub fn hash(&self) -> String {
        params_hash(&self.phi)
    }
}

fn params_hash(phi: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in phi {
        h.update(p.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Symmetric kernel estimate with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    shots_used: u64,
    params_hash: String,
}

impl KernelMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn shots_used(&self) -> u64 {
        self.shots_used
    }

    pub fn params_hash(&self) -> &str {
        &self.params_hash
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    /// Header row of sample indices, then one row per sample.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(&self.entries, out)
    }
}

pub fn write_matrix_csv<W: std::io::Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record((0..m.ncols()).map(|j| j.to_string()))?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn check_point(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::Empty("kernel input"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("kernel input must be finite".into()));
    }
    Ok(())
}

fn check_phi(config: &FeatureMapConfig, phi: &KernelParams) -> Result<()> {
    config.validate()?;
    if phi.phi.len() != config.num_parameters() {
        return Err(Error::DimensionMismatch {
            expected: config.num_parameters(),
            actual: phi.phi.len(),
            context: "kernel parameter count",
        });
    }
    Ok(())
}

/// Gate list of one feature map; `data(j)` supplies the encoding angle of
/// qubit `j` and the trainable angles read slots `phi_base + ℓ·n_k + j`.
fn feature_map_gates(config: &FeatureMapConfig, data: impl Fn(usize) -> Angle, phi_base: usize) -> Vec<Gate> {
    let n = config.num_qubits;
    let mut gates = Vec::new();
    for l in 0..config.layers {
        for j in 0..n {
            gates.push(Gate::Ry { qubit: j, angle: data(j) });
            gates.push(Gate::Ry {
                qubit: j,
                angle: Angle::slot(phi_base + l * n + j),
            });
        }
        for j in 0..n.saturating_sub(1) {
            gates.push(Gate::Cx { control: j, target: j + 1 });
        }
    }
    gates
}

fn add_phi_slots(c: &mut Circuit, config: &FeatureMapConfig) -> usize {
    let base = c.num_parameters();
    for l in 0..config.layers {
        for j in 0..config.num_qubits {
            c.add_slot(format!("phi[{l}][{j}]"));
        }
    }
    base
}

/// `Φ(z, ·)` with concrete data angles and one slot per trainable angle.
pub fn build_feature_map(z: &[f64], config: &FeatureMapConfig) -> Result<Circuit> {
    config.validate()?;
    check_point(z)?;
    let mut c = Circuit::new(config.num_qubits)?;
    let base = add_phi_slots(&mut c, config);
    for g in feature_map_gates(config, |j| Angle::Fixed(PI * z[j % z.len()]), base) {
        c.push(g)?;
    }
    Ok(c)
}

/// Compute–uncompute template. Slots: `a[j]` (data angles of the first
/// point), `b[j]` (second point), then the trainable angles.
fn fidelity_template(config: &FeatureMapConfig) -> Result<Circuit> {
    let n = config.num_qubits;
    let mut c = Circuit::new(n)?;
    for j in 0..n {
        c.add_slot(format!("a[{j}]"));
    }
    for j in 0..n {
        c.add_slot(format!("b[{j}]"));
    }
    let base = add_phi_slots(&mut c, config);
    for g in feature_map_gates(config, Angle::slot, base) {
        c.push(g)?;
    }
    for g in feature_map_gates(config, |j| Angle::slot(n + j), base).iter().rev() {
        c.push(g.inverse())?;
    }
    Ok(c)
}

fn template_params(config: &FeatureMapConfig, zi: &[f64], zj: &[f64], phi: &[f64]) -> Vec<f64> {
    let n = config.num_qubits;
    let mut p = Vec::with_capacity(2 * n + phi.len());
    p.extend((0..n).map(|j| PI * zi[j % zi.len()]));
    p.extend((0..n).map(|j| PI * zj[j % zj.len()]));
    p.extend_from_slice(phi);
    p
}

fn entry_with(
    template: &Circuit,
    config: &FeatureMapConfig,
    zi: &[f64],
    zj: &[f64],
    phi: &[f64],
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<f64> {
    let params = template_params(config, zi, zj, phi);
    let all: Vec<usize> = (0..config.num_qubits).collect();
    let initial = StateVector::zero(config.num_qubits)?;
    let dist = outcome_distribution(template, &params, &initial, &all, config.shots, noise, seed)?;
    Ok(dist[0].clamp(0.0, 1.0))
}

/// Estimated `|⟨Φ(z_j)|Φ(z_i)⟩|²`.
pub fn kernel_entry(
    zi: &[f64],
    zj: &[f64],
    phi: &KernelParams,
    config: &FeatureMapConfig,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<f64> {
    check_phi(config, phi)?;
    check_point(zi)?;
    check_point(zj)?;
    let template = fidelity_template(config)?;
    entry_with(&template, config, zi, zj, &phi.phi, noise, seed)
}

fn check_points(z: &[Vec<f64>]) -> Result<()> {
    for p in z {
        check_point(p)?;
    }
    Ok(())
}

/// Upper triangle plus diagonal, mirrored. Entry `(i, j)` uses seed
/// `derive(seed, [i, j])`. In analytic noiseless mode the diagonal is the
/// exact value 1.
pub fn kernel_matrix(
    z: &[Vec<f64>],
    phi: &KernelParams,
    config: &FeatureMapConfig,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<KernelMatrix> {
    check_phi(config, phi)?;
    if z.len() < 2 {
        return Err(Error::InvalidArgument(format!("kernel matrix needs N >= 2, got {}", z.len())));
    }
    check_points(z)?;
    let template = fidelity_template(config)?;
    let n = z.len();
    let analytic = config.is_analytic(noise);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j && analytic {
                return Ok(1.0);
            }
            let s = seed::derive(seed, &[i as u64, j as u64]);
            entry_with(&template, config, &z[i], &z[j], &phi.phi, noise, s)
        })
        .collect::<Result<_>>()?;
    let mut entries = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[(i, j)] = v;
        entries[(j, i)] = v;
    }
    Ok(KernelMatrix {
        entries,
        shots_used: config.shots,
        params_hash: phi.hash(),
    })
}

/// Rows are `rows`, columns are `cols`; entry `(t, i)` uses seed
/// `derive(seed, [t, i])`.
pub fn kernel_cross(
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    phi: &KernelParams,
    config: &FeatureMapConfig,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<DMatrix<f64>> {
    check_phi(config, phi)?;
    check_points(rows)?;
    check_points(cols)?;
    let template = fidelity_template(config)?;
    let m = cols.len();
    let values: Vec<f64> = (0..rows.len() * m)
        .into_par_iter()
        .map(|k| {
            let (t, i) = (k / m, k % m);
            let s = seed::derive(seed, &[t as u64, i as u64]);
            entry_with(&template, config, &rows[t], &cols[i], &phi.phi, noise, s)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_row_slice(rows.len(), m, &values))
}

/// `L = ½ αᵀ(Y∘K)α − Σα` at the solved dual `α`, i.e. minus the optimal dual
/// objective.
pub fn qsvc_margin_loss(k: &DMatrix<f64>, y: &[i8], c: f64) -> Result<f64> {
    let model = qsvc::solve_dual(k, y, c, DEFAULT_TOL)?;
    Ok(-model.dual_objective(k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTraining {
    pub params: KernelParams,
    /// One row per SPSA iteration.
    pub log: Vec<TrainLogRow>,
    pub optim: OptimResult,
}

/// Options of [`train_kernel`] beyond the SPSA schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTrainOptions {
    /// Box parameter of the dual solved at every evaluation.
    pub c: f64,
    /// Re-evaluations of the new iterate per iteration in shot mode, used
    /// for the logged loss and its spread.
    pub log_repeats: usize,
}

impl Default for KernelTrainOptions {
    fn default() -> Self {
        Self {
            c: qsvc::DEFAULT_C,
            log_repeats: 2,
        }
    }
}

/// SPSA on `φ ↦ D*(φ)`, the optimal dual objective of the QSVC trained on
/// `K(φ)`. `D* = −qsvc_margin_loss` and equals half the squared norm of the
/// separating weight vector, so lowering it widens the margin.
///
/// Evaluation `e` builds its matrix with seed `derive(spsa.seed, [tag, e])`.
/// After each iteration the new iterate is re-evaluated for the log (once
/// in analytic mode, `log_repeats` times with fresh seeds otherwise).
pub fn train_kernel(
    z: &[Vec<f64>],
    y: &[i8],
    phi0: &KernelParams,
    spsa: &SpsaConfig,
    config: &FeatureMapConfig,
    options: &KernelTrainOptions,
    noise: Option<&DepolarizingModel>,
) -> Result<KernelTraining> {
    check_phi(config, phi0)?;
    if y.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            actual: y.len(),
            context: "label count vs kernel inputs",
        });
    }
    if options.log_repeats < 2 && !config.is_analytic(noise) {
        return Err(Error::InvalidArgument("shot-mode kernel logging needs log_repeats >= 2".into()));
    }
    let base = spsa.seed;
    let dual_at = |phi: &[f64], s: u64| -> Result<f64> {
        let params = KernelParams { phi: phi.to_vec() };
        let k = kernel_matrix(z, &params, config, noise, s)?;
        Ok(-qsvc_margin_loss(k.entries(), y, options.c)?)
    };

    let mut evaluations = 0u64;
    let mut objective = |phi: &[f64]| -> Result<f64> {
        let s = seed::derive(base, &[seed::tag("kernel-eval"), evaluations]);
        evaluations += 1;
        dual_at(phi, s)
    };
    let mut log = Vec::with_capacity(spsa.max_iters);
    let optim = spsa_minimize_with(&mut objective, phi0.phi(), spsa, |step| {
        let stats = if config.is_analytic(noise) {
            LossStats::point(dual_at(step.x, 0)?)
        } else {
            let values = (0..options.log_repeats as u64)
                .map(|r| dual_at(step.x, seed::derive(base, &[seed::tag("kernel-log"), step.iteration as u64, r])))
                .collect::<Result<Vec<_>>>()?;
            LossStats::from_samples(&values)?
        };
        log.push(TrainLogRow::new(step.iteration, &stats, step.grad_norm));
        Ok(())
    })?;
    let params = if optim.f_best.is_some() {
        KernelParams::new(config, optim.x_best.clone())?
    } else {
        phi0.clone()
    };
    Ok(KernelTraining { params, log, optim })
}
