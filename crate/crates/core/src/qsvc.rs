//! Kernel SVM: SMO dual solver, prediction and weighted metrics.
//!
//! The dual is solved in the minimization form used by LIBSVM,
//! `min ½ αᵀQα − 1ᵀα` with `Q_ij = y_i y_j K_ij`, `0 ≤ α ≤ C`, `yᵀα = 0`,
//! keeping the gradient `G = Qα − 1` up to date. The working pair is the
//! maximal violating pair; the decision function is
//! `f(x) = Σ α_i y_i K(x_i, x) + bias`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::check_label;
use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-3;

/// Symmetry tolerance accepted by [`solve_dual`].
pub const SYMMETRY_TOL: f64 = 1e-9;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    #[serde(rename = "C")]
    pub c: f64,
    pub training_labels: Vec<i8>,
    /// Set when the training labels are all one class; the model then
    /// predicts that class everywhere.
    #[serde(default)]
    pub degenerate: bool,
}

impl SvmModel {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))?;
        if model.alpha.len() != model.training_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: model.training_labels.len(),
                actual: model.alpha.len(),
                context: "model alpha vs label count",
            });
        }
        for &y in &model.training_labels {
            check_label(i64::from(y))?;
        }
        Ok(model)
    }

    /// `Σ α_i − ½ Σ α_i α_j y_i y_j K_ij` on the training kernel.
    pub fn dual_objective(&self, k: &DMatrix<f64>) -> f64 {
        dual_objective(k, &self.training_labels, &self.alpha)
    }
}

pub fn dual_objective(k: &DMatrix<f64>, y: &[i8], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * f64::from(y[i] * y[j]) * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn check_labels(y: &[i8]) -> Result<()> {
    for &v in y {
        check_label(i64::from(v))?;
    }
    Ok(())
}

pub fn check_symmetric(k: &DMatrix<f64>) -> Result<()> {
    if !k.is_square() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            actual: k.ncols(),
            context: "kernel matrix must be square",
        });
    }
    for i in 0..k.nrows() {
        for j in i + 1..k.ncols() {
            let gap = (k[(i, j)] - k[(j, i)]).abs();
            if !(gap <= SYMMETRY_TOL) {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }
    Ok(())
}

pub fn solve_dual(k: &DMatrix<f64>, y: &[i8], c: f64, tol: f64) -> Result<SvmModel> {
    check_symmetric(k)?;
    let n = k.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
            context: "label count vs kernel size",
        });
    }
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    check_labels(y)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C = {c} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    if y.iter().all(|&v| v == y[0]) {
        log::warn!("all training labels are {}; returning a constant model", y[0]);
        return Ok(SvmModel {
            alpha: vec![0.0; n],
            bias: f64::from(y[0]),
            support_indices: Vec::new(),
            c,
            training_labels: y.to_vec(),
            degenerate: true,
        });
    }

    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let q = |i: usize, j: usize| yf[i] * yf[j] * k[(i, j)];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi < 0.0 && a < c) || (yi > 0.0 && a > 0.0);

    let max_iter = 10_000_000usize.max(100 * n);
    let mut iter = 0;
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let (mut gmax, mut gmin) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            let v = -yf[t] * grad[t];
            if in_up(alpha[t], yf[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], yf[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        if iter >= max_iter {
            log::warn!("SMO stopped after {iter} iterations with violation {}", gmax - gmin);
            break;
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if yf[i] != yf[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    let rho = {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut free) = (0.0, 0usize);
        for t in 0..n {
            let yg = yf[t] * grad[t];
            if alpha[t] >= c {
                if yf[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if yf[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                sum += yg;
                free += 1;
            }
        }
        if free > 0 {
            sum / free as f64
        } else {
            (ub + lb) / 2.0
        }
    };

    Ok(SvmModel {
        support_indices: (0..n).filter(|&t| alpha[t] > 0.0).collect(),
        alpha,
        bias: -rho,
        c,
        training_labels: y.to_vec(),
        degenerate: false,
    })
}

/// `f(x_t) = Σ_i α_i y_i K_cross[t, i] + bias` for every row `t`.
pub fn decision_function(model: &SvmModel, k_cross: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = model.alpha.len();
    if k_cross.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k_cross.ncols(),
            context: "cross-kernel columns vs training size",
        });
    }
    let coef: Vec<f64> = model
        .alpha
        .iter()
        .zip(&model.training_labels)
        .map(|(a, &y)| a * f64::from(y))
        .collect();
    Ok((0..k_cross.nrows())
        .map(|t| model.bias + (0..n).map(|i| coef[i] * k_cross[(t, i)]).sum::<f64>())
        .collect())
}

/// Sign of the decision function, with `sign(0) = +1`.
pub fn predict(model: &SvmModel, k_cross: &DMatrix<f64>) -> Result<Vec<i8>> {
    Ok(decision_function(model, k_cross)?
        .into_iter()
        .map(|f| if f >= 0.0 { 1 } else { -1 })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub elapsed_seconds: f64,
}

/// Accuracy plus support-weighted precision, recall and F1 over the two
/// classes. A class never predicted has precision 0.
pub fn compute_metrics(predicted: &[i8], truth: &[i8]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
            context: "prediction count vs truth count",
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("truth labels"));
    }
    check_labels(predicted)?;
    check_labels(truth)?;
    let n = truth.len() as f64;
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for class in [1i8, -1] {
        let support = truth.iter().filter(|&&t| t == class).count();
        if support == 0 {
            continue;
        }
        let predicted_pos = predicted.iter().filter(|&&p| p == class).count();
        let tp = predicted.iter().zip(truth).filter(|(&p, &t)| p == class && t == class).count();
        let p = if predicted_pos == 0 { 0.0 } else { tp as f64 / predicted_pos as f64 };
        let r = tp as f64 / support as f64;
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let w = support as f64 / n;
        precision += w * p;
        recall += w * r;
        f1 += w * f;
    }
    Ok(Metrics {
        accuracy: correct as f64 / n,
        precision,
        recall,
        f1,
        elapsed_seconds: 0.0,
    })
}
