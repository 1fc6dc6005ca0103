//! Linear-model trust-region minimizer in the style of COBYLA, restricted to
//! the unconstrained case.
//!
//! The method keeps `m + 1` interpolation points (a simplex), fits the
//! linear model that interpolates the objective on it, and moves a distance
//! `rho` along the model's steepest-descent direction from the best vertex.
//! A successful step replaces the vertex whose removal keeps the simplex
//! volume largest. A failed step either rebuilds a too-wide simplex around
//! the best vertex or halves `rho`; the run ends once `rho` drops below
//! `rho_end` or the evaluation budget is spent. Every objective evaluation
//! counts as one iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{IterationRecord, Objective, OptimResult, StopReason, Tracker};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CobylaConfig {
    /// Maximum number of objective evaluations.
    pub max_iters: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl Default for CobylaConfig {
    fn default() -> Self {
        Self {
            max_iters: 150,
            rho_begin: 0.5,
            rho_end: 1e-3,
        }
    }
}

impl CobylaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_begin > self.rho_end && self.rho_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need rho_begin > rho_end > 0, got {} and {}",
                self.rho_begin, self.rho_end
            )));
        }
        Ok(())
    }
}

/// Below this relative volume the simplex is treated as degenerate.
const MIN_VOLUME: f64 = 1e-8;

struct Run<'f, 'a> {
    tracker: Tracker<'f, 'a>,
    history: Vec<IterationRecord>,
    budget: usize,
    vertices: Vec<Vec<f64>>,
    values: Vec<f64>,
}

/// Signals that the evaluation budget ran out.
struct Exhausted;

impl<'f, 'a> Run<'f, 'a> {
    fn eval(&mut self, x: &[f64]) -> Result<std::result::Result<f64, Exhausted>> {
        if self.tracker.evaluations >= self.budget {
            return Ok(Err(Exhausted));
        }
        let value = self.tracker.eval(x)?;
        self.history.push(IterationRecord {
            iteration: self.tracker.evaluations - 1,
            value,
            best_value: self.tracker.best_value(),
            grad_norm: None,
        });
        Ok(Ok(value))
    }

    fn best(&self) -> usize {
        let mut b = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[b] {
                b = i;
            }
        }
        b
    }

    /// Rebuilds the simplex as the best vertex plus axis steps of length `rho`.
    fn respan(&mut self, rho: f64) -> Result<std::result::Result<(), Exhausted>> {
        let b = self.best();
        let base = self.vertices[b].clone();
        let base_value = self.values[b];
        self.vertices = vec![base.clone()];
        self.values = vec![base_value];
        for i in 0..base.len() {
            let mut v = base.clone();
            v[i] += rho;
            match self.eval(&v)? {
                Ok(fv) => {
                    self.vertices.push(v);
                    self.values.push(fv);
                }
                Err(e) => return Ok(Err(e)),
            }
        }
        Ok(Ok(()))
    }

    /// Rows `v_i − v_b` for the non-best vertices, in vertex order.
    fn offsets(&self, b: usize) -> (DMatrix<f64>, Vec<usize>) {
        let m = self.vertices[b].len();
        let others: Vec<usize> = (0..self.vertices.len()).filter(|&i| i != b).collect();
        let mut a = DMatrix::zeros(m, m);
        for (r, &i) in others.iter().enumerate() {
            for c in 0..m {
                a[(r, c)] = self.vertices[i][c] - self.vertices[b][c];
            }
        }
        (a, others)
    }
}

/// `|det A| / Π ‖row‖`, zero for a degenerate simplex.
fn relative_volume(a: &DMatrix<f64>) -> f64 {
    let norms: f64 = a.row_iter().map(|r| r.norm()).product();
    if norms == 0.0 {
        return 0.0;
    }
    a.determinant().abs() / norms
}

pub fn cobyla_minimize(f: &mut Objective<'_>, x0: &[f64], config: &CobylaConfig) -> Result<OptimResult> {
    config.validate()?;
    let m = x0.len();
    if m == 0 {
        return Err(Error::Empty("initial point"));
    }
    let mut run = Run {
        tracker: Tracker::new(f, x0),
        history: Vec::new(),
        budget: config.max_iters,
        vertices: Vec::new(),
        values: Vec::new(),
    };
    let mut rho = config.rho_begin;
    let stop = 'outer: {
        let Ok(f0) = run.eval(x0)? else {
            break 'outer StopReason::MaxIterations;
        };
        run.vertices.push(x0.to_vec());
        run.values.push(f0);
        if run.respan(rho)?.is_err() {
            break 'outer StopReason::MaxIterations;
        }

        loop {
            let b = run.best();
            let (a, others) = run.offsets(b);
            let degenerate = relative_volume(&a) < MIN_VOLUME;
            let gradient = if degenerate {
                None
            } else {
                let rhs = DVector::from_iterator(m, others.iter().map(|&i| run.values[i] - run.values[b]));
                a.clone().lu().solve(&rhs)
            };
            let Some(g) = gradient else {
                if run.respan(rho)?.is_err() {
                    break 'outer StopReason::MaxIterations;
                }
                continue;
            };

            let gnorm = g.norm();
            let improved = if gnorm > 0.0 && gnorm.is_finite() {
                let trial: Vec<f64> = run.vertices[b]
                    .iter()
                    .zip(g.iter())
                    .map(|(x, gi)| x - rho * gi / gnorm)
                    .collect();
                let Ok(ft) = run.eval(&trial)? else {
                    break 'outer StopReason::MaxIterations;
                };
                if ft < run.values[b] {
                    // trial − v_b = Aᵀ λ; replacing vertex j scales volume by |λ_j|
                    let step = DVector::from_iterator(
                        m,
                        trial.iter().zip(&run.vertices[b]).map(|(t, v)| t - v),
                    );
                    let lambda = a.transpose().lu().solve(&step);
                    let (j, weight) = lambda
                        .map(|l| {
                            l.iter()
                                .enumerate()
                                .map(|(r, v)| (others[r], v.abs()))
                                .fold((others[0], -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                        })
                        .unwrap_or((others[0], 0.0));
                    run.vertices[j] = trial;
                    run.values[j] = ft;
                    if weight < MIN_VOLUME && run.respan(rho)?.is_err() {
                        break 'outer StopReason::MaxIterations;
                    }
                    true
                } else {
                    false
                }
            } else {
                false
            };
            if improved {
                continue;
            }

            // The model failed. A simplex much wider than rho gives a poor
            // model, so rebuild it before giving up on this radius.
            let b = run.best();
            let widest = run
                .vertices
                .iter()
                .map(|v| v.iter().zip(&run.vertices[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            if widest <= 2.0 * rho {
                rho *= 0.5;
                if rho < config.rho_end {
                    break 'outer StopReason::RadiusExhausted;
                }
            }
            if run.respan(rho)?.is_err() {
                break 'outer StopReason::MaxIterations;
            }
        }
    };

    let x_final = run.tracker.x_best.clone();
    Ok(OptimResult {
        x_best: run.tracker.x_best,
        f_best: run.tracker.f_best,
        x_final,
        evaluations: run.tracker.evaluations,
        history: run.history,
        stop,
    })
}
