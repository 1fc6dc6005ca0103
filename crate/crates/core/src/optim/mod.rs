//! Gradient-free minimizers behind one interface.

mod cobyla;
mod spsa;

pub use cobyla::{cobyla_minimize, CobylaConfig};
pub use spsa::{spsa_gradient_estimate, spsa_minimize, spsa_minimize_with, SpsaConfig, SpsaStep};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of an optimizer's own history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective value observed in this iteration (for SPSA the mean of the
    /// two perturbed evaluations).
    pub value: f64,
    /// Best raw evaluation seen so far.
    pub best_value: f64,
    pub grad_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIterations,
    RadiusExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    /// Point with the lowest raw objective value seen (the start point if
    /// nothing was evaluated).
    pub x_best: Vec<f64>,
    pub f_best: Option<f64>,
    /// Last iterate.
    pub x_final: Vec<f64>,
    pub evaluations: usize,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
}

/// Objective callback used by every minimizer.
pub type Objective<'a> = dyn FnMut(&[f64]) -> Result<f64> + 'a;

pub trait Minimizer {
    fn minimize(&self, f: &mut Objective<'_>, x0: &[f64]) -> Result<OptimResult>;
}

impl Minimizer for SpsaConfig {
    fn minimize(&self, f: &mut Objective<'_>, x0: &[f64]) -> Result<OptimResult> {
        spsa_minimize(f, x0, self)
    }
}

impl Minimizer for CobylaConfig {
    fn minimize(&self, f: &mut Objective<'_>, x0: &[f64]) -> Result<OptimResult> {
        cobyla_minimize(f, x0, self)
    }
}

/// Tracks evaluation count and the best point for a minimizer.
struct Tracker<'f, 'a> {
    f: &'f mut Objective<'a>,
    evaluations: usize,
    x_best: Vec<f64>,
    f_best: Option<f64>,
}

impl<'f, 'a> Tracker<'f, 'a> {
    fn new(f: &'f mut Objective<'a>, x0: &[f64]) -> Self {
        Self {
            f,
            evaluations: 0,
            x_best: x0.to_vec(),
            f_best: None,
        }
    }

    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let value = (self.f)(x)?;
        self.evaluations += 1;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective {
                value,
                evaluation: self.evaluations,
            });
        }
        if self.f_best.is_none_or(|b| value < b) {
            self.f_best = Some(value);
            self.x_best = x.to_vec();
        }
        Ok(value)
    }

    fn best_value(&self) -> f64 {
        self.f_best.unwrap_or(f64::INFINITY)
    }
}
