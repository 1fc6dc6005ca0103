//! Simultaneous perturbation stochastic approximation.
//!
//! Each iteration draws a Rademacher direction `Δ`, evaluates the objective
//! at `x ± c_k Δ` and steps along the two-point gradient estimate
//! `(f⁺ − f⁻)/(2 c_k) · Δ` with gain `a_k`:
//!
//! ```text
//! a_k = a / (k + 1 + A)^alpha_exp      c_k = c / (k + 1)^gamma_exp
//! ```

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{IterationRecord, Objective, OptimResult, StopReason, Tracker};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub max_iters: usize,
    pub a: f64,
    pub c: f64,
    /// Stability constant `A`.
    pub stability: f64,
    pub alpha_exp: f64,
    pub gamma_exp: f64,
    pub seed: u64,
}

impl SpsaConfig {
    /// Standard gain schedule: a = 0.2, c = 0.1, A = max_iters / 10,
    /// alpha = 0.602, gamma = 0.101.
    pub fn new(max_iters: usize, seed: u64) -> Self {
        Self {
            max_iters,
            a: 0.2,
            c: 0.1,
            stability: max_iters as f64 / 10.0,
            alpha_exp: 0.602,
            gamma_exp: 0.101,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.c > 0.0) {
            return Err(Error::InvalidArgument("SPSA gains a and c must be positive".into()));
        }
        if !(self.stability >= 0.0) {
            return Err(Error::InvalidArgument("SPSA stability constant must be >= 0".into()));
        }
        for (name, e) in [("alpha_exp", self.alpha_exp), ("gamma_exp", self.gamma_exp)] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidArgument(format!("SPSA {name} = {e} not in (0, 1]")));
            }
        }
        Ok(())
    }

    /// Step size `a_k`.
    pub fn gain(&self, k: usize) -> f64 {
        self.a / (k as f64 + 1.0 + self.stability).powf(self.alpha_exp)
    }

    /// Perturbation magnitude `c_k`.
    pub fn perturbation(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma_exp)
    }
}

/// Two-point simultaneous-perturbation gradient estimate.
pub fn spsa_gradient_estimate(
    f: &mut Objective<'_>,
    x: &[f64],
    ck: f64,
    delta: &[f64],
) -> Result<Vec<f64>> {
    let (plus, minus) = perturbed_values(f, x, ck, delta)?;
    Ok(estimate_from(plus, minus, ck, delta))
}

fn check_direction(x: &[f64], ck: f64, delta: &[f64]) -> Result<()> {
    if !(ck > 0.0) {
        return Err(Error::InvalidArgument(format!("perturbation c_k = {ck} must be positive")));
    }
    if delta.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: delta.len(),
            context: "perturbation direction length",
        });
    }
    if delta.iter().any(|&d| d != 1.0 && d != -1.0) {
        return Err(Error::InvalidArgument("perturbation entries must be +1 or -1".into()));
    }
    Ok(())
}

fn shifted(x: &[f64], ck: f64, delta: &[f64], sign: f64) -> Vec<f64> {
    x.iter().zip(delta).map(|(xi, di)| xi + sign * ck * di).collect()
}

fn perturbed_values(
    f: &mut Objective<'_>,
    x: &[f64],
    ck: f64,
    delta: &[f64],
) -> Result<(f64, f64)> {
    check_direction(x, ck, delta)?;
    let plus = f(&shifted(x, ck, delta, 1.0))?;
    let minus = f(&shifted(x, ck, delta, -1.0))?;
    Ok((plus, minus))
}

fn estimate_from(plus: f64, minus: f64, ck: f64, delta: &[f64]) -> Vec<f64> {
    let scale = (plus - minus) / (2.0 * ck);
    delta.iter().map(|d| scale * d).collect()
}

/// What one finished iteration looked like, handed to the observer of
/// [`spsa_minimize_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpsaStep<'a> {
    pub iteration: usize,
    /// Iterate after the update.
    pub x: &'a [f64],
    pub f_plus: f64,
    pub f_minus: f64,
    pub grad_norm: f64,
    pub best_value: f64,
}

pub fn spsa_minimize(f: &mut Objective<'_>, x0: &[f64], config: &SpsaConfig) -> Result<OptimResult> {
    spsa_minimize_with(f, x0, config, |_| Ok(()))
}

/// As [`spsa_minimize`], calling `observe` after every iteration. The
/// observer does not count towards the two evaluations per iteration.
pub fn spsa_minimize_with(
    f: &mut Objective<'_>,
    x0: &[f64],
    config: &SpsaConfig,
    mut observe: impl FnMut(&SpsaStep<'_>) -> Result<()>,
) -> Result<OptimResult> {
    config.validate()?;
    if x0.is_empty() {
        return Err(Error::Empty("initial point"));
    }
    let mut rng = seed::rng(config.seed);
    let mut tracker = Tracker::new(f, x0);
    let mut x = x0.to_vec();
    let mut history = Vec::with_capacity(config.max_iters);

    for k in 0..config.max_iters {
        let ck = config.perturbation(k);
        let delta: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let plus = tracker.eval(&shifted(&x, ck, &delta, 1.0))?;
        let minus = tracker.eval(&shifted(&x, ck, &delta, -1.0))?;
        let grad = estimate_from(plus, minus, ck, &delta);
        let ak = config.gain(k);
        x.iter_mut().zip(&grad).for_each(|(xi, gi)| *xi -= ak * gi);

        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        history.push(IterationRecord {
            iteration: k,
            value: 0.5 * (plus + minus),
            best_value: tracker.best_value(),
            grad_norm: Some(grad_norm),
        });
        observe(&SpsaStep {
            iteration: k,
            x: &x,
            f_plus: plus,
            f_minus: minus,
            grad_norm,
            best_value: tracker.best_value(),
        })?;
    }

    Ok(OptimResult {
        x_best: tracker.x_best,
        f_best: tracker.f_best,
        x_final: x,
        evaluations: tracker.evaluations,
        history,
        stop: StopReason::MaxIterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square(x: &[f64]) -> Result<f64> {
        Ok(x.iter().map(|v| v * v).sum())
    }

    #[test]
    fn quadratic_estimate_is_exact() {
        // (1.21 - 0.81) / 0.2 = 2
        let g = spsa_gradient_estimate(&mut square, &[1.0], 0.1, &[1.0]).unwrap();
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-12);
        let g = spsa_gradient_estimate(&mut square, &[1.0], 0.1, &[-1.0]).unwrap();
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-12);
        let g = spsa_gradient_estimate(&mut |_: &[f64]| Ok(3.0), &[1.0, 2.0], 0.1, &[1.0, -1.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn estimate_rejects_bad_direction() {
        assert!(spsa_gradient_estimate(&mut square, &[1.0], 0.1, &[0.5]).is_err());
        assert!(spsa_gradient_estimate(&mut square, &[1.0], 0.0, &[1.0]).is_err());
        assert!(spsa_gradient_estimate(&mut square, &[1.0, 1.0], 0.1, &[1.0]).is_err());
    }

    #[test]
    fn gain_sequences_decrease() {
        let cfg = SpsaConfig::new(100, 0);
        for k in 0..99 {
            assert!(cfg.gain(k + 1) < cfg.gain(k));
            assert!(cfg.perturbation(k + 1) < cfg.perturbation(k));
            assert!(cfg.gain(k) > 0.0);
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let res = spsa_minimize(&mut square, &[1.0, 1.0], &SpsaConfig::new(200, 3)).unwrap();
        let best = square(&res.x_best).unwrap();
        assert!(best < 0.01, "best {best}");
        assert_eq!(res.evaluations, 400);
    }

    #[test]
    fn zero_iterations_return_start() {
        let res = spsa_minimize(&mut square, &[0.3, -0.2], &SpsaConfig::new(0, 3)).unwrap();
        assert_eq!(res.x_best, vec![0.3, -0.2]);
        assert_eq!(res.evaluations, 0);
        assert!(res.f_best.is_none());
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = spsa_minimize(&mut square, &[1.0, -2.0, 0.5], &SpsaConfig::new(50, 9)).unwrap();
        let b = spsa_minimize(&mut square, &[1.0, -2.0, 0.5], &SpsaConfig::new(50, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let err = spsa_minimize(&mut |_: &[f64]| Ok(f64::NAN), &[1.0], &SpsaConfig::new(5, 0));
        assert!(matches!(err, Err(Error::NonFiniteObjective { evaluation: 1, .. })));
    }

    #[test]
    fn best_value_is_monotone() {
        let mut noisy = {
            let mut rng = seed::rng(4);
            move |x: &[f64]| -> Result<f64> { Ok(square(x)? + 0.05 * rng.random::<f64>()) }
        };
        let res = spsa_minimize(&mut noisy, &[2.0, -1.0], &SpsaConfig::new(100, 1)).unwrap();
        for w in res.history.windows(2) {
            assert!(w[1].best_value <= w[0].best_value);
        }
    }

    #[test]
    fn averaged_estimate_is_unbiased_on_quadratics() {
        let mut rng = seed::rng(17);
        for _ in 0..3 {
            let q: Vec<Vec<f64>> = (0..4)
                .map(|i| (0..4).map(|j| if i == j { 2.0 } else { 0.0 } + rng.random_range(-0.3..0.3)).collect())
                .collect();
            let q: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| (q[i][j] + q[j][i]) / 2.0).collect()).collect();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let truth: Vec<f64> = (0..4).map(|i| 2.0 * (0..4).map(|j| q[i][j] * x[j]).sum::<f64>()).collect();
            let mut f = |v: &[f64]| -> Result<f64> {
                Ok((0..4).map(|i| (0..4).map(|j| v[i] * q[i][j] * v[j]).sum::<f64>()).sum())
            };
            let mut mean = [0.0; 4];
            for _ in 0..2000 {
                let delta: Vec<f64> = (0..4).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
                for (m, g) in mean.iter_mut().zip(spsa_gradient_estimate(&mut f, &x, 0.1, &delta).unwrap()) {
                    *m += g / 2000.0;
                }
            }
            let err: f64 = mean.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / norm < 0.05, "relative error {}", err / norm);
        }
    }

    proptest::proptest! {
        #[test]
        fn two_evaluations_per_iteration(seed in proptest::prelude::any::<u64>(), iters in 0usize..40, dim in 1usize..5) {
            let mut calls = 0usize;
            let mut f = |x: &[f64]| { calls += 1; square(x) };
            let res = spsa_minimize(&mut f, &vec![0.7; dim], &SpsaConfig::new(iters, seed)).unwrap();
            proptest::prop_assert_eq!(calls, 2 * iters);
            proptest::prop_assert_eq!(res.evaluations, 2 * iters);
            for w in res.history.windows(2) {
                proptest::prop_assert!(w[1].best_value <= w[0].best_value);
            }
        }
    }
}
