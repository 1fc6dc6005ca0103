//! Outcome-distribution estimation shared by the autoencoder and the kernel.
//!
//! * `shots == 0`: exact marginal of the noiseless final state.
//! * `shots > 0`, no noise: one simulation, then `shots` i.i.d. samples.
//! * `shots > 0`, noise: one independent trajectory per shot, each measured
//!   once. Shot `s` draws from an RNG seeded with `derive(seed, [s])`.

use crate::error::{Error, Result};
use crate::noise::{DepolarizingModel, NoisyProgram};
use crate::qsim::{self, Circuit, StateVector};
use crate::seed;

pub fn outcome_distribution(
    circuit: &Circuit,
    params: &[f64],
    initial: &StateVector,
    qubits: &[usize],
    shots: u64,
    noise: Option<&DepolarizingModel>,
    seed: u64,
) -> Result<Vec<f64>> {
    match (shots, noise) {
        (0, Some(_)) => Err(Error::AnalyticWithNoise),
        (0, None) => qsim::marginal_probabilities(&qsim::run(circuit, params, initial)?, qubits),
        (_, None) => {
            let state = qsim::run(circuit, params, initial)?;
            Ok(qsim::sample(&state, qubits, shots, seed)?.frequencies())
        }
        (_, Some(model)) => noisy_frequencies(circuit, params, initial, qubits, shots, model, seed),
    }
}

fn noisy_frequencies(
    circuit: &Circuit,
    params: &[f64],
    initial: &StateVector,
    qubits: &[usize],
    shots: u64,
    model: &DepolarizingModel,
    seed: u64,
) -> Result<Vec<f64>> {
    qsim::check_register(circuit, initial)?;
    let program = NoisyProgram::new(circuit.bind(params)?, model);
    let mut clean = initial.clone();
    for g in program.gates() {
        clean.apply_unchecked(g);
    }
    let clean_cdf = qsim::cdf(&qsim::marginal_probabilities(&clean, qubits)?);

    let mut hist = vec![0u64; clean_cdf.len()];
    for s in 0..shots {
        let mut rng = seed::rng(seed::derive(seed, &[s]));
        let errors = program.draw_errors(&mut rng);
        let outcome = if errors.is_empty() {
            qsim::draw(&clean_cdf, &mut rng)
        } else {
            let mut state = initial.clone();
            program.apply(&mut state, &errors);
            let cdf = qsim::cdf(&qsim::marginal_probabilities(&state, qubits)?);
            qsim::draw(&cdf, &mut rng)
        };
        hist[outcome] += 1;
    }
    Ok(hist.iter().map(|&c| c as f64 / shots as f64).collect())
}
