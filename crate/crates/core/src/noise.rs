//! Depolarizing noise.
//!
//! The sampling path inserts random Pauli errors into statevector
//! trajectories. The density-matrix path applies the same channel exactly and
//! is kept small (at most four qubits); it exists to check the sampler.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{self, Circuit, Gate, StateVector};
use crate::seed;

/// Per-gate Pauli-error model. After every gate, each qubit the gate touches
/// suffers X, Y or Z (uniformly) with probability `p1` for single-qubit
/// gates and `p2` for two- and three-qubit gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingModel {
    p1: f64,
    p2: f64,
}

impl DepolarizingModel {
    pub const DEFAULT_P1: f64 = 0.001;
    pub const DEFAULT_P2: f64 = 0.01;

    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        Ok(Self { p1, p2 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    /// Error probability applied to each qubit `gate` touches.
    pub fn error_probability(&self, gate: &Gate) -> f64 {
        if gate.qubits().len() == 1 {
            self.p1
        } else {
            self.p2
        }
    }
}

impl Default for DepolarizingModel {
    fn default() -> Self {
        Self {
            p1: Self::DEFAULT_P1,
            p2: Self::DEFAULT_P2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn gate(self, qubit: usize) -> Gate {
        match self {
            Pauli::X => Gate::X(qubit),
            Pauli::Y => Gate::Y(qubit),
            Pauli::Z => Gate::Z(qubit),
        }
    }
}

/// A Pauli inserted right after gate `after_gate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliError {
    pub after_gate: usize,
    pub qubit: usize,
    pub pauli: Pauli,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    gate: usize,
    qubit: usize,
    p: f64,
}

/// A bound gate list together with its error slots, one per (gate, touched
/// qubit) pair in execution order.
#[derive(Debug, Clone)]
pub(crate) struct NoisyProgram {
    gates: Vec<Gate>,
    slots: Vec<Slot>,
}

impl NoisyProgram {
    pub(crate) fn new(gates: Vec<Gate>, model: &DepolarizingModel) -> Self {
        let slots = gates
            .iter()
            .enumerate()
            .flat_map(|(gi, g)| {
                let p = model.error_probability(g);
                g.qubits()
                    .to_vec()
                    .into_iter()
                    .map(move |qubit| Slot { gate: gi, qubit, p })
            })
            .filter(|s| s.p > 0.0)
            .collect();
        Self { gates, slots }
    }

    pub(crate) fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Samples which slots fail. Each slot fails independently with its own
    /// probability; the next failure is located by walking the survival
    /// product against one uniform draw, so error-free trajectories cost a
    /// single random number.
    pub(crate) fn draw_errors(&self, rng: &mut seed::Rng) -> Vec<PauliError> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.slots.len() {
            // u in (0, 1]
            let u = 1.0 - rng.random::<f64>();
            let mut survive = 1.0;
            let mut hit = None;
            for (t, slot) in self.slots.iter().enumerate().skip(start) {
                survive *= 1.0 - slot.p;
                if survive < u {
                    hit = Some(t);
                    break;
                }
            }
            let Some(t) = hit else { break };
            let pauli = match rng.random_range(0..3) {
                0 => Pauli::X,
                1 => Pauli::Y,
                _ => Pauli::Z,
            };
            out.push(PauliError {
                after_gate: self.slots[t].gate,
                qubit: self.slots[t].qubit,
                pauli,
            });
            start = t + 1;
        }
        out
    }

    /// Applies the gates to `state`, inserting `errors` (sorted by gate).
    pub(crate) fn apply(&self, state: &mut StateVector, errors: &[PauliError]) {
        let mut pending = errors.iter().peekable();
        for (gi, g) in self.gates.iter().enumerate() {
            state.apply_unchecked(g);
            while let Some(e) = pending.next_if(|e| e.after_gate == gi) {
                state.apply_unchecked(&e.pauli.gate(e.qubit));
            }
        }
    }
}

/// One stochastic trajectory of `circuit` under `model`.
pub fn trajectory_run(
    circuit: &Circuit,
    params: &[f64],
    initial: &StateVector,
    model: &DepolarizingModel,
    seed: u64,
) -> Result<StateVector> {
    qsim::check_register(circuit, initial)?;
    let program = NoisyProgram::new(circuit.bind(params)?, model);
    let mut rng = seed::rng(seed);
    let errors = program.draw_errors(&mut rng);
    let mut state = initial.clone();
    program.apply(&mut state, &errors);
    Ok(state)
}

/// Largest register [`density_evolve`] accepts.
pub const MAX_DENSITY_QUBITS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: DMatrix<Complex64>,
}

const DENSITY_TOL: f64 = 1e-10;

impl DensityMatrix {
    fn check_width(num_qubits: usize) -> Result<()> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument("a register needs at least one qubit".into()));
        }
        if num_qubits > MAX_DENSITY_QUBITS {
            return Err(Error::TooManyQubits {
                requested: num_qubits,
                max: MAX_DENSITY_QUBITS,
            });
        }
        Ok(())
    }

    /// Validates hermiticity, unit trace and positivity.
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        let dim = entries.nrows();
        if dim != entries.ncols() || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "density matrix must be square with power-of-two size, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        Self::check_width(num_qubits)?;
        let rho = Self {
            num_qubits,
            entries,
        };
        if !rho.is_hermitian(DENSITY_TOL) {
            return Err(Error::InvalidArgument("density matrix is not Hermitian".into()));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("density matrix trace {tr} != 1")));
        }
        if rho.min_eigenvalue() < -1e-9 {
            return Err(Error::InvalidArgument("density matrix is not positive".into()));
        }
        Ok(rho)
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        Self::check_width(state.num_qubits())?;
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Ok(Self {
            num_qubits: state.num_qubits(),
            entries: &v * v.adjoint(),
        })
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        Self::check_width(num_qubits)?;
        let dim = 1 << num_qubits;
        Ok(Self {
            num_qubits,
            entries: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// Computational-basis outcome probabilities.
    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let a = &self.entries;
        (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= tol))
    }

    /// Smallest eigenvalue, via the real symmetric embedding
    /// `[[Re, -Im], [Im, Re]]` (whose spectrum is that of ρ, doubled).
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.entries.nrows();
        let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[(i, j)];
                real[(i, j)] = z.re;
                real[(i + n, j + n)] = z.re;
                real[(i, j + n)] = -z.im;
                real[(i + n, j)] = z.im;
            }
        }
        real.symmetric_eigenvalues().min()
    }

    fn conjugate_by(&mut self, u: &DMatrix<Complex64>) {
        self.entries = u * &self.entries * u.adjoint();
    }

    /// `ρ → (1−p)ρ + (p/3)(XρX + YρY + ZρZ)` on `qubit`.
    pub fn depolarize(&mut self, qubit: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let mut acc = &self.entries * Complex64::new(1.0 - p, 0.0);
        for pauli in [Pauli::X, Pauli::Y, Pauli::Z] {
            let u = gate_matrix(&pauli.gate(qubit), self.num_qubits);
            acc += (&u * &self.entries * u.adjoint()) * Complex64::new(p / 3.0, 0.0);
        }
        self.entries = acc;
    }
}

/// Full `2^n × 2^n` unitary of a bound gate, column `k` being the image of
/// basis state `k`.
pub(crate) fn gate_matrix(gate: &Gate, num_qubits: usize) -> DMatrix<Complex64> {
    let dim = 1 << num_qubits;
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let mut col = StateVector::basis(num_qubits, k).expect("index is in range");
        col.apply_unchecked(gate);
        for (i, a) in col.amplitudes().iter().enumerate() {
            m[(i, k)] = *a;
        }
    }
    m
}

/// Exact evolution of `initial` under the circuit with the per-gate
/// depolarizing channel.
pub fn density_evolve(
    circuit: &Circuit,
    params: &[f64],
    initial: &DensityMatrix,
    model: &DepolarizingModel,
) -> Result<DensityMatrix> {
    DensityMatrix::check_width(circuit.num_qubits())?;
    if circuit.num_qubits() != initial.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: circuit.num_qubits(),
            actual: initial.num_qubits,
            context: "initial density matrix width vs circuit width",
        });
    }
    let mut rho = initial.clone();
    for gate in circuit.bind(params)? {
        rho.conjugate_by(&gate_matrix(&gate, rho.num_qubits));
        let p = model.error_probability(&gate);
        for &q in gate.qubits().iter() {
            rho.depolarize(q, p);
        }
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::tests::{random_gate, random_state};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn identity_circuit() -> Circuit {
        let mut c = Circuit::new(1).unwrap();
        c.ry(0, 0.0).unwrap();
        c
    }

    #[test]
    fn model_validation() {
        assert!(DepolarizingModel::new(-0.1, 0.0).is_err());
        assert!(DepolarizingModel::new(0.0, 1.5).is_err());
        let m = DepolarizingModel::default();
        assert_eq!((m.p1(), m.p2()), (0.001, 0.01));
        assert_eq!(m.error_probability(&Gate::H(0)), 0.001);
        assert_eq!(m.error_probability(&Gate::Cx { control: 0, target: 1 }), 0.01);
    }

    #[test]
    fn zero_noise_trajectory_is_noiseless_run() {
        let mut rng = seed::rng(3);
        let model = DepolarizingModel::new(0.0, 0.0).unwrap();
        for k in 0..20 {
            let mut c = Circuit::new(3).unwrap();
            for _ in 0..15 {
                c.push(random_gate(&mut rng, 3)).unwrap();
            }
            let init = random_state(&mut rng, 3);
            let clean = qsim::run(&c, &[], &init).unwrap();
            let noisy = trajectory_run(&c, &[], &init, &model, k).unwrap();
            assert_eq!(clean, noisy);
        }
    }

    #[test]
    fn identity_gate_flip_rate() {
        let model = DepolarizingModel::new(0.09, 0.0).unwrap();
        let c = identity_circuit();
        let zero = StateVector::zero(1).unwrap();
        let n = 100_000u64;
        let flips: f64 = (0..n)
            .map(|k| {
                trajectory_run(&c, &[], &zero, &model, seed::derive(17, &[k]))
                    .unwrap()
                    .probabilities()[1]
            })
            .sum();
        let rate = flips / n as f64;
        assert!((rate - 0.06).abs() < 0.003, "rate {rate}");
    }

    #[test]
    fn trajectories_are_seed_deterministic() {
        let mut rng = seed::rng(8);
        let mut c = Circuit::new(3).unwrap();
        for _ in 0..20 {
            c.push(random_gate(&mut rng, 3)).unwrap();
        }
        let model = DepolarizingModel::new(0.2, 0.3).unwrap();
        let init = StateVector::zero(3).unwrap();
        assert_eq!(
            trajectory_run(&c, &[], &init, &model, 99).unwrap(),
            trajectory_run(&c, &[], &init, &model, 99).unwrap()
        );
    }

    #[test]
    fn error_slots_fire_at_certainty() {
        let program = NoisyProgram::new(
            vec![Gate::H(0), Gate::Cx { control: 0, target: 1 }],
            &DepolarizingModel::new(1.0, 1.0).unwrap(),
        );
        let errors = program.draw_errors(&mut seed::rng(1));
        let at: Vec<(usize, usize)> = errors.iter().map(|e| (e.after_gate, e.qubit)).collect();
        assert_eq!(at, vec![(0, 0), (1, 0), (1, 1)]);
    }

    #[test]
    fn density_examples() {
        let mut bell = Circuit::new(2).unwrap();
        bell.h(0).unwrap().cx(0, 1).unwrap();
        let none = DepolarizingModel::new(0.0, 0.0).unwrap();
        let rho = density_evolve(
            &bell,
            &[],
            &DensityMatrix::from_pure(&StateVector::zero(2).unwrap()).unwrap(),
            &none,
        )
        .unwrap();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_abs_diff_eq!(rho.entries()[(i, j)].re, 0.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rho.entries()[(1, 1)].re, 0.0, epsilon = 1e-12);

        let model = DepolarizingModel::new(0.09, 0.0).unwrap();
        let rho = density_evolve(
            &identity_circuit(),
            &[],
            &DensityMatrix::from_pure(&StateVector::zero(1).unwrap()).unwrap(),
            &model,
        )
        .unwrap();
        let d = rho.diagonal();
        assert_abs_diff_eq!(d[0], 0.94, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 0.06, epsilon = 1e-12);

        let mut rng = seed::rng(4);
        let mut c = Circuit::new(3).unwrap();
        for _ in 0..10 {
            c.push(random_gate(&mut rng, 3)).unwrap();
        }
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        let out = density_evolve(&c, &[], &mixed, &DepolarizingModel::new(0.3, 0.2).unwrap()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((out.entries()[(i, j)] - mixed.entries()[(i, j)]).norm() < 1e-12);
            }
        }

        assert!(matches!(
            density_evolve(
                &Circuit::new(5).unwrap(),
                &[],
                &DensityMatrix::maximally_mixed(4).unwrap(),
                &none
            ),
            Err(Error::TooManyQubits { .. })
        ));
    }

    #[test]
    fn density_stays_physical() {
        let mut rng = seed::rng(21);
        let model = DepolarizingModel::new(0.05, 0.05).unwrap();
        for _ in 0..10 {
            let mut c = Circuit::new(3).unwrap();
            for _ in 0..12 {
                c.push(random_gate(&mut rng, 3)).unwrap();
            }
            let init = DensityMatrix::from_pure(&random_state(&mut rng, 3)).unwrap();
            let out = density_evolve(&c, &[], &init, &model).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-10);
            assert!(out.is_hermitian(1e-10));
            assert!(out.min_eigenvalue() > -1e-9);
        }
    }

    /// Textbook single-qubit depolarizing channel `(1−λ)ρ + λ I/2`.
    fn textbook(rho: &DMatrix<Complex64>, lambda: f64) -> DMatrix<Complex64> {
        let tr = rho[(0, 0)] + rho[(1, 1)];
        rho * Complex64::new(1.0 - lambda, 0.0)
            + DMatrix::identity(2, 2) * (tr * Complex64::new(lambda / 2.0, 0.0))
    }

    #[test]
    fn pauli_form_equals_textbook_channel() {
        let mut rng = seed::rng(12);
        for _ in 0..50 {
            // random mixture of two pure states
            let a = DensityMatrix::from_pure(&random_state(&mut rng, 1)).unwrap();
            let b = DensityMatrix::from_pure(&random_state(&mut rng, 1)).unwrap();
            let w: f64 = rng.random();
            let rho = DensityMatrix::from_matrix(
                a.entries() * Complex64::new(w, 0.0) + b.entries() * Complex64::new(1.0 - w, 0.0),
            )
            .unwrap();
            let p: f64 = rng.random_range(0.0..0.75);
            let mut pauli = rho.clone();
            pauli.depolarize(0, p);
            let expected = textbook(rho.entries(), 4.0 * p / 3.0);
            for (x, y) in pauli.entries().iter().zip(expected.iter()) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn repeated_noise_mixes_monotonically() {
        let model = DepolarizingModel::new(0.05, 0.0).unwrap();
        let mut rho = DensityMatrix::from_pure(&StateVector::zero(1).unwrap()).unwrap();
        let mut last = 0.0;
        for _ in 0..50 {
            rho = density_evolve(&identity_circuit(), &[], &rho, &model).unwrap();
            let p1 = rho.diagonal()[1];
            assert!(p1 >= last - 1e-15);
            last = p1;
        }
        assert!(last < 0.5);
    }

    #[test]
    fn from_matrix_rejects_unphysical() {
        let bad = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.2, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-0.2, 0.0),
            ],
        );
        assert!(DensityMatrix::from_matrix(bad).is_err());
        let plus = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let rho = DensityMatrix::from_pure(&plus).unwrap();
        assert!(DensityMatrix::from_matrix(rho.entries().clone()).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn channel_identity_and_mixing(seed in proptest::prelude::any::<u64>(), p in 0.0f64..0.75, k in 1usize..12) {
            let mut rng = seed::rng(seed);
            let rho = DensityMatrix::from_pure(&random_state(&mut rng, 1)).unwrap();
            let mut pauli = rho.clone();
            pauli.depolarize(0, p);
            let expected = textbook(rho.entries(), 4.0 * p / 3.0);
            for (x, y) in pauli.entries().iter().zip(expected.iter()) {
                proptest::prop_assert!((x - y).norm() < 1e-10);
            }
            let model = DepolarizingModel::new(p, 0.0).unwrap();
            let mut state = DensityMatrix::from_pure(&StateVector::zero(1).unwrap()).unwrap();
            let mut last = 0.0;
            for _ in 0..k {
                state = density_evolve(&identity_circuit(), &[], &state, &model).unwrap();
                let p1 = state.diagonal()[1];
                proptest::prop_assert!(p1 >= last - 1e-15);
                last = p1;
            }
        }
    }
}
