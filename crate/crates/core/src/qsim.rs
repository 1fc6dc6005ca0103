//! Dense statevector simulator for the seven-gate set the pipeline uses.
//!
//! Qubit `q` is bit `q` of the basis-state index (qubit 0 is the least
//! significant bit). Bitstrings are printed most-significant qubit first.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

/// Largest register the dense representation accepts.
pub const MAX_QUBITS: usize = 20;

const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_width(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 {
        return Err(Error::InvalidArgument("a register needs at least one qubit".into()));
    }
    if num_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            requested: num_qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        check_width(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps an amplitude vector whose length is a power of two and whose
    /// squared norm is 1 within 1e-8.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {dim} is not a power of two >= 2"
            )));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_width(num_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: other.num_qubits,
                context: "inner product register width",
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Tensors `|0…0⟩` on `extra` new high-order qubits onto this state.
    pub fn with_ancillas(&self, extra: usize) -> Result<Self> {
        let num_qubits = self.num_qubits + extra;
        check_width(num_qubits)?;
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.resize(1 << num_qubits, Complex64::new(0.0, 0.0));
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// In-place application of a bound, validated gate.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        let amps = &mut self.amplitudes;
        let dim = amps.len();
        match *gate {
            Gate::Ry { qubit, angle } => {
                let theta = match angle {
                    Angle::Fixed(t) => t,
                    Angle::Slot { .. } => unreachable!("gate must be bound before application"),
                };
                let (s, c) = (theta / 2.0).sin_cos();
                for_each_pair(dim, qubit, |i, j| {
                    let (a, b) = (amps[i], amps[j]);
                    amps[i] = a * c - b * s;
                    amps[j] = a * s + b * c;
                });
            }
            Gate::H(q) => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for_each_pair(dim, q, |i, j| {
                    let (a, b) = (amps[i], amps[j]);
                    amps[i] = (a + b) * r;
                    amps[j] = (a - b) * r;
                });
            }
            Gate::X(q) => for_each_pair(dim, q, |i, j| amps.swap(i, j)),
            Gate::Y(q) => {
                let im = Complex64::new(0.0, 1.0);
                for_each_pair(dim, q, |i, j| {
                    let (a, b) = (amps[i], amps[j]);
                    amps[i] = -im * b;
                    amps[j] = im * a;
                });
            }
            Gate::Z(q) => for_each_pair(dim, q, |_, j| amps[j] = -amps[j]),
            Gate::Cx { control, target } => {
                let cmask = 1usize << control;
                for_each_pair(dim, target, |i, j| {
                    if i & cmask != 0 {
                        amps.swap(i, j);
                    }
                });
            }
            Gate::Cswap { control, a, b } => {
                let (cmask, amask, bmask) = (1usize << control, 1usize << a, 1usize << b);
                for i in 0..dim {
                    if i & cmask != 0 && i & amask != 0 && i & bmask == 0 {
                        amps.swap(i, i ^ amask ^ bmask);
                    }
                }
            }
        }
    }
}

/// Visits every index pair `(i, i | 1<<qubit)` with bit `qubit` of `i` clear.
#[inline]
fn for_each_pair(dim: usize, qubit: usize, mut f: impl FnMut(usize, usize)) {
    let step = 1usize << qubit;
    let mut base = 0;
    while base < dim {
        for i in base..base + step {
            f(i, i + step);
        }
        base += 2 * step;
    }
}

/// A rotation angle, either concrete or a reference into the circuit's
/// parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Slot { index: usize, negated: bool },
}

impl Angle {
    pub fn slot(index: usize) -> Self {
        Angle::Slot {
            index,
            negated: false,
        }
    }

    fn resolve(self, params: &[f64]) -> Result<f64> {
        match self {
            Angle::Fixed(t) => Ok(t),
            Angle::Slot { index, negated } => {
                let v = *params.get(index).ok_or(Error::UnboundParameter(index))?;
                Ok(if negated { -v } else { v })
            }
        }
    }

    fn negate(self) -> Self {
        match self {
            Angle::Fixed(t) => Angle::Fixed(-t),
            Angle::Slot { index, negated } => Angle::Slot {
                index,
                negated: !negated,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Ry,
    H,
    X,
    Y,
    Z,
    Cx,
    Cswap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    /// `[[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`
    Ry { qubit: usize, angle: Angle },
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Cx { control: usize, target: usize },
    Cswap { control: usize, a: usize, b: usize },
}

/// The (at most three) qubits a gate touches, in argument order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateQubits {
    buf: [usize; 3],
    len: usize,
}

impl Deref for GateQubits {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.buf[..self.len]
    }
}

impl Gate {
    pub fn ry(qubit: usize, theta: f64) -> Self {
        Gate::Ry {
            qubit,
            angle: Angle::Fixed(theta),
        }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Ry { .. } => GateKind::Ry,
            Gate::H(_) => GateKind::H,
            Gate::X(_) => GateKind::X,
            Gate::Y(_) => GateKind::Y,
            Gate::Z(_) => GateKind::Z,
            Gate::Cx { .. } => GateKind::Cx,
            Gate::Cswap { .. } => GateKind::Cswap,
        }
    }

    pub fn qubits(&self) -> GateQubits {
        let (buf, len) = match *self {
            Gate::Ry { qubit, .. } => ([qubit, 0, 0], 1),
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => ([q, 0, 0], 1),
            Gate::Cx { control, target } => ([control, target, 0], 2),
            Gate::Cswap { control, a, b } => ([control, a, b], 3),
        };
        GateQubits { buf, len }
    }

    pub fn is_bound(&self) -> bool {
        !matches!(
            self,
            Gate::Ry {
                angle: Angle::Slot { .. },
                ..
            }
        )
    }

    /// Resolves a slot reference against `params`; other gates pass through.
    pub fn bind(&self, params: &[f64]) -> Result<Gate> {
        Ok(match *self {
            Gate::Ry { qubit, angle } => Gate::ry(qubit, angle.resolve(params)?),
            g => g,
        })
    }

    /// Every gate in the set except RY is its own inverse.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Ry { qubit, angle } => Gate::Ry {
                qubit,
                angle: angle.negate(),
            },
            g => g,
        }
    }

    pub(crate) fn validate(&self, num_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for (k, &q) in qs.iter().enumerate() {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
            if qs[..k].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Ry {
                qubit,
                angle: Angle::Fixed(t),
            } => write!(f, "RY({t:.6}) q{qubit}"),
            Gate::Ry {
                qubit,
                angle: Angle::Slot { index, negated },
            } => write!(f, "RY({}p{index}) q{qubit}", if *negated { "-" } else { "" }),
            Gate::H(q) => write!(f, "H q{q}"),
            Gate::X(q) => write!(f, "X q{q}"),
            Gate::Y(q) => write!(f, "Y q{q}"),
            Gate::Z(q) => write!(f, "Z q{q}"),
            Gate::Cx { control, target } => write!(f, "CX({control},{target})"),
            Gate::Cswap { control, a, b } => write!(f, "CSWAP({control},{a},{b})"),
        }
    }
}

/// Ordered gate list over a fixed register, with named slots for the
/// unbound RY angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    parameter_slots: Vec<String>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        check_width(num_qubits)?;
        Ok(Self {
            num_qubits,
            gates: Vec::new(),
            parameter_slots: Vec::new(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn parameter_slots(&self) -> &[String] {
        &self.parameter_slots
    }

    pub fn num_parameters(&self) -> usize {
        self.parameter_slots.len()
    }

    pub fn add_slot(&mut self, name: impl Into<String>) -> usize {
        self.parameter_slots.push(name.into());
        self.parameter_slots.len() - 1
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.num_qubits)?;
        if let Gate::Ry {
            angle: Angle::Slot { index, .. },
            ..
        } = gate
        {
            if index >= self.parameter_slots.len() {
                return Err(Error::UnboundParameter(index));
            }
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Adds a new parameter slot and an RY gate reading it.
    pub fn ry_slot(&mut self, qubit: usize, name: impl Into<String>) -> Result<usize> {
        Gate::H(qubit).validate(self.num_qubits)?;
        let index = self.add_slot(name);
        self.push(Gate::Ry {
            qubit,
            angle: Angle::slot(index),
        })?;
        Ok(index)
    }

    pub fn ry(&mut self, qubit: usize, theta: f64) -> Result<&mut Self> {
        self.push(Gate::ry(qubit, theta))
    }

    pub fn h(&mut self, qubit: usize) -> Result<&mut Self> {
        self.push(Gate::H(qubit))
    }

    pub fn x(&mut self, qubit: usize) -> Result<&mut Self> {
        self.push(Gate::X(qubit))
    }

    pub fn cx(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.push(Gate::Cx { control, target })
    }

    pub fn cswap(&mut self, control: usize, a: usize, b: usize) -> Result<&mut Self> {
        self.push(Gate::Cswap { control, a, b })
    }

    /// Concrete gate list for a positional parameter vector.
    pub fn bind(&self, params: &[f64]) -> Result<Vec<Gate>> {
        if params.len() != self.parameter_slots.len() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_slots.len(),
                actual: params.len(),
                context: "parameter vector length",
            });
        }
        self.gates.iter().map(|g| g.bind(params)).collect()
    }

    /// The adjoint circuit: gates reversed and RY angles negated. Slots are
    /// shared with `self`.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            parameter_slots: self.parameter_slots.clone(),
        }
    }

    /// Appends `other`, which must declare exactly the same slots, so that
    /// both halves read one parameter vector.
    pub fn extend_shared(&mut self, other: &Circuit) -> Result<()> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: other.num_qubits,
                context: "composed circuit width",
            });
        }
        if other.parameter_slots != self.parameter_slots {
            return Err(Error::InvalidArgument(
                "composed circuits must share the same parameter slots".into(),
            ));
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    /// Same gates and slots on a wider register (existing indices are kept).
    pub fn widened(&self, num_qubits: usize) -> Result<Circuit> {
        check_width(num_qubits)?;
        if num_qubits < self.num_qubits {
            return Err(Error::InvalidArgument(format!(
                "cannot narrow a {}-qubit circuit to {num_qubits} qubits",
                self.num_qubits
            )));
        }
        Ok(Circuit {
            num_qubits,
            ..self.clone()
        })
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.gates.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", body.join(", "))
    }
}

/// Applies one concrete gate and returns the new state.
pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    gate.validate(state.num_qubits)?;
    if let Gate::Ry {
        angle: Angle::Slot { index, .. },
        ..
    } = gate
    {
        return Err(Error::UnboundParameter(*index));
    }
    let mut out = state.clone();
    out.apply_unchecked(gate);
    Ok(out)
}

pub(crate) fn check_register(circuit: &Circuit, initial: &StateVector) -> Result<()> {
    if circuit.num_qubits != initial.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: circuit.num_qubits,
            actual: initial.num_qubits,
            context: "initial state width vs circuit width",
        });
    }
    Ok(())
}

/// Runs `circuit` on `initial` with `params` bound positionally.
pub fn run(circuit: &Circuit, params: &[f64], initial: &StateVector) -> Result<StateVector> {
    check_register(circuit, initial)?;
    let gates = circuit.bind(params)?;
    let mut state = initial.clone();
    for g in &gates {
        state.apply_unchecked(g);
    }
    Ok(state)
}

fn check_subset(qubits: &[usize], num_qubits: usize) -> Result<()> {
    if qubits.is_empty() {
        return Err(Error::Empty("qubit list"));
    }
    for (k, &q) in qubits.iter().enumerate() {
        if q >= num_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                num_qubits,
            });
        }
        if qubits[..k].contains(&q) {
            return Err(Error::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Index of basis state `i` restricted to `qubits` (`qubits[0]` is the
/// low bit of the result).
#[inline]
fn restrict(i: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((i >> q) & 1) << k))
}

/// Outcome distribution of measuring `qubits`; entry `b` has bit `k` equal
/// to the outcome of `qubits[k]`.
pub fn marginal_probabilities(state: &StateVector, qubits: &[usize]) -> Result<Vec<f64>> {
    check_subset(qubits, state.num_qubits)?;
    let mut out = vec![0.0; 1 << qubits.len()];
    for (i, a) in state.amplitudes.iter().enumerate() {
        out[restrict(i, qubits)] += a.norm_sqr();
    }
    Ok(out)
}

/// Normalized cumulative distribution; the last entry is exactly 1.
pub(crate) fn cdf(probs: &[f64]) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc / total
        })
        .collect()
}

#[inline]
pub(crate) fn draw(cdf: &[f64], rng: &mut seed::Rng) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Shot counts over a declared qubit subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementCounts {
    qubits: Vec<usize>,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl MeasurementCounts {
    /// Builds counts from a per-outcome histogram indexed like
    /// [`marginal_probabilities`].
    pub fn from_histogram(qubits: Vec<usize>, histogram: &[u64]) -> Self {
        let width = qubits.len();
        let counts = histogram
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (bitstring(b, width), c))
            .collect();
        Self {
            qubits,
            shots: histogram.iter().sum(),
            counts,
        }
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn count(&self, bits: &str) -> u64 {
        self.counts.get(bits).copied().unwrap_or(0)
    }

    /// Empirical outcome frequencies indexed like [`marginal_probabilities`].
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.qubits.len()];
        for (bits, &c) in &self.counts {
            let b = usize::from_str_radix(bits, 2).expect("bitstrings are generated internally");
            out[b] = c as f64 / self.shots as f64;
        }
        out
    }
}

/// `index` as a `width`-character bitstring, most significant qubit first.
pub fn bitstring(index: usize, width: usize) -> String {
    format!("{index:0width$b}")
}

/// Draws `shots` i.i.d. outcomes of measuring `qubits`.
pub fn sample(
    state: &StateVector,
    qubits: &[usize],
    shots: u64,
    seed: u64,
) -> Result<MeasurementCounts> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let probs = marginal_probabilities(state, qubits)?;
    let cdf = cdf(&probs);
    let mut rng = seed::rng(seed);
    let mut hist = vec![0u64; probs.len()];
    for _ in 0..shots {
        hist[draw(&cdf, &mut rng)] += 1;
    }
    Ok(MeasurementCounts::from_histogram(qubits.to_vec(), &hist))
}
