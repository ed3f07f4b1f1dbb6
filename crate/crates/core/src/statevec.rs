//! Dense state-vector simulation.
//!
//! Qubit 0 is the most significant bit of the basis index, so for an
//! `n`-qubit register the index `j = j_0 2^{n-1} + ... + j_{n-1} 2^0`.
//! Gates are applied in place with stride-based pair updates; the full
//! `2^n x 2^n` operator is never built.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub type Amplitude = Complex64;

const NORM_TOL: f64 = 1e-10;
const ZERO_BRANCH: f64 = 1e-14;

#[inline]
fn bit(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// Bijection on the basis states of a register.
#[derive(Debug, Clone, PartialEq)]
pub struct Permutation {
    table: Arc<Vec<usize>>,
}

impl Permutation {
    /// `table[i]` is the image of basis state `i`.
    pub fn new(table: Vec<usize>) -> Result<Self> {
        let len = table.len();
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let mut seen = vec![false; len];
        for &t in &table {
            if t >= len || seen[t] {
                return Err(Error::InvalidPermutation(len));
            }
            seen[t] = true;
        }
        Ok(Self { table: Arc::new(table) })
    }

    pub fn identity(len: usize) -> Result<Self> {
        Self::new((0..len).collect())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn image(&self, i: usize) -> usize {
        self.table[i]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &t) in self.table.iter().enumerate() {
            inv[t] = i;
        }
        Self { table: Arc::new(inv) }
    }

    /// Number of qubits the permutation acts on.
    pub fn n_qubits(&self) -> usize {
        self.len().trailing_zeros() as usize
    }
}

/// Elementary gates. Qubit indices are zero-based, qubit 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Hadamard { target: usize },
    /// diag(1, e^{±2πi/2^k}) on the target when the control is set.
    /// `dagger` selects the conjugate phase used by the inverse QFT.
    ControlledPhase { control: usize, target: usize, k: u32, dagger: bool },
    Swap { a: usize, b: usize },
    PauliX { target: usize },
    ControlledNot { control: usize, target: usize },
    Ry { target: usize, theta: f64 },
    ControlledRy { control: usize, target: usize, theta: f64 },
    /// Basis permutation on `qubits` (listed most significant first):
    /// |i> -> |map(i)>.
    IndexMap { qubits: Vec<usize>, map: Permutation },
}

impl Gate {
    pub fn h(target: usize) -> Self {
        Gate::Hadamard { target }
    }

    pub fn cphase(control: usize, target: usize, k: u32) -> Self {
        Gate::ControlledPhase { control, target, k, dagger: false }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::ControlledNot { control, target }
    }

    pub fn ry(target: usize, theta: f64) -> Self {
        Gate::Ry { target, theta }
    }

    /// Qubits touched by the gate, in the order used by [`Gate::local_matrix`].
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Hadamard { target } | Gate::PauliX { target } | Gate::Ry { target, .. } => {
                vec![*target]
            }
            Gate::ControlledPhase { control, target, .. }
            | Gate::ControlledNot { control, target }
            | Gate::ControlledRy { control, target, .. } => vec![*control, *target],
            Gate::Swap { a, b } => vec![*a, *b],
            Gate::IndexMap { qubits, .. } => qubits.clone(),
        }
    }

    /// Checks indices against an `n_qubits` register.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        for (i, &q) in qubits.iter().enumerate() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        match self {
            Gate::ControlledPhase { k, .. } if *k == 0 => Err(Error::InvalidPhaseOrder(0)),
            Gate::Ry { theta, .. } | Gate::ControlledRy { theta, .. } if !theta.is_finite() => {
                Err(Error::NonFinite("rotation angle"))
            }
            Gate::IndexMap { qubits, map } if map.len() != 1 << qubits.len() => {
                Err(Error::Shape(format!(
                    "index map over {} states applied to {} qubits",
                    map.len(),
                    qubits.len()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Adjoint gate.
    pub fn dagger(&self) -> Self {
        match self {
            Gate::ControlledPhase { control, target, k, dagger } => Gate::ControlledPhase {
                control: *control,
                target: *target,
                k: *k,
                dagger: !dagger,
            },
            Gate::Ry { target, theta } => Gate::Ry { target: *target, theta: -theta },
            Gate::ControlledRy { control, target, theta } => Gate::ControlledRy {
                control: *control,
                target: *target,
                theta: -theta,
            },
            Gate::IndexMap { qubits, map } => Gate::IndexMap {
                qubits: qubits.clone(),
                map: map.inverse(),
            },
            other => other.clone(),
        }
    }

    /// Explicit unitary on the gate's own qubits (see [`Gate::qubits`]).
    pub fn local_matrix(&self) -> DMatrix<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Gate::Hadamard { .. } => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                DMatrix::from_row_slice(2, 2, &[s, s, s, -s])
            }
            Gate::PauliX { .. } => DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]),
            Gate::Ry { theta, .. } => ry_matrix(*theta),
            Gate::ControlledPhase { k, dagger, .. } => {
                let mut m = DMatrix::identity(4, 4);
                m[(3, 3)] = phase_factor(*k, *dagger);
                m
            }
            Gate::ControlledNot { .. } => {
                let mut m = DMatrix::identity(4, 4);
                m[(2, 2)] = zero;
                m[(3, 3)] = zero;
                m[(2, 3)] = one;
                m[(3, 2)] = one;
                m
            }
            Gate::ControlledRy { theta, .. } => {
                let mut m = DMatrix::identity(4, 4);
                let r = ry_matrix(*theta);
                m.view_mut((2, 2), (2, 2)).copy_from(&r);
                m
            }
            Gate::Swap { .. } => {
                let mut m = DMatrix::identity(4, 4);
                m[(1, 1)] = zero;
                m[(2, 2)] = zero;
                m[(1, 2)] = one;
                m[(2, 1)] = one;
                m
            }
            Gate::IndexMap { map, .. } => {
                let d = map.len();
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    m[(map.image(i), i)] = one;
                }
                m
            }
        }
    }
}

fn ry_matrix(theta: f64) -> DMatrix<Complex64> {
    let (s, c) = (theta / 2.0).sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
    )
}

/// e^{±2πi/2^k}
pub fn phase_factor(k: u32, dagger: bool) -> Complex64 {
    let angle = 2.0 * PI / 2f64.powi(k as i32);
    Complex64::from_polar(1.0, if dagger { -angle } else { angle })
}

/// Ordered gate list on a fixed register.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits)?;
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Reversed circuit of adjoint gates.
    pub fn inverse(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::dagger).collect(),
        }
    }
}

/// `2^n` complex amplitudes over `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// |0...0>
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0).expect("index 0 always valid")
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let len = 1usize << n_qubits;
        if index >= len {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); len];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Equal superposition over all basis states.
    pub fn uniform(n_qubits: usize) -> Self {
        let len = 1usize << n_qubits;
        let a = Complex64::new(1.0 / (len as f64).sqrt(), 0.0);
        Self { n_qubits, amps: vec![a; len] }
    }

    /// Wraps amplitudes that must already be normalised.
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("amplitudes"));
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self { n_qubits: len.trailing_zeros() as usize, amps })
    }

    /// Normalises arbitrary nonzero amplitudes, returning the state and the
    /// original norm.
    pub fn normalized(mut amps: Vec<Amplitude>) -> Result<(Self, f64)> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("amplitudes"));
        }
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok((Self { n_qubits: len.trailing_zeros() as usize, amps }, norm))
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Amplitude> {
        self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Applies `gate` in place. Requires exclusive access to the state.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let n = self.n_qubits;
        match gate {
            Gate::Hadamard { target } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                self.pair_update(*target, |a, b| ((a + b) * s, (a - b) * s));
            }
            Gate::PauliX { target } => self.pair_update(*target, |a, b| (b, a)),
            Gate::Ry { target, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                self.pair_update(*target, |a, b| (a * c - b * s, a * s + b * c));
            }
            Gate::ControlledPhase { control, target, k, dagger } => {
                let phase = phase_factor(*k, *dagger);
                let m = bit(n, *control) | bit(n, *target);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m == m {
                        *a *= phase;
                    }
                }
            }
            Gate::ControlledNot { control, target } => {
                let (mc, mt) = (bit(n, *control), bit(n, *target));
                for i in 0..self.amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        self.amps.swap(i, i | mt);
                    }
                }
            }
            Gate::ControlledRy { control, target, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let (mc, mt) = (bit(n, *control), bit(n, *target));
                for i in 0..self.amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | mt]);
                        self.amps[i] = a * c - b * s;
                        self.amps[i | mt] = a * s + b * c;
                    }
                }
            }
            Gate::Swap { a, b } => {
                let (ma, mb) = (bit(n, *a), bit(n, *b));
                for i in 0..self.amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        self.amps.swap(i, i ^ ma ^ mb);
                    }
                }
            }
            Gate::IndexMap { qubits, map } => self.permute(qubits, map),
        }
        Ok(())
    }

    pub fn apply_circuit_in_place(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits,
                found: circuit.n_qubits(),
            });
        }
        circuit.gates().iter().try_for_each(|g| self.apply(g))
    }

    fn pair_update<F>(&mut self, target: usize, f: F)
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let stride = bit(self.n_qubits, target);
        for block in (0..self.amps.len()).step_by(2 * stride) {
            let (lo, hi) = self.amps[block..block + 2 * stride].split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = f(*a, *b);
                *a = x;
                *b = y;
            }
        }
    }

    fn permute(&mut self, qubits: &[usize], map: &Permutation) {
        let n = self.n_qubits;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        let whole = qubits.len() == n && qubits.iter().enumerate().all(|(i, &q)| i == q);
        if whole {
            for (i, &a) in self.amps.iter().enumerate() {
                out[map.image(i)] = a;
            }
        } else {
            let masks: Vec<usize> = qubits.iter().map(|&q| bit(n, q)).collect();
            let reg_mask: usize = masks.iter().fold(0, |acc, m| acc | m);
            let k = masks.len();
            for (i, &a) in self.amps.iter().enumerate() {
                let mut local = 0;
                for (pos, m) in masks.iter().enumerate() {
                    if i & m != 0 {
                        local |= 1 << (k - 1 - pos);
                    }
                }
                let image = map.image(local);
                let mut j = i & !reg_mask;
                for (pos, m) in masks.iter().enumerate() {
                    if image & (1 << (k - 1 - pos)) != 0 {
                        j |= m;
                    }
                }
                out[j] = a;
            }
        }
        self.amps = out;
    }
}

/// Returns `U|psi>` for a single gate.
pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

/// Applies the gates of `circuit` left to right.
pub fn apply_circuit(state: &StateVector, circuit: &Circuit) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_circuit_in_place(circuit)?;
    Ok(out)
}

/// `a ⊗ b`, with `a` occupying the most significant qubits.
pub fn tensor_product(a: &StateVector, b: &StateVector) -> StateVector {
    let mut amps = Vec::with_capacity(a.len() * b.len());
    for x in &a.amps {
        amps.extend(b.amps.iter().map(|y| x * y));
    }
    StateVector { n_qubits: a.n_qubits + b.n_qubits, amps }
}

fn check_subset(n_qubits: usize, qubits: &[usize]) -> Result<()> {
    if qubits.is_empty() {
        return Err(Error::InvalidArgument("empty qubit subset".into()));
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Splits a basis index into (index over `qubits`, index over the rest).
fn split_index(n: usize, qubits: &[usize], rest: &[usize], i: usize) -> (usize, usize) {
    let gather = |set: &[usize]| {
        set.iter()
            .fold(0, |acc, &q| (acc << 1) | usize::from(i & bit(n, q) != 0))
    };
    (gather(qubits), gather(rest))
}

fn complement(n: usize, qubits: &[usize]) -> Vec<usize> {
    (0..n).filter(|q| !qubits.contains(q)).collect()
}

/// True iff the state factorises across `subsystem | rest`, i.e. the
/// reshaped amplitude matrix has a single singular value above 1e-8.
pub fn is_product_state(state: &StateVector, subsystem: &[usize]) -> Result<bool> {
    let n = state.n_qubits;
    check_subset(n, subsystem)?;
    if subsystem.len() == n {
        return Err(Error::InvalidArgument("bipartition must be nontrivial".into()));
    }
    let rest = complement(n, subsystem);
    let rows = 1 << subsystem.len();
    let cols = 1 << rest.len();
    let mut m = DMatrix::<Complex64>::zeros(rows, cols);
    for (i, &a) in state.amps.iter().enumerate() {
        let (r, c) = split_index(n, subsystem, &rest, i);
        m[(r, c)] = a;
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv.iter().skip(1).all(|&s| s < 1e-8))
}

/// Born probabilities of each outcome on `qubits` (outcome index with the
/// first listed qubit most significant).
pub fn marginal_probabilities(state: &StateVector, qubits: &[usize]) -> Result<Vec<f64>> {
    let n = state.n_qubits;
    check_subset(n, qubits)?;
    let rest = complement(n, qubits);
    let mut probs = vec![0.0; 1 << qubits.len()];
    for (i, a) in state.amps.iter().enumerate() {
        let (r, _) = split_index(n, qubits, &rest, i);
        probs[r] += a.norm_sqr();
    }
    Ok(probs)
}

fn to_bits(value: usize, width: usize) -> Vec<bool> {
    (0..width).map(|p| value & (1 << (width - 1 - p)) != 0).collect()
}

fn from_bits(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

/// Projective measurement of `qubits`. Returns the outcome bits and the
/// renormalised post-measurement state of the whole register.
pub fn measure_register(
    state: &StateVector,
    qubits: &[usize],
    seed: u64,
) -> Result<(Vec<bool>, StateVector)> {
    let probs = marginal_probabilities(state, qubits)?;
    let mut rng = rng::stream(seed, 0);
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut outcome = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            outcome = k;
            break;
        }
    }
    let bits = to_bits(outcome, qubits.len());
    let n = state.n_qubits;
    let rest = complement(n, qubits);
    let norm = probs[outcome].sqrt();
    let amps = state
        .amps
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if split_index(n, qubits, &rest, i).0 == outcome {
                a / norm
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok((bits, StateVector { n_qubits: n, amps }))
}

/// Conditions on `qubits` reading `value`. Returns the renormalised state of
/// the remaining qubits (in ascending order) and the branch probability.
pub fn post_select(
    state: &StateVector,
    qubits: &[usize],
    value: &[bool],
) -> Result<(StateVector, f64)> {
    let n = state.n_qubits;
    check_subset(n, qubits)?;
    if value.len() != qubits.len() {
        return Err(Error::Shape(format!(
            "post-selection value has {} bits for {} qubits",
            value.len(),
            qubits.len()
        )));
    }
    if qubits.len() == n {
        return Err(Error::InvalidArgument(
            "post-selection must leave at least one qubit".into(),
        ));
    }
    let target = from_bits(value);
    let rest = complement(n, qubits);
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << rest.len()];
    for (i, &a) in state.amps.iter().enumerate() {
        let (sel, r) = split_index(n, qubits, &rest, i);
        if sel == target {
            amps[r] = a;
        }
    }
    let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if prob < ZERO_BRANCH {
        return Err(Error::ZeroProbabilityBranch(prob));
    }
    let norm = prob.sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok((StateVector { n_qubits: rest.len(), amps }, prob))
}

/// Post-selection of the trailing `k` qubits onto |0...0>. Equivalent to
/// [`post_select`] but avoids per-index bit gathering.
pub fn post_select_low_zero(state: &StateVector, k: usize) -> Result<(StateVector, f64)> {
    let n = state.n_qubits;
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot post-select {k} of {n} qubits"
        )));
    }
    let mut amps: Vec<Complex64> = state.amps.iter().step_by(1 << k).copied().collect();
    let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if prob < ZERO_BRANCH {
        return Err(Error::ZeroProbabilityBranch(prob));
    }
    let norm = prob.sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok((StateVector { n_qubits: n - k, amps }, prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(&StateVector::zero(1), &Gate::h(0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.amplitude(0).re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(1).re, r, epsilon = 1e-15);
    }

    #[test]
    fn pauli_x_flips() {
        let s = apply_gate(&StateVector::zero(1), &Gate::PauliX { target: 0 }).unwrap();
        assert_eq!(s, StateVector::basis(1, 1).unwrap());
    }

    #[test]
    fn controlled_phase_k2_on_11() {
        let s = apply_gate(&StateVector::basis(2, 3).unwrap(), &Gate::cphase(0, 1, 2)).unwrap();
        assert_abs_diff_eq!(s.amplitude(3).re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(3).im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bell_state_from_h_cnot() {
        let circ = Circuit::from_gates(2, vec![Gate::h(0), Gate::cnot(0, 1)]).unwrap();
        let s = apply_circuit(&StateVector::zero(2), &circ).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let want = [c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)];
        for (a, b) in s.amplitudes().iter().zip(want) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn hh_is_identity_and_empty_circuit_too() {
        let circ = Circuit::from_gates(1, vec![Gate::h(0), Gate::h(0)]).unwrap();
        let s = apply_circuit(&StateVector::zero(1), &circ).unwrap();
        assert_abs_diff_eq!((s.amplitude(0) - 1.0).norm(), 0.0, epsilon = 1e-15);
        let z = StateVector::uniform(3);
        assert_eq!(apply_circuit(&z, &Circuit::new(3)).unwrap(), z);
    }

    #[test]
    fn bad_indices_rejected() {
        let s = StateVector::zero(2);
        assert!(matches!(
            apply_gate(&s, &Gate::h(2)),
            Err(Error::QubitOutOfRange { index: 2, n_qubits: 2 })
        ));
        assert!(matches!(apply_gate(&s, &Gate::cnot(1, 1)), Err(Error::DuplicateQubit(1))));
        assert!(matches!(
            apply_gate(&s, &Gate::cphase(0, 1, 0)),
            Err(Error::InvalidPhaseOrder(0))
        ));
        assert!(matches!(
            apply_circuit(&s, &Circuit::new(3)),
            Err(Error::QubitCountMismatch { .. })
        ));
    }

    #[test]
    fn tensor_of_basis_states() {
        let t = tensor_product(&StateVector::zero(1), &StateVector::basis(1, 1).unwrap());
        assert_eq!(t, StateVector::basis(2, 1).unwrap());
        let u = tensor_product(&StateVector::uniform(1), &StateVector::zero(1));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(u.amplitude(0).re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(u.amplitude(2).re, r, epsilon = 1e-15);
    }

    #[test]
    fn entanglement_detection() {
        assert!(is_product_state(&StateVector::basis(2, 1).unwrap(), &[0]).unwrap());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[r, 0.0, 0.0, r]).unwrap();
        assert!(!is_product_state(&bell, &[0]).unwrap());
        assert!(is_product_state(&bell, &[0, 1]).is_err());
    }

    #[test]
    fn measuring_bell_collapses_both() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[r, 0.0, 0.0, r]).unwrap();
        let mut seen = [false; 2];
        for seed in 0..64 {
            let (bits, post) = measure_register(&bell, &[0], seed).unwrap();
            let idx = if bits[0] { 3 } else { 0 };
            assert_eq!(post, StateVector::basis(2, idx).unwrap());
            seen[usize::from(bits[0])] = true;
        }
        assert!(seen[0] && seen[1]);
        let (bits, _) = measure_register(&StateVector::basis(1, 1).unwrap(), &[0], 3).unwrap();
        assert_eq!(bits, vec![true]);
    }

    #[test]
    fn post_selection_cases() {
        let (s, p) = post_select(&StateVector::basis(2, 1).unwrap(), &[1], &[true]).unwrap();
        assert_eq!(s, StateVector::zero(1));
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[r, 0.0, 0.0, r]).unwrap();
        let (s, p) = post_select(&bell, &[0], &[false]).unwrap();
        assert_eq!(s, StateVector::zero(1));
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);

        assert!(matches!(
            post_select(&StateVector::zero(2), &[0], &[true]),
            Err(Error::ZeroProbabilityBranch(_))
        ));
    }

    #[test]
    fn low_zero_post_selection_matches_general() {
        let amps: Vec<Complex64> = (0..16).map(|i| c(i as f64 + 1.0, 0.5 * i as f64)).collect();
        let (s, _) = StateVector::normalized(amps).unwrap();
        let (a, pa) = post_select(&s, &[2, 3], &[false, false]).unwrap();
        let (b, pb) = post_select_low_zero(&s, 2).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(pa, pb, epsilon = 1e-15);
    }

    #[test]
    fn permutation_validation_and_subregister_map() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 1, 2]).is_err());
        // swap |0> <-> |1> on qubit 1 of a 2-qubit register is a NOT there
        let map = Permutation::new(vec![1, 0]).unwrap();
        let g = Gate::IndexMap { qubits: vec![1], map };
        let s = apply_gate(&StateVector::basis(2, 2).unwrap(), &g).unwrap();
        assert_eq!(s, StateVector::basis(2, 3).unwrap());
    }
}
