//! Quantum Fourier transform circuits.
//!
//! The forward transform maps `|j> -> N^{-1/2} Σ_k e^{+2πi jk/N} |k>`
//! (positive exponent, unitary normalisation). Each qubit gets a Hadamard
//! followed by controlled-R_k phases from every less significant qubit;
//! the swap network that restores index order is appended at the end.

use crate::error::{Error, Result};
use crate::statevec::{Circuit, Gate, StateVector};

/// A QFT (or inverse QFT) circuit with its gate accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct QftCircuit {
    pub n: usize,
    pub circuit: Circuit,
    /// Hadamards plus controlled phases; always `n(n+1)/2`.
    pub counted_gates: usize,
    pub swap_count: usize,
}

/// QFT gates acting on `register` (most significant qubit first) inside a
/// larger circuit.
pub fn qft_gates(register: &[usize], swaps: bool) -> Vec<Gate> {
    let m = register.len();
    let mut gates = Vec::with_capacity(m * (m + 1) / 2 + m / 2);
    for q in 0..m {
        gates.push(Gate::h(register[q]));
        for l in q + 1..m {
            gates.push(Gate::cphase(register[l], register[q], (l - q + 1) as u32));
        }
    }
    if swaps {
        for q in 0..m / 2 {
            gates.push(Gate::Swap { a: register[q], b: register[m - 1 - q] });
        }
    }
    gates
}

/// Inverse QFT gates: the forward list reversed with conjugated phases.
pub fn iqft_gates(register: &[usize], swaps: bool) -> Vec<Gate> {
    qft_gates(register, swaps).iter().rev().map(Gate::dagger).collect()
}

fn assemble(n: usize, gates: Vec<Gate>) -> Result<QftCircuit> {
    let swap_count = gates.iter().filter(|g| matches!(g, Gate::Swap { .. })).count();
    let counted_gates = gates.len() - swap_count;
    Ok(QftCircuit { n, circuit: Circuit::from_gates(n, gates)?, counted_gates, swap_count })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("QFT needs at least one qubit".into()))
    } else {
        Ok(())
    }
}

pub fn build_qft(n: usize) -> Result<QftCircuit> {
    check_n(n)?;
    let reg: Vec<usize> = (0..n).collect();
    assemble(n, qft_gates(&reg, true))
}

/// QFT without the final swap network; the output appears bit-reversed.
pub fn build_qft_no_swap(n: usize) -> Result<QftCircuit> {
    check_n(n)?;
    let reg: Vec<usize> = (0..n).collect();
    assemble(n, qft_gates(&reg, false))
}

pub fn build_iqft(n: usize) -> Result<QftCircuit> {
    check_n(n)?;
    let reg: Vec<usize> = (0..n).collect();
    assemble(n, iqft_gates(&reg, true))
}

/// Runs the QFT circuit over the whole register.
pub fn qft_amplitudes(state: &StateVector) -> Result<StateVector> {
    let qft = build_qft(state.n_qubits())?;
    crate::statevec::apply_circuit(state, &qft.circuit)
}

pub fn iqft_amplitudes(state: &StateVector) -> Result<StateVector> {
    let iqft = build_iqft(state.n_qubits())?;
    crate::statevec::apply_circuit(state, &iqft.circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn single_qubit_qft_is_hadamard() {
        let q = build_qft(1).unwrap();
        assert_eq!(q.circuit.gates(), &[Gate::h(0)]);
        let i = build_iqft(1).unwrap();
        assert_eq!(i.circuit.gates(), &[Gate::h(0)]);
    }

    #[test]
    fn gate_counts() {
        let q = build_qft(3).unwrap();
        assert_eq!(q.counted_gates, 6);
        assert_eq!(q.swap_count, 1);
        for n in 1..=16 {
            let q = build_qft(n).unwrap();
            assert_eq!(q.counted_gates, n * (n + 1) / 2);
            assert_eq!(q.swap_count, n / 2);
            assert_eq!(build_qft_no_swap(n).unwrap().swap_count, 0);
        }
        assert!(build_qft(0).is_err());
        assert!(build_iqft(0).is_err());
    }

    #[test]
    fn two_qubit_qft_of_one() {
        let s = qft_amplitudes(&StateVector::basis(2, 1).unwrap()).unwrap();
        let want = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, -0.5),
        ];
        for (a, b) in s.amplitudes().iter().zip(want) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn delta_and_uniform() {
        let s = qft_amplitudes(&StateVector::zero(4)).unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!((a - Complex64::new(0.25, 0.0)).norm(), 0.0, epsilon = 1e-14);
        }
        let back = iqft_amplitudes(&StateVector::uniform(4)).unwrap();
        assert_abs_diff_eq!((back.amplitude(0) - 1.0).norm(), 0.0, epsilon = 1e-14);
    }
}
