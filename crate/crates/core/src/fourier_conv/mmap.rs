//! The frequency-shift map |t>|j> -> |t>|(j - t) mod N>.
//!
//! Applied to `Σ f̂(t) ĝ(j) |t>|j>` it leaves `Σ f̂(t) ĝ(t + j) |t>|j>`, so the
//! `j = 0` branch carries the pointwise product of the two spectra.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::statevec::{Gate, Permutation, StateVector};

/// Permutation table for registers made of one or more axes. `axis_bits`
/// lists the qubit count of each axis; both registers share the layout and
/// the t-register holds the most significant qubits.
pub fn m_map_permutation(axis_bits: &[usize]) -> Result<Permutation> {
    if axis_bits.is_empty() || axis_bits.contains(&0) {
        return Err(Error::InvalidArgument("every axis needs at least one qubit".into()));
    }
    static CACHE: OnceLock<Mutex<HashMap<Vec<usize>, Permutation>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().expect("cache poisoned").get(axis_bits) {
        return Ok(p.clone());
    }
    let reg_bits: usize = axis_bits.iter().sum();
    let reg_mask = (1usize << reg_bits) - 1;
    let mut table = vec![0usize; 1 << (2 * reg_bits)];
    for (idx, slot) in table.iter_mut().enumerate() {
        let t = idx >> reg_bits;
        let j = idx & reg_mask;
        let mut out = 0usize;
        let mut shift = reg_bits;
        for &b in axis_bits {
            shift -= b;
            let m = (1usize << b) - 1;
            let (ta, ja) = ((t >> shift) & m, (j >> shift) & m);
            out |= (ja.wrapping_sub(ta) & m) << shift;
        }
        *slot = (t << reg_bits) | out;
    }
    let p = Permutation::new(table)?;
    cache.lock().expect("cache poisoned").insert(axis_bits.to_vec(), p.clone());
    Ok(p)
}

/// The map as a gate on the whole joint register.
pub fn m_map_gate(axis_bits: &[usize]) -> Result<Gate> {
    let map = m_map_permutation(axis_bits)?;
    Ok(Gate::IndexMap { qubits: (0..map.n_qubits()).collect(), map })
}

/// One-axis map on a joint register of `2n` qubits.
pub fn m_map(joint: &StateVector) -> Result<StateVector> {
    let q = joint.n_qubits();
    if q == 0 || q % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "joint register needs an even, nonzero qubit count, got {q}"
        )));
    }
    m_map_axes(joint, &[q / 2])
}

pub fn m_map_axes(joint: &StateVector, axis_bits: &[usize]) -> Result<StateVector> {
    let gate = m_map_gate(axis_bits)?;
    let expected = 2 * axis_bits.iter().sum::<usize>();
    if joint.n_qubits() != expected {
        return Err(Error::QubitCountMismatch { expected, found: joint.n_qubits() });
    }
    let mut out = joint.clone();
    out.apply(&gate)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_leaves_j() {
        for j in 0..4 {
            let s = StateVector::basis(4, j).unwrap();
            assert_eq!(m_map(&s).unwrap(), s);
        }
    }

    #[test]
    fn n4_table_entry() {
        // |t=1>|j=2> -> |t=1>|j=1>
        let s = StateVector::basis(4, 4 + 2).unwrap();
        assert_eq!(m_map(&s).unwrap(), StateVector::basis(4, 4 + 1).unwrap());
    }

    #[test]
    fn odd_register_rejected() {
        assert!(m_map(&StateVector::zero(3)).is_err());
    }

    #[test]
    fn two_axis_shift() {
        // axes of 2 and 1 qubits: t = (1, 1), j = (0, 0) -> j = (3, 1)
        let p = m_map_permutation(&[2, 1]).unwrap();
        let t = (1 << 1) | 1;
        let j_out = (3 << 1) | 1;
        assert_eq!(p.image(t << 3), (t << 3) | j_out);
    }
}
