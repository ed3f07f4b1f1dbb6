//! Ry rotation-tree encoding of a real kernel.
//!
//! A tree over `N = 2^m` leaves stores one angle per internal node in heap
//! order (level `l`, position `i` at index `2^l - 1 + i`). Level `l` acts on
//! qubit `l` controlled by qubits `0..l`, so leaf `x` is reached by reading
//! its bits most significant first. The amplitude of leaf `x` is the product
//! of `cos(θ/2)` (left branch) or `sin(θ/2)` (right branch) along its path.

use crate::error::{Error, Result};
use crate::statevec::{Gate, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct AngleTree {
    n_qubits: usize,
    angles: Vec<f64>,
    trainable: Vec<bool>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn walsh_sign(p: usize, i: usize) -> f64 {
    if (p & gray(i)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl AngleTree {
    /// Builds the tree whose state is `values / ‖values‖`. Leaves flagged
    /// invalid are padding: they must be zero, and a node is trainable only
    /// when both of its subtrees contain a valid leaf.
    pub fn from_amplitudes(values: &[f64], valid: &[bool]) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        if valid.len() != n {
            return Err(Error::Shape(format!("mask has {} entries for {n} leaves", valid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel"));
        }
        if values.iter().zip(valid).any(|(&v, &ok)| !ok && v != 0.0) {
            return Err(Error::InvalidArgument("padding leaves must be zero".into()));
        }
        let inner = n - 1;
        // heap of squared subtree norms and validity, leaves at inner..2n-1
        let mut sq = vec![0.0; 2 * n - 1];
        let mut any = vec![false; 2 * n - 1];
        for x in 0..n {
            sq[inner + x] = values[x] * values[x];
            any[inner + x] = valid[x];
        }
        for h in (0..inner).rev() {
            sq[h] = sq[2 * h + 1] + sq[2 * h + 2];
            any[h] = any[2 * h + 1] || any[2 * h + 2];
        }
        if sq[0] == 0.0 {
            return Err(Error::ZeroVector);
        }
        let leaf_parent_start = n / 2 - 1;
        let mut angles = vec![0.0; inner];
        let mut trainable = vec![false; inner];
        for h in 0..inner {
            let (l, r) = (2 * h + 1, 2 * h + 2);
            angles[h] = if h >= leaf_parent_start {
                // signed leaves
                2.0 * values[r - inner].atan2(values[l - inner])
            } else {
                2.0 * sq[r].sqrt().atan2(sq[l].sqrt())
            };
            trainable[h] = any[l] && any[r];
        }
        Ok(Self { n_qubits: n.trailing_zeros() as usize, angles, trainable })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.n_qubits
    }

    /// All node angles in heap order.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn set_angle(&mut self, node: usize, theta: f64) {
        self.angles[node] = theta;
    }

    pub fn trainable_mask(&self) -> &[bool] {
        &self.trainable
    }

    pub fn trainable_nodes(&self) -> Vec<usize> {
        (0..self.angles.len()).filter(|&h| self.trainable[h]).collect()
    }

    /// Unit-norm real amplitudes prepared by the tree.
    pub fn amplitudes(&self) -> Vec<f64> {
        let n = self.leaf_count();
        let mut p = vec![0.0; 2 * n - 1];
        p[0] = 1.0;
        for h in 0..n - 1 {
            let (s, c) = (self.angles[h] / 2.0).sin_cos();
            p[2 * h + 1] = p[h] * c;
            p[2 * h + 2] = p[h] * s;
        }
        p.split_off(n - 1)
    }

    /// Gradient with respect to every node angle given `∂L/∂amplitude`.
    pub fn backward(&self, grad_amps: &[f64]) -> Vec<f64> {
        let n = self.leaf_count();
        let inner = n - 1;
        let mut prefix = vec![0.0; 2 * n - 1];
        prefix[0] = 1.0;
        let trig: Vec<(f64, f64)> = self.angles.iter().map(|a| (a / 2.0).sin_cos()).collect();
        for h in 0..inner {
            let (s, c) = trig[h];
            prefix[2 * h + 1] = prefix[h] * c;
            prefix[2 * h + 2] = prefix[h] * s;
        }
        let mut q = vec![0.0; 2 * n - 1];
        q[inner..].copy_from_slice(&grad_amps[..n]);
        let mut grad = vec![0.0; inner];
        for h in (0..inner).rev() {
            let (s, c) = trig[h];
            let (ql, qr) = (q[2 * h + 1], q[2 * h + 2]);
            q[h] = c * ql + s * qr;
            grad[h] = prefix[h] * 0.5 * (c * qr - s * ql);
        }
        grad
    }

    /// Angles of the plain Ry gates in the Gray-code decomposition, in the
    /// same heap layout as the node angles.
    pub fn occurrence_angles(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.angles.len()];
        for l in 0..self.n_qubits {
            let base = (1 << l) - 1;
            let size = 1usize << l;
            let scale = 1.0 / size as f64;
            for i in 0..size {
                out[base + i] = scale
                    * (0..size).map(|p| walsh_sign(p, i) * self.angles[base + p]).sum::<f64>();
            }
        }
        out
    }

    /// The tree whose decomposition uses `occurrences` (inverse of
    /// [`AngleTree::occurrence_angles`]). The trainable mask is kept.
    pub fn with_occurrence_angles(&self, occurrences: &[f64]) -> Result<Self> {
        if occurrences.len() != self.angles.len() {
            return Err(Error::Shape(format!(
                "expected {} occurrence angles, got {}",
                self.angles.len(),
                occurrences.len()
            )));
        }
        let mut angles = vec![0.0; self.angles.len()];
        for l in 0..self.n_qubits {
            let base = (1 << l) - 1;
            let size = 1usize << l;
            for p in 0..size {
                angles[base + p] =
                    (0..size).map(|i| walsh_sign(p, i) * occurrences[base + i]).sum();
            }
        }
        Ok(Self { angles, ..self.clone() })
    }

    /// Maps a gradient over occurrence angles to one over node angles.
    pub fn occurrence_grad_to_nodes(&self, grad_occ: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.angles.len()];
        for l in 0..self.n_qubits {
            let base = (1 << l) - 1;
            let size = 1usize << l;
            let scale = 1.0 / size as f64;
            for p in 0..size {
                out[base + p] = scale
                    * (0..size).map(|i| walsh_sign(p, i) * grad_occ[base + i]).sum::<f64>();
            }
        }
        out
    }

    /// Ry + CNOT preparation circuit on `qubits` (most significant first).
    pub fn circuit(&self, qubits: &[usize]) -> Result<Vec<Gate>> {
        self.circuit_from_occurrences(&self.occurrence_angles(), qubits)
    }

    pub fn circuit_from_occurrences(&self, occ: &[f64], qubits: &[usize]) -> Result<Vec<Gate>> {
        if qubits.len() != self.n_qubits {
            return Err(Error::QubitCountMismatch { expected: self.n_qubits, found: qubits.len() });
        }
        let mut gates = Vec::with_capacity(2 * self.angles.len());
        gates.push(Gate::ry(qubits[0], occ[0]));
        for l in 1..self.n_qubits {
            let base = (1 << l) - 1;
            let size = 1usize << l;
            for i in 0..size {
                gates.push(Gate::ry(qubits[l], occ[base + i]));
                let flip = gray(i) ^ gray((i + 1) % size);
                let b = flip.trailing_zeros() as usize;
                gates.push(Gate::cnot(qubits[l - 1 - b], qubits[l]));
            }
        }
        Ok(gates)
    }

    /// Runs the preparation circuit on |0...0>.
    pub fn prepare(&self) -> Result<StateVector> {
        let qubits: Vec<usize> = (0..self.n_qubits).collect();
        let mut state = StateVector::zero(self.n_qubits);
        for g in self.circuit(&qubits)? {
            state.apply(&g)?;
        }
        Ok(state)
    }
}

/// Angle tree for the kernel `k` zero-padded to `n` leaves.
pub fn kernel_to_angles(k: &[f64], n: usize) -> Result<AngleTree> {
    if n < k.len() {
        return Err(Error::Shape(format!("{} kernel values do not fit {n} leaves", k.len())));
    }
    let mut values = k.to_vec();
    values.resize(n, 0.0);
    let valid: Vec<bool> = (0..n).map(|i| i < k.len()).collect();
    AngleTree::from_amplitudes(&values, &valid)
}

/// Unit-norm kernel encoded by the tree; multiply by the stored norm to
/// recover the original values.
pub fn angles_to_kernel(tree: &AngleTree) -> Vec<f64> {
    tree.amplitudes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn single_leaf_kernel() {
        let t = kernel_to_angles(&[1.0], 2).unwrap();
        assert_eq!(t.angles(), &[0.0]);
        assert_eq!(t.trainable_mask(), &[false]);
    }

    #[test]
    fn uniform_pair() {
        let t = kernel_to_angles(&[1.0, 1.0], 2).unwrap();
        assert_abs_diff_eq!(t.angles()[0], FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn signed_round_trip() {
        let k = [0.3, -1.2, 0.0, 2.0, -0.5, 0.7, 1.1, -0.05];
        let t = kernel_to_angles(&k, 8).unwrap();
        let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in angles_to_kernel(&t).iter().zip(&k) {
            assert_abs_diff_eq!(a * norm, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn circuit_prepares_amplitudes() {
        let k = [0.3, -1.2, 0.4, 2.0, -0.5, 0.7, 1.1, -0.05];
        let t = kernel_to_angles(&k, 8).unwrap();
        let s = t.prepare().unwrap();
        for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
            assert_abs_diff_eq!(a.re, b, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn occurrence_round_trip() {
        let t = kernel_to_angles(&[0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8], 8).unwrap();
        let back = t.with_occurrence_angles(&t.occurrence_angles()).unwrap();
        for (a, b) in back.angles().iter().zip(t.angles()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn padding_nodes_frozen() {
        let t = kernel_to_angles(&[1.0, 2.0, 3.0], 4).unwrap();
        // root splits {0,1} | {2,3}; right child has one valid leaf
        assert_eq!(t.trainable_mask(), &[true, true, false]);
    }

    #[test]
    fn zero_kernel_rejected() {
        assert_eq!(kernel_to_angles(&[0.0, 0.0], 2), Err(Error::ZeroVector));
    }

    #[test]
    fn backward_matches_difference() {
        let t = kernel_to_angles(&[0.5, -1.0, 0.25, 2.0], 4).unwrap();
        let w = [0.3, -0.7, 1.1, 0.2];
        let loss = |tree: &AngleTree| -> f64 {
            tree.amplitudes().iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let g = t.backward(&w);
        for h in 0..3 {
            let mut up = t.clone();
            up.set_angle(h, t.angles()[h] + 1e-6);
            let mut dn = t.clone();
            dn.set_angle(h, t.angles()[h] - 1e-6);
            assert_abs_diff_eq!(g[h], (loss(&up) - loss(&dn)) / 2e-6, epsilon = 1e-8);
        }
    }
}
