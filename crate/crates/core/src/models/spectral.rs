//! Classical discrete Fourier transforms.
//!
//! All transforms here use the same convention as the QFT circuit:
//! `y_k = N^{-1/2} Σ_j x_j e^{+2πi jk/N}` for the forward direction.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Positive exponent.
    Forward,
    /// Negative exponent.
    Inverse,
}

/// Literal O(N²) evaluation of the unitary DFT.
pub fn dft_oracle(x: &[Complex64]) -> Vec<Complex64> {
    dft_literal(x, 1.0)
}

/// Literal O(N²) inverse (negative exponent) unitary DFT.
pub fn idft_oracle(x: &[Complex64]) -> Vec<Complex64> {
    dft_literal(x, -1.0)
}

fn dft_literal(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            let acc: Complex64 = x
                .iter()
                .enumerate()
                .map(|(j, &xj)| {
                    // reduce kj mod n before scaling to keep the angle small
                    let phase = sign * 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    xj * Complex64::from_polar(1.0, phase)
                })
                .sum();
            acc * scale
        })
        .collect()
}

/// Precomputed twiddles and bit-reversal table for a radix-2 transform.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    /// Per-stage twiddles, stage with half-length `h` at offset `h - 1`.
    forward_twiddles: Vec<Complex64>,
    inverse_twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let mut forward_twiddles = Vec::with_capacity(n.saturating_sub(1));
        let mut half = 1;
        while half < n {
            forward_twiddles.extend(
                (0..half).map(|k| Complex64::from_polar(1.0, PI * k as f64 / half as f64)),
            );
            half <<= 1;
        }
        let inverse_twiddles = forward_twiddles.iter().map(|w| w.conj()).collect();
        Ok(Self { n, forward_twiddles, inverse_twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unscaled in-place transform.
    pub fn process(&self, data: &mut [Complex64], dir: Direction) {
        debug_assert_eq!(data.len(), self.n);
        let n = self.n;
        if n == 1 {
            return;
        }
        for (i, &j) in self.bitrev.iter().enumerate() {
            if j > i {
                data.swap(i, j);
            }
        }
        let twiddles = match dir {
            Direction::Forward => &self.forward_twiddles,
            Direction::Inverse => &self.inverse_twiddles,
        };
        for pair in data.chunks_exact_mut(2) {
            let (a, b) = (pair[0], pair[1]);
            pair[0] = a + b;
            pair[1] = a - b;
        }
        let mut half = 2;
        while half < n {
            let w = &twiddles[half - 1..2 * half - 1];
            for block in data.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                    let v = *b * *w;
                    *b = *a - v;
                    *a += v;
                }
            }
            half <<= 1;
        }
    }

    /// Unitary forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.process(data, Direction::Forward);
        scale(data, 1.0 / (self.n as f64).sqrt());
    }

    /// Unitary inverse transform in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.process(data, Direction::Inverse);
        scale(data, 1.0 / (self.n as f64).sqrt());
    }
}

fn scale(data: &mut [Complex64], s: f64) {
    data.iter_mut().for_each(|v| *v *= s);
}

/// Radix-2 unitary forward transform.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out);
    Ok(out)
}

/// Radix-2 unitary inverse transform.
pub fn ifft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out);
    Ok(out)
}

const COLUMN_BATCH: usize = 8;

/// Separable transform over a row-major array with power-of-two axes.
#[derive(Debug, Clone)]
pub struct NdFft {
    dims: Vec<usize>,
    plans: Vec<FftPlan>,
}

impl NdFft {
    pub fn new(dims: &[usize]) -> Result<Self> {
        let plans = dims.iter().map(|&d| FftPlan::new(d)).collect::<Result<_>>()?;
        Ok(Self { dims: dims.to_vec(), plans })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unscaled transform along every axis.
    pub fn process(&self, data: &mut [Complex64], dir: Direction) {
        debug_assert_eq!(data.len(), self.len());
        let total = data.len();
        let mut buf = Vec::new();
        for (axis, plan) in self.plans.iter().enumerate() {
            let d = self.dims[axis];
            if d == 1 {
                continue;
            }
            let inner: usize = self.dims[axis + 1..].iter().product();
            if inner == 1 {
                for row in data.chunks_exact_mut(d) {
                    plan.process(row, dir);
                }
                continue;
            }
            // gather a few columns at a time so each cache line is used fully
            buf.resize(COLUMN_BATCH * d, Complex64::new(0.0, 0.0));
            let outer = total / (d * inner);
            for o in 0..outer {
                for i0 in (0..inner).step_by(COLUMN_BATCH) {
                    let width = COLUMN_BATCH.min(inner - i0);
                    let base = o * d * inner + i0;
                    for k in 0..d {
                        let row = &data[base + k * inner..base + k * inner + width];
                        for (b, v) in row.iter().enumerate() {
                            buf[b * d + k] = *v;
                        }
                    }
                    for col in buf.chunks_exact_mut(d).take(width) {
                        plan.process(col, dir);
                    }
                    for k in 0..d {
                        let row = &mut data[base + k * inner..base + k * inner + width];
                        for (b, v) in row.iter_mut().enumerate() {
                            *v = buf[b * d + k];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.process(data, Direction::Forward);
        scale(data, 1.0 / (self.len() as f64).sqrt());
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.process(data, Direction::Inverse);
        scale(data, 1.0 / (self.len() as f64).sqrt());
    }
}

/// Circular convolution of two real arrays of identical power-of-two shape,
/// computed through the convolution theorem.
pub fn fft_circular_convolve(a: &[f64], b: &[f64], dims: &[usize]) -> Result<Vec<f64>> {
    let nd = NdFft::new(dims)?;
    if a.len() != nd.len() || b.len() != nd.len() {
        return Err(Error::Shape("operands must match the transform shape".into()));
    }
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    nd.process(&mut fa, Direction::Forward);
    nd.process(&mut fb, Direction::Forward);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    nd.process(&mut fa, Direction::Inverse);
    let inv = 1.0 / nd.len() as f64;
    Ok(fa.iter().map(|v| v.re * inv).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn delta_and_constant() {
        let mut x = vec![Complex64::new(0.0, 0.0); 8];
        x[0] = Complex64::new(1.0, 0.0);
        for y in dft_oracle(&x) {
            assert_abs_diff_eq!((y - 1.0 / 8f64.sqrt()).norm(), 0.0, epsilon = 1e-15);
        }
        let c = vec![Complex64::new(1.0, 0.0); 8];
        let y = fft(&c).unwrap();
        assert_abs_diff_eq!((y[0] - 8f64.sqrt()).norm(), 0.0, epsilon = 1e-14);
        for v in &y[1..] {
            assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert_eq!(fft(&[Complex64::new(1.0, 0.0); 3]).unwrap_err(), Error::NotPowerOfTwo(3));
        assert!(FftPlan::new(0).is_err());
    }

    #[test]
    fn length_one_is_identity() {
        let x = [Complex64::new(2.0, -1.0)];
        assert_eq!(fft(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn nd_matches_row_then_column() {
        let dims = [4, 8];
        let x: Vec<Complex64> =
            (0..32).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut a = x.clone();
        NdFft::new(&dims).unwrap().forward(&mut a);
        // explicit separable oracle
        let mut b = x;
        for r in 0..4 {
            let row = dft_oracle(&b[r * 8..(r + 1) * 8]);
            b[r * 8..(r + 1) * 8].copy_from_slice(&row);
        }
        for c in 0..8 {
            let col: Vec<Complex64> = (0..4).map(|r| b[r * 8 + c]).collect();
            for (r, v) in dft_oracle(&col).into_iter().enumerate() {
                b[r * 8 + c] = v;
            }
        }
        for (u, v) in a.iter().zip(&b) {
            assert_abs_diff_eq!((u - v).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
