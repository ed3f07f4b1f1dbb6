//! Multi-channel 2-D convolution through the convolution theorem.
//!
//! The input is cut into overlapping `T × T` tiles (overlap-save). Two real
//! input channels share one complex transform as real and imaginary parts,
//! and two output channels share one inverse transform the same way.

use num_complex::Complex64;

use super::direct::{dims3, dims4};
use super::spectral::{Direction, NdFft};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Valid-mode correlation plan for a fixed kernel.
#[derive(Debug, Clone)]
pub struct FftConv2d {
    tile: usize,
    c_in: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    nd: NdFft,
    /// Per output pair, per input channel: spectrum of the flipped kernel
    /// `K[o] + i K[o+1]`.
    spectra: Vec<Vec<Complex64>>,
}

impl FftConv2d {
    /// Plan for kernel `[C_out, C_in, kh, kw]` with the default tile.
    pub fn new(kernel: &Tensor) -> Result<Self> {
        let (_, _, kh, kw) = dims4(kernel)?;
        let tile = (4 * kh.max(kw)).next_power_of_two().max(32);
        Self::with_tile(kernel, tile)
    }

    pub fn with_tile(kernel: &Tensor, tile: usize) -> Result<Self> {
        let (c_out, c_in, kh, kw) = dims4(kernel)?;
        if !tile.is_power_of_two() || tile < kh.max(kw) + 1 {
            return Err(Error::InvalidArgument(format!(
                "tile {tile} must be a power of two larger than the kernel"
            )));
        }
        let nd = NdFft::new(&[tile, tile])?;
        let ks = kernel.data();
        let mut spectra = Vec::with_capacity(c_out.div_ceil(2) * c_in);
        for o in (0..c_out).step_by(2) {
            for c in 0..c_in {
                let mut buf = vec![ZERO; tile * tile];
                for i in 0..kh {
                    for j in 0..kw {
                        let re = ks[((o * c_in + c) * kh + i) * kw + j];
                        let im = if o + 1 < c_out {
                            ks[(((o + 1) * c_in + c) * kh + i) * kw + j]
                        } else {
                            0.0
                        };
                        let r = (tile - i) % tile;
                        let s = (tile - j) % tile;
                        buf[r * tile + s] = Complex64::new(re, im);
                    }
                }
                nd.process(&mut buf, Direction::Forward);
                spectra.push(buf);
            }
        }
        Ok(Self { tile, c_in, c_out, kh, kw, nd, spectra })
    }

    pub fn tile(&self) -> usize {
        self.tile
    }

    /// `Y[o, i', j'] = Σ_c Σ_i Σ_j X[c, i + i', j + j'] K[o, c, i, j]` over
    /// the valid window, equal to `direct_conv_2d` in linear mode.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let (c_in, h, w) = dims3(x)?;
        if c_in != self.c_in {
            return Err(Error::Shape(format!(
                "kernel expects {} channels, input has {c_in}",
                self.c_in
            )));
        }
        if self.kh > h || self.kw > w {
            return Err(Error::Shape(format!(
                "kernel {}x{} larger than input {h}x{w}",
                self.kh, self.kw
            )));
        }
        let t = self.tile;
        let (h_out, w_out) = (h - self.kh + 1, w - self.kw + 1);
        let (step_h, step_w) = (t - self.kh + 1, t - self.kw + 1);
        let xs = x.data();
        let mut y = Tensor::zeros(vec![self.c_out, h_out, w_out]);
        let inv = 1.0 / (t * t) as f64;
        let mut packed = vec![ZERO; t * t];
        let mut channels = vec![vec![ZERO; t * t]; c_in];
        let mut acc = vec![ZERO; t * t];
        for r0 in (0..h_out).step_by(step_h) {
            for s0 in (0..w_out).step_by(step_w) {
                let rows = t.min(h - r0);
                let cols = t.min(w - s0);
                for c in (0..c_in).step_by(2) {
                    let pair = c + 1 < c_in;
                    packed.fill(ZERO);
                    for i in 0..rows {
                        let src = (c * h + r0 + i) * w + s0;
                        let dst = &mut packed[i * t..i * t + cols];
                        if pair {
                            let other = src + h * w;
                            for (j, v) in dst.iter_mut().enumerate() {
                                *v = Complex64::new(xs[src + j], xs[other + j]);
                            }
                        } else {
                            for (j, v) in dst.iter_mut().enumerate() {
                                *v = Complex64::new(xs[src + j], 0.0);
                            }
                        }
                    }
                    self.nd.process(&mut packed, Direction::Forward);
                    if pair {
                        let (lo, hi) = channels.split_at_mut(c + 1);
                        unpack(&packed, t, &mut lo[c], &mut hi[0]);
                    } else {
                        channels[c].copy_from_slice(&packed);
                    }
                }
                let valid_h = step_h.min(h_out - r0);
                let valid_w = step_w.min(w_out - s0);
                for (p, o) in (0..self.c_out).step_by(2).enumerate() {
                    acc.fill(ZERO);
                    for (c, spec) in channels.iter().enumerate() {
                        let k = &self.spectra[p * c_in + c];
                        for ((a, xv), kv) in acc.iter_mut().zip(spec).zip(k) {
                            *a += xv * kv;
                        }
                    }
                    self.nd.process(&mut acc, Direction::Inverse);
                    let ys = y.data_mut();
                    for i in 0..valid_h {
                        let row = &acc[i * t..i * t + valid_w];
                        let at = (o * h_out + r0 + i) * w_out + s0;
                        for (j, v) in row.iter().enumerate() {
                            ys[at + j] = v.re * inv;
                        }
                        if o + 1 < self.c_out {
                            let at = ((o + 1) * h_out + r0 + i) * w_out + s0;
                            for (j, v) in row.iter().enumerate() {
                                ys[at + j] = v.im * inv;
                            }
                        }
                    }
                }
            }
        }
        Ok(y)
    }
}

/// Splits the spectrum of `a + i b` (real `a`, `b`) into the spectra of
/// `a` and `b` using `A[k] = (Z[k] + Z*[-k])/2`, `B[k] = (Z[k] - Z*[-k])/2i`.
fn unpack(z: &[Complex64], t: usize, a: &mut [Complex64], b: &mut [Complex64]) {
    for u in 0..t {
        let nu = (t - u) % t;
        for v in 0..t {
            let nv = (t - v) % t;
            let zk = z[u * t + v];
            let zc = z[nu * t + nv].conj();
            a[u * t + v] = (zk + zc) * 0.5;
            let d = zk - zc;
            b[u * t + v] = Complex64::new(d.im * 0.5, -d.re * 0.5);
        }
    }
}

/// One-shot valid-mode FFT convolution; see [`FftConv2d::apply`].
pub fn fft_conv_2d(x: &Tensor, k: &Tensor) -> Result<Tensor> {
    FftConv2d::new(k)?.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::direct::{direct_conv_2d, ConvMode};
    use crate::train::relative_error;

    fn ramp(shape: Vec<usize>, a: f64) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|i| (i as f64 * a).sin()).collect()).unwrap()
    }

    #[test]
    fn matches_direct_across_tiles() {
        for (c_in, c_out, h, w, k, tile) in
            [(3, 2, 37, 41, 5, 16), (1, 1, 8, 8, 3, 4), (2, 3, 20, 13, 3, 8), (4, 5, 30, 30, 5, 64)]
        {
            let x = ramp(vec![c_in, h, w], 0.31);
            let kern = ramp(vec![c_out, c_in, k, k], 0.77);
            let fast = FftConv2d::with_tile(&kern, tile).unwrap().apply(&x).unwrap();
            let slow = direct_conv_2d(&x, &kern, ConvMode::Linear).unwrap();
            assert_eq!(fast.shape(), slow.shape());
            assert!(relative_error(fast.data(), slow.data()) < 1e-10);
        }
    }

    #[test]
    fn rejects_small_tile_and_channel_mismatch() {
        let kern = ramp(vec![1, 2, 5, 5], 0.1);
        assert!(FftConv2d::with_tile(&kern, 4).is_err());
        let plan = FftConv2d::new(&kern).unwrap();
        assert!(plan.apply(&ramp(vec![3, 10, 10], 0.2)).is_err());
    }
}
