//! Direct (nested-sum) convolution oracles.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvMode {
    /// Periodic indexing over the padded signal.
    Circular,
    /// Zero-padded indexing. 1-D gives the full convolution
    /// (`len f + len g - 1`), 2-D the valid window (`H-h+1`, `W-w+1`).
    #[default]
    Linear,
}

/// 1-D convolution `y[x] = Σ_a f[a] g[x - a]`.
///
/// Circular mode uses period `len(f)` and requires `len(g) <= len(f)`.
pub fn direct_conv(f: &[f64], g: &[f64], mode: ConvMode) -> Result<Vec<f64>> {
    if f.is_empty() || g.is_empty() {
        return Err(Error::Shape("empty operand".into()));
    }
    match mode {
        ConvMode::Circular => {
            let n = f.len();
            if g.len() > n {
                return Err(Error::Shape(format!(
                    "kernel length {} exceeds period {n}",
                    g.len()
                )));
            }
            let mut y = vec![0.0; n];
            for (x, yx) in y.iter_mut().enumerate() {
                for (a, fa) in f.iter().enumerate() {
                    let m = (x + n - a) % n;
                    if m < g.len() {
                        *yx += fa * g[m];
                    }
                }
            }
            Ok(y)
        }
        ConvMode::Linear => {
            let mut y = vec![0.0; f.len() + g.len() - 1];
            for (a, fa) in f.iter().enumerate() {
                for (b, gb) in g.iter().enumerate() {
                    y[a + b] += fa * gb;
                }
            }
            Ok(y)
        }
    }
}

/// Multi-channel 2-D convolution in the CNN (cross-correlation) form:
///
/// `Y[o, i', j'] = Σ_c Σ_i Σ_j X[c, i + i', j + j'] K[o, c, i, j]`
///
/// with `X: [C_in, H, W]` and `K: [C_out, C_in, h, w]`.
pub fn direct_conv_2d(x: &Tensor, k: &Tensor, mode: ConvMode) -> Result<Tensor> {
    let (c_in, h_in, w_in) = dims3(x)?;
    let (c_out, kc, kh, kw) = dims4(k)?;
    if kc != c_in {
        return Err(Error::Shape(format!("kernel expects {kc} channels, input has {c_in}")));
    }
    if kh > h_in || kw > w_in {
        return Err(Error::Shape(format!(
            "kernel {kh}x{kw} larger than input {h_in}x{w_in}"
        )));
    }
    let (h_out, w_out) = match mode {
        ConvMode::Circular => (h_in, w_in),
        ConvMode::Linear => (h_in - kh + 1, w_in - kw + 1),
    };
    let xs = x.data();
    let ks = k.data();
    let mut y = Tensor::zeros(vec![c_out, h_out, w_out]);
    let ys = y.data_mut();
    for o in 0..c_out {
        for i2 in 0..h_out {
            for j2 in 0..w_out {
                let mut acc = 0.0;
                for c in 0..c_in {
                    for i in 0..kh {
                        let r = match mode {
                            ConvMode::Circular => (i + i2) % h_in,
                            ConvMode::Linear => i + i2,
                        };
                        for j in 0..kw {
                            let s = match mode {
                                ConvMode::Circular => (j + j2) % w_in,
                                ConvMode::Linear => j + j2,
                            };
                            acc += xs[(c * h_in + r) * w_in + s]
                                * ks[((o * c_in + c) * kh + i) * kw + j];
                        }
                    }
                }
                ys[(o * h_out + i2) * w_out + j2] = acc;
            }
        }
    }
    Ok(y)
}

/// Multi-channel 1-D convolution `Y[o, x] = Σ_c Σ_a X[c, x - a] K[o, c, a]`
/// with `X: [C_in, L]` and `K: [C_out, C_in, k]`.
pub fn direct_conv_1d(x: &Tensor, k: &Tensor, mode: ConvMode) -> Result<Tensor> {
    let (c_in, len) = dims2(x)?;
    let (c_out, kc, klen) = dims3(k)?;
    if kc != c_in {
        return Err(Error::Shape(format!("kernel expects {kc} channels, input has {c_in}")));
    }
    let out_len = match mode {
        ConvMode::Circular => len,
        ConvMode::Linear => len + klen - 1,
    };
    let mut y = Tensor::zeros(vec![c_out, out_len]);
    for o in 0..c_out {
        let mut acc = vec![0.0; out_len];
        for c in 0..c_in {
            let kk = &k.data()[(o * c_in + c) * klen..(o * c_in + c + 1) * klen];
            acc.iter_mut()
                .zip(direct_conv(x.slab(c), kk, mode)?)
                .for_each(|(a, v)| *a += v);
        }
        y.slab_mut(o).copy_from_slice(&acc);
    }
    Ok(y)
}

/// Gradients of [`direct_conv_1d`] with respect to input and kernel.
pub fn conv_1d_backward(
    x: &Tensor,
    k: &Tensor,
    grad_y: &Tensor,
    mode: ConvMode,
) -> Result<(Tensor, Tensor)> {
    let (c_in, len) = dims2(x)?;
    let (c_out, _, klen) = dims3(k)?;
    let (_, out_len) = dims2(grad_y)?;
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let mut gk = Tensor::zeros(k.shape().to_vec());
    for o in 0..c_out {
        let gy = grad_y.slab(o);
        for c in 0..c_in {
            let xs = x.slab(c);
            let kbase = (o * c_in + c) * klen;
            for a in 0..klen {
                let kv = k.data()[kbase + a];
                let mut dk = 0.0;
                for (i, &xv) in xs.iter().enumerate() {
                    let t = match mode {
                        ConvMode::Circular => (i + a) % len,
                        ConvMode::Linear => i + a,
                    };
                    if t < out_len {
                        dk += gy[t] * xv;
                        gx.data_mut()[c * len + i] += gy[t] * kv;
                    }
                }
                gk.data_mut()[kbase + a] += dk;
            }
        }
    }
    Ok((gx, gk))
}

/// Gradients of [`direct_conv_2d`] with respect to input and kernel.
pub fn conv_2d_backward(
    x: &Tensor,
    k: &Tensor,
    grad_y: &Tensor,
    mode: ConvMode,
) -> Result<(Tensor, Tensor)> {
    let (c_in, h_in, w_in) = dims3(x)?;
    let (c_out, _, kh, kw) = dims4(k)?;
    let (_, h_out, w_out) = dims3(grad_y)?;
    let xs = x.data();
    let ks = k.data();
    let gys = grad_y.data();
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let mut gk = Tensor::zeros(k.shape().to_vec());
    {
        let gxs = gx.data_mut();
        let gks = gk.data_mut();
        for o in 0..c_out {
            for i2 in 0..h_out {
                for j2 in 0..w_out {
                    let g = gys[(o * h_out + i2) * w_out + j2];
                    if g == 0.0 {
                        continue;
                    }
                    for c in 0..c_in {
                        for i in 0..kh {
                            let r = match mode {
                                ConvMode::Circular => (i + i2) % h_in,
                                ConvMode::Linear => i + i2,
                            };
                            for j in 0..kw {
                                let s = match mode {
                                    ConvMode::Circular => (j + j2) % w_in,
                                    ConvMode::Linear => j + j2,
                                };
                                let xi = (c * h_in + r) * w_in + s;
                                let ki = ((o * c_in + c) * kh + i) * kw + j;
                                gks[ki] += g * xs[xi];
                                gxs[xi] += g * ks[ki];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gk))
}

pub(crate) fn dims2(t: &Tensor) -> Result<(usize, usize)> {
    match *t.shape() {
        [a, b] => Ok((a, b)),
        ref s => Err(Error::Shape(format!("expected a rank-2 tensor, got {s:?}"))),
    }
}

pub(crate) fn dims3(t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        ref s => Err(Error::Shape(format!("expected a rank-3 tensor, got {s:?}"))),
    }
}

pub(crate) fn dims4(t: &Tensor) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [a, b, c, d] => Ok((a, b, c, d)),
        ref s => Err(Error::Shape(format!("expected a rank-4 tensor, got {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_example() {
        let y = direct_conv(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 0.0, 0.0], ConvMode::Circular)
            .unwrap();
        assert_eq!(y, vec![5.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let f = [0.3, -1.0, 2.5, 4.0];
        assert_eq!(direct_conv(&f, &[1.0], ConvMode::Circular).unwrap(), f.to_vec());
        assert_eq!(direct_conv(&f, &[1.0], ConvMode::Linear).unwrap(), f.to_vec());
        let x = Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(direct_conv_2d(&x, &k, ConvMode::Linear).unwrap().data(), x.data());
    }

    #[test]
    fn linear_full_length() {
        let y = direct_conv(&[1.0, 2.0], &[1.0, 1.0, 1.0], ConvMode::Linear).unwrap();
        assert_eq!(y, vec![1.0, 3.0, 3.0, 2.0]);
    }

    #[test]
    fn two_channels_sum() {
        let x = Tensor::new(vec![2, 3, 3], (0..18).map(|v| v as f64).collect()).unwrap();
        let k = Tensor::new(vec![1, 2, 2, 2], vec![1.0, -1.0, 0.5, 2.0, 0.0, 1.0, 3.0, -2.0])
            .unwrap();
        let y = direct_conv_2d(&x, &k, ConvMode::Linear).unwrap();
        let mut sum = vec![0.0; 4];
        for c in 0..2 {
            let xc = Tensor::new(vec![1, 3, 3], x.slab(c).to_vec()).unwrap();
            let kc = Tensor::new(vec![1, 1, 2, 2], k.data()[c * 4..(c + 1) * 4].to_vec()).unwrap();
            let yc = direct_conv_2d(&xc, &kc, ConvMode::Linear).unwrap();
            sum.iter_mut().zip(yc.data()).for_each(|(s, v)| *s += v);
        }
        assert_eq!(y.data(), sum.as_slice());
    }

    #[test]
    fn backward_matches_difference() {
        let x = Tensor::new(vec![2, 4, 3], (0..24).map(|v| (v as f64 * 0.37).sin()).collect())
            .unwrap();
        let k = Tensor::new(vec![2, 2, 2, 2], (0..16).map(|v| (v as f64 * 0.71).cos()).collect())
            .unwrap();
        for mode in [ConvMode::Linear, ConvMode::Circular] {
            let y = direct_conv_2d(&x, &k, mode).unwrap();
            let w: Vec<f64> = (0..y.len()).map(|v| (v as f64 * 0.13).sin()).collect();
            let loss = |x: &Tensor, k: &Tensor| -> f64 {
                let y = direct_conv_2d(x, k, mode).unwrap();
                y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
            };
            let gy = Tensor::new(y.shape().to_vec(), w.clone()).unwrap();
            let (gx, gk) = conv_2d_backward(&x, &k, &gy, mode).unwrap();
            for i in 0..k.len() {
                let mut kp = k.clone();
                kp.data_mut()[i] += 1e-6;
                let mut km = k.clone();
                km.data_mut()[i] -= 1e-6;
                let fd = (loss(&x, &kp) - loss(&x, &km)) / 2e-6;
                assert!((fd - gk.data()[i]).abs() < 1e-7);
            }
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp.data_mut()[i] += 1e-6;
                let mut xm = x.clone();
                xm.data_mut()[i] -= 1e-6;
                let fd = (loss(&xp, &k) - loss(&xm, &k)) / 2e-6;
                assert!((fd - gx.data()[i]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn backward_1d_matches_difference() {
        let x = Tensor::new(vec![2, 4], vec![0.5, -1.0, 2.0, 0.3, 1.1, 0.0, -0.4, 0.9]).unwrap();
        let k = Tensor::new(vec![1, 2, 3], vec![0.2, -0.7, 1.5, 0.6, 0.1, -0.3]).unwrap();
        for mode in [ConvMode::Linear, ConvMode::Circular] {
            let y = direct_conv_1d(&x, &k, mode).unwrap();
            let w: Vec<f64> = (0..y.len()).map(|v| (v as f64 * 0.9).cos()).collect();
            let loss = |x: &Tensor, k: &Tensor| -> f64 {
                let y = direct_conv_1d(x, k, mode).unwrap();
                y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
            };
            let gy = Tensor::new(y.shape().to_vec(), w.clone()).unwrap();
            let (gx, gk) = conv_1d_backward(&x, &k, &gy, mode).unwrap();
            for i in 0..k.len() {
                let mut kp = k.clone();
                kp.data_mut()[i] += 1e-6;
                let mut km = k.clone();
                km.data_mut()[i] -= 1e-6;
                assert!(((loss(&x, &kp) - loss(&x, &km)) / 2e-6 - gk.data()[i]).abs() < 1e-7);
            }
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp.data_mut()[i] += 1e-6;
                let mut xm = x.clone();
                xm.data_mut()[i] -= 1e-6;
                assert!(((loss(&xp, &k) - loss(&xm, &k)) / 2e-6 - gx.data()[i]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn shape_errors() {
        assert!(direct_conv(&[1.0], &[1.0, 2.0], ConvMode::Circular).is_err());
        let x = Tensor::zeros(vec![1, 2, 2]);
        let k = Tensor::zeros(vec![1, 2, 1, 1]);
        assert!(direct_conv_2d(&x, &k, ConvMode::Linear).is_err());
    }
}
