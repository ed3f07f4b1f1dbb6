//! Classical layers shared by the networks.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected layer `y = W x + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::Shape(format!(
                "dense {inputs}->{outputs} needs {} weights and {outputs} biases",
                inputs * outputs
            )));
        }
        Ok(Self { inputs, outputs, weights, bias })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs,
                x.len()
            )));
        }
        Ok((0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect())
    }

    /// Accumulates weight and bias gradients; returns `∂L/∂x`.
    pub fn backward(
        &self,
        x: &[f64],
        grad_y: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) -> Vec<f64> {
        let mut gx = vec![0.0; self.inputs];
        for (o, &g) in grad_y.iter().enumerate() {
            grad_b[o] += g;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grad_w[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                gx[i] += g * row[i];
            }
        }
        gx
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// 2x2 max pooling over `[C, H, W]`; returns the pooled tensor and the flat
/// source index of every output.
pub fn maxpool2(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = match *x.shape() {
        [c, h, w] => (c, h, w),
        ref s => return Err(Error::Shape(format!("pooling expects [C, H, W], got {s:?}"))),
    };
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros(vec![c, ho, wo]);
    let mut arg = Vec::with_capacity(c * ho * wo);
    let xs = x.data();
    for ch in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let mut best = usize::MAX;
                let mut val = f64::NEG_INFINITY;
                for di in 0..2 {
                    for dj in 0..2 {
                        let idx = (ch * h + 2 * i + di) * w + 2 * j + dj;
                        if xs[idx] > val {
                            val = xs[idx];
                            best = idx;
                        }
                    }
                }
                out.data_mut()[(ch * ho + i) * wo + j] = val;
                arg.push(best);
            }
        }
    }
    Ok((out, arg))
}

/// Routes pooled gradients back to the winning inputs.
pub fn maxpool2_backward(input_shape: &[usize], argmax: &[usize], grad: &[f64]) -> Tensor {
    let mut g = Tensor::zeros(input_shape.to_vec());
    for (&i, &v) in argmax.iter().zip(grad) {
        g.data_mut()[i] += v;
    }
    g
}

/// Gradient of `min(max(z, 0), cap)`: passes where `0 < z < cap`.
pub fn cap_backward(pre: &[f64], grad: &mut [f64], cap_c: f64) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if !(z > 0.0 && z < cap_c) {
            *g = 0.0;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_picks_max() {
        let x = Tensor::new(vec![1, 2, 4], vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 9.0, -1.0]).unwrap();
        let (p, arg) = maxpool2(&x).unwrap();
        assert_eq!(p.data(), &[5.0, 9.0]);
        assert_eq!(arg, vec![1, 6]);
        let g = maxpool2_backward(x.shape(), &arg, &[1.0, 2.0]);
        assert_eq!(g.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn dense_forward_backward() {
        let d = Dense::new(2, 1, vec![2.0, -1.0], vec![0.5]).unwrap();
        assert_eq!(d.forward(&[1.0, 3.0]).unwrap(), vec![-0.5]);
        let mut gw = vec![0.0; 2];
        let mut gb = vec![0.0; 1];
        let gx = d.backward(&[1.0, 3.0], &[1.0], &mut gw, &mut gb);
        assert_eq!(gx, vec![2.0, -1.0]);
        assert_eq!(gw, vec![1.0, 3.0]);
        assert_eq!(gb, vec![1.0]);
    }
}
