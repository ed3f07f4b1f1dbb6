//! Spatio-temporal forecaster with Fourier temporal convolutions.
//!
//! Per node: temporal conv (1 -> 2C, width Kt) + bias -> gated linear unit
//! `P ⊙ σ(Q)` -> graph mixing `relu(Ŵ H Θ + b)` across nodes -> temporal
//! conv (C -> C, width Kt) + bias -> shared dense head -> next value.

use rand_distr::{Distribution, Normal};

use super::dataset::{normalized_adjacency, ForecastSample};
use super::direct::{conv_1d_backward, direct_conv_1d, ConvMode};
use super::classifier::ConvBackend;
use super::layers::{sigmoid, Dense};
use crate::encode::NoiseModel;
use crate::error::{Error, Result};
use crate::fourier_conv::{FourierConvLayer, PreparedLayer, Simulator};
use crate::rng;
use crate::tensor::Tensor;
use crate::train::{mse_loss, BatchOutput, Trainable};

#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterConfig {
    pub nodes: usize,
    /// Input window length M.
    pub window: usize,
    /// Temporal kernel width Kt.
    pub kernel_width: usize,
    pub channels: usize,
    /// `V × V` nonnegative weighted adjacency.
    pub adjacency: Vec<f64>,
    pub seed: u64,
    pub simulator: Simulator,
}

impl ForecasterConfig {
    pub fn new(nodes: usize, adjacency: Vec<f64>) -> Self {
        Self {
            nodes,
            window: 12,
            kernel_width: 3,
            channels: 8,
            adjacency,
            seed: 0,
            simulator: Simulator::Fft,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QfTemporalForecaster {
    nodes: usize,
    window: usize,
    kernel_width: usize,
    channels: usize,
    mixing: Vec<f64>,
    temporal1: FourierConvLayer,
    bias1: Vec<f64>,
    /// `C × C` channel map of the graph convolution, `theta[i * C + o]`.
    theta: Vec<f64>,
    graph_bias: Vec<f64>,
    temporal2: FourierConvLayer,
    bias2: Vec<f64>,
    head: Dense,
    pub noise: NoiseModel,
    pub backend: ConvBackend,
}

pub fn build_qf_forecaster(config: &ForecasterConfig) -> Result<QfTemporalForecaster> {
    QfTemporalForecaster::new(config)
}

struct Engines<'a> {
    q1: Option<PreparedLayer<'a>>,
    q2: Option<PreparedLayer<'a>>,
    k1: Tensor,
    k2: Tensor,
}

struct NodeCache {
    input: Tensor,
    /// Gate inputs `P` and `Q`, `[C, L1]` each.
    p: Vec<f64>,
    q: Vec<f64>,
    /// Pre-activation of the graph convolution `[C, L1]`.
    mixed_pre: Vec<f64>,
    /// Graph convolution output `[C, L1]`.
    mixed: Tensor,
    /// Flattened second temporal output `[C · L2]`.
    features: Vec<f64>,
}

struct Cache {
    nodes: Vec<NodeCache>,
    /// `Σ_u Ŵ[v, u] H_u`, per node.
    aggregated: Vec<Vec<f64>>,
    prediction: Vec<f64>,
}

fn normal(r: &mut rand_chacha::ChaCha8Rng, std: f64, n: usize) -> Vec<f64> {
    let d = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| d.sample(r)).collect()
}

impl QfTemporalForecaster {
    pub fn new(config: &ForecasterConfig) -> Result<Self> {
        let (v, m, kt, c) = (config.nodes, config.window, config.kernel_width, config.channels);
        if v == 0 || c == 0 || kt == 0 {
            return Err(Error::InvalidArgument("nodes, channels and Kt must be >= 1".into()));
        }
        if 2 * (kt - 1) >= m {
            return Err(Error::InvalidArgument(format!(
                "window {m} too short for two temporal layers of width {kt}"
            )));
        }
        let mixing = normalized_adjacency(&config.adjacency, v)?;
        if config.adjacency.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("adjacency must be nonnegative".into()));
        }
        let mut r = rng::stream(config.seed, 0);
        let k1 = Tensor::new(vec![2 * c, 1, kt], normal(&mut r, (1.0 / kt as f64).sqrt(), 2 * c * kt))?;
        let k2 = Tensor::new(
            vec![c, c, kt],
            normal(&mut r, (1.0 / (c * kt) as f64).sqrt(), c * c * kt),
        )?;
        let l1 = m - kt + 1;
        let l2 = l1 - kt + 1;
        let temporal1 = FourierConvLayer::new(&[m], &k1, ConvMode::Linear)?
            .with_simulator(config.simulator);
        let temporal2 = FourierConvLayer::new(&[l1], &k2, ConvMode::Linear)?
            .with_simulator(config.simulator);
        let theta = normal(&mut r, (2.0 / c as f64).sqrt(), c * c);
        let head = Dense::new(
            c * l2,
            1,
            normal(&mut r, (1.0 / (c * l2) as f64).sqrt(), c * l2),
            vec![0.0],
        )?;
        Ok(Self {
            nodes: v,
            window: m,
            kernel_width: kt,
            channels: c,
            mixing,
            temporal1,
            bias1: vec![0.0; 2 * c],
            theta,
            graph_bias: vec![0.0; c],
            temporal2,
            bias2: vec![0.0; c],
            head,
            noise: NoiseModel::noiseless(),
            backend: ConvBackend::Quantum,
        })
    }

    /// Delta temporal kernels on channel 0, a saturated gate, identity
    /// channel map and a head reading the last step: a constant positive
    /// series is forecast unchanged.
    pub fn pass_through(config: &ForecasterConfig) -> Result<Self> {
        let mut f = Self::new(config)?;
        let (c, kt) = (f.channels, f.kernel_width);
        let mut k1 = Tensor::zeros(vec![2 * c, 1, kt]);
        k1.data_mut()[0] = 1.0;
        let mut k2 = Tensor::zeros(vec![c, c, kt]);
        k2.data_mut()[0] = 1.0;
        f.temporal1.set_kernel(&k1)?;
        f.temporal2.set_kernel(&k2)?;
        f.bias1 = vec![0.0; 2 * c];
        f.bias1[c..].iter_mut().for_each(|b| *b = 40.0);
        f.theta = (0..c * c).map(|i| if i / c == i % c { 1.0 } else { 0.0 }).collect();
        f.graph_bias = vec![0.0; c];
        f.bias2 = vec![0.0; c];
        let l2 = f.head.inputs / c;
        f.head.weights = vec![0.0; c * l2];
        f.head.weights[l2 - 1] = 1.0;
        f.head.bias = vec![0.0];
        Ok(f)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    /// Same weights with classical direct convolutions.
    pub fn twin(&self) -> Self {
        Self { backend: ConvBackend::Direct, ..self.clone() }
    }

    pub fn set_simulator(&mut self, simulator: Simulator) {
        self.temporal1.set_simulator(simulator);
        self.temporal2.set_simulator(simulator);
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn engines(&self) -> Result<Engines<'_>> {
        let quantum = self.backend == ConvBackend::Quantum;
        Ok(Engines {
            q1: if quantum { Some(self.temporal1.prepare()?) } else { None },
            q2: if quantum { Some(self.temporal2.prepare()?) } else { None },
            k1: self.temporal1.kernel_tensor(),
            k2: self.temporal2.kernel_tensor(),
        })
    }

    /// Steps `[Kt-1, len)` of the full linear convolution, which only use
    /// in-range inputs.
    fn temporal(
        &self,
        prepared: &Option<PreparedLayer<'_>>,
        kernel: &Tensor,
        x: &Tensor,
        bias: &[f64],
        noise: &NoiseModel,
    ) -> Result<Tensor> {
        let full = match prepared {
            Some(p) => p.forward(x, noise)?.output,
            None => direct_conv_1d(x, kernel, ConvMode::Linear)?,
        };
        let (c_out, len) = (full.shape()[0], x.shape()[1]);
        let lo = self.kernel_width - 1;
        let mut out = Vec::with_capacity(c_out * (len - lo));
        for o in 0..c_out {
            out.extend(full.slab(o)[lo..len].iter().map(|v| v + bias[o]));
        }
        Tensor::new(vec![c_out, len - lo], out)
    }

    fn forward(&self, e: &Engines<'_>, window: &[f64], noise: &NoiseModel) -> Result<Cache> {
        let (v_count, m, c) = (self.nodes, self.window, self.channels);
        if window.len() != v_count * m {
            return Err(Error::Shape(format!(
                "window must hold {m} steps for {v_count} nodes ({} values), got {}",
                v_count * m,
                window.len()
            )));
        }
        let mut gated = Vec::with_capacity(v_count);
        let mut partial = Vec::with_capacity(v_count);
        for v in 0..v_count {
            let input = Tensor::new(vec![1, m], window[v * m..(v + 1) * m].to_vec())?;
            let nn = noise.derive(v as u64);
            let z = self.temporal(&e.q1, &e.k1, &input, &self.bias1, &nn.derive(1))?;
            let l1 = z.shape()[1];
            let p = z.data()[..c * l1].to_vec();
            let q = z.data()[c * l1..].to_vec();
            let h: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a * sigmoid(*b)).collect();
            gated.push(Tensor::new(vec![c, l1], h)?);
            partial.push((input, p, q));
        }
        let l1 = gated[0].shape()[1];
        let mut aggregated = Vec::with_capacity(v_count);
        let mut nodes = Vec::with_capacity(v_count);
        let mut prediction = Vec::with_capacity(v_count);
        for (v, (input, p, q)) in partial.into_iter().enumerate() {
            let mut agg = vec![0.0; c * l1];
            for (u, g) in gated.iter().enumerate() {
                let w = self.mixing[v * v_count + u];
                if w != 0.0 {
                    agg.iter_mut().zip(g.data()).for_each(|(a, x)| *a += w * x);
                }
            }
            let mut pre = vec![0.0; c * l1];
            for o in 0..c {
                for i in 0..c {
                    let th = self.theta[i * c + o];
                    for t in 0..l1 {
                        pre[o * l1 + t] += agg[i * l1 + t] * th;
                    }
                }
                for t in 0..l1 {
                    pre[o * l1 + t] += self.graph_bias[o];
                }
            }
            let mixed = Tensor::new(vec![c, l1], pre.iter().map(|x| x.max(0.0)).collect())?;
            let nn = noise.derive(v as u64);
            let z2 = self.temporal(&e.q2, &e.k2, &mixed, &self.bias2, &nn.derive(2))?;
            let features = z2.into_data();
            prediction.push(self.head.forward(&features)?[0]);
            aggregated.push(agg);
            nodes.push(NodeCache {
                input,
                p,
                q,
                mixed_pre: pre,
                mixed,
                features,
            });
        }
        Ok(Cache { nodes, aggregated, prediction })
    }

    /// Zero-pads a gradient on the valid steps back to the full linear
    /// convolution length.
    fn unslice(&self, grad: &[f64], c_out: usize, valid: usize, full: usize) -> Result<Tensor> {
        let lo = self.kernel_width - 1;
        let mut g = Tensor::zeros(vec![c_out, full]);
        for o in 0..c_out {
            g.slab_mut(o)[lo..lo + valid].copy_from_slice(&grad[o * valid..(o + 1) * valid]);
        }
        Ok(g)
    }

    fn backward(&self, e: &Engines<'_>, cache: &Cache, grad_pred: &[f64]) -> Result<Vec<f64>> {
        let (v_count, c, kt) = (self.nodes, self.channels, self.kernel_width);
        let l1 = self.window - kt + 1;
        let l2 = l1 - kt + 1;
        let mut g_head_w = vec![0.0; self.head.weights.len()];
        let mut g_head_b = vec![0.0; 1];
        let mut g_k2 = Tensor::zeros(e.k2.shape().to_vec());
        let mut g_b2 = vec![0.0; c];
        let mut g_theta = vec![0.0; c * c];
        let mut g_gb = vec![0.0; c];
        let mut g_gated = vec![vec![0.0; c * l1]; v_count];
        for (v, node) in cache.nodes.iter().enumerate() {
            let g_feat =
                self.head.backward(&node.features, &[grad_pred[v]], &mut g_head_w, &mut g_head_b);
            for o in 0..c {
                g_b2[o] += g_feat[o * l2..(o + 1) * l2].iter().sum::<f64>();
            }
            let g_full = self.unslice(&g_feat, c, l2, l1 + kt - 1)?;
            let (g_mixed, gk) = conv_1d_backward(&node.mixed, &e.k2, &g_full, ConvMode::Linear)?;
            g_k2.data_mut().iter_mut().zip(gk.data()).for_each(|(a, b)| *a += b);
            let g_pre: Vec<f64> = g_mixed
                .data()
                .iter()
                .zip(&node.mixed_pre)
                .map(|(g, &z)| if z > 0.0 { *g } else { 0.0 })
                .collect();
            let agg = &cache.aggregated[v];
            let mut g_agg = vec![0.0; c * l1];
            for o in 0..c {
                for t in 0..l1 {
                    let g = g_pre[o * l1 + t];
                    if g == 0.0 {
                        continue;
                    }
                    g_gb[o] += g;
                    for i in 0..c {
                        g_theta[i * c + o] += g * agg[i * l1 + t];
                        g_agg[i * l1 + t] += g * self.theta[i * c + o];
                    }
                }
            }
            for (u, gg) in g_gated.iter_mut().enumerate() {
                let w = self.mixing[v * v_count + u];
                if w != 0.0 {
                    gg.iter_mut().zip(&g_agg).for_each(|(a, b)| *a += w * b);
                }
            }
        }
        let mut g_k1 = Tensor::zeros(e.k1.shape().to_vec());
        let mut g_b1 = vec![0.0; 2 * c];
        for (node, g_h) in cache.nodes.iter().zip(&g_gated) {
            let mut g_z = vec![0.0; 2 * c * l1];
            for i in 0..c * l1 {
                let s = sigmoid(node.q[i]);
                g_z[i] = g_h[i] * s;
                g_z[c * l1 + i] = g_h[i] * node.p[i] * s * (1.0 - s);
            }
            for o in 0..2 * c {
                g_b1[o] += g_z[o * l1..(o + 1) * l1].iter().sum::<f64>();
            }
            let g_full = self.unslice(&g_z, 2 * c, l1, self.window + kt - 1)?;
            let (_, gk) = conv_1d_backward(&node.input, &e.k1, &g_full, ConvMode::Linear)?;
            g_k1.data_mut().iter_mut().zip(gk.data()).for_each(|(a, b)| *a += b);
        }
        let mut grad = self.temporal1.kernel_grad_to_params(&g_k1)?;
        grad.extend(g_b1);
        grad.extend(g_theta);
        grad.extend(g_gb);
        grad.extend(self.temporal2.kernel_grad_to_params(&g_k2)?);
        grad.extend(g_b2);
        grad.extend(g_head_w);
        grad.extend(g_head_b);
        Ok(grad)
    }

    /// Next-step prediction for every node from a node-major window.
    pub fn forecast_with_noise(&self, window: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
        let e = self.engines()?;
        Ok(self.forward(&e, window, noise)?.prediction)
    }

    pub fn forecast(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.forecast_with_noise(window, &self.noise)
    }

    /// `(MAE, MSE)` over `data`; sample `i` uses `noise.derive(i)`.
    pub fn evaluate(&self, data: &[ForecastSample], noise: &NoiseModel) -> Result<(f64, f64)> {
        let e = self.engines()?;
        let mut abs = 0.0;
        let mut sq = 0.0;
        let mut n = 0usize;
        for (i, s) in data.iter().enumerate() {
            let pred = self.forward(&e, &s.window, &noise.derive(i as u64))?.prediction;
            for (p, t) in pred.iter().zip(&s.target) {
                abs += (p - t).abs();
                sq += (p - t).powi(2);
            }
            n += pred.len();
        }
        let n = n.max(1) as f64;
        Ok((abs / n, sq / n))
    }

    fn param_blocks(&self) -> [usize; 8] {
        [
            self.temporal1.param_count(),
            self.bias1.len(),
            self.theta.len(),
            self.graph_bias.len(),
            self.temporal2.param_count(),
            self.bias2.len(),
            self.head.weights.len(),
            self.head.bias.len(),
        ]
    }
}

pub fn forecast(model: &QfTemporalForecaster, window: &[f64]) -> Result<Vec<f64>> {
    model.forecast(window)
}

impl Trainable for QfTemporalForecaster {
    type Sample = ForecastSample;

    fn params(&self) -> Vec<f64> {
        let mut p = self.temporal1.params();
        p.extend(&self.bias1);
        p.extend(&self.theta);
        p.extend(&self.graph_bias);
        p.extend(self.temporal2.params());
        p.extend(&self.bias2);
        p.extend(&self.head.weights);
        p.extend(&self.head.bias);
        p
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let blocks = self.param_blocks();
        let expected: usize = blocks.iter().sum();
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "forecaster has {expected} parameters, got {}",
                params.len()
            )));
        }
        let mut rest = params;
        let mut take = |n: usize| {
            let (a, b) = rest.split_at(n);
            rest = b;
            a
        };
        self.temporal1.set_params(take(blocks[0]))?;
        self.bias1 = take(blocks[1]).to_vec();
        self.theta = take(blocks[2]).to_vec();
        self.graph_bias = take(blocks[3]).to_vec();
        self.temporal2.set_params(take(blocks[4]))?;
        self.bias2 = take(blocks[5]).to_vec();
        self.head.weights = take(blocks[6]).to_vec();
        self.head.bias = take(blocks[7]).to_vec();
        Ok(())
    }

    fn angle_mask(&self) -> Vec<bool> {
        let b = self.param_blocks();
        let mut m = self.temporal1.angle_mask();
        m.extend(std::iter::repeat_n(false, b[1] + b[2] + b[3]));
        m.extend(self.temporal2.angle_mask());
        m.extend(std::iter::repeat_n(false, b[5] + b[6] + b[7]));
        m
    }

    fn batch_grad(&self, batch: &[&ForecastSample], noise: &NoiseModel) -> Result<BatchOutput> {
        let e = self.engines()?;
        let mut grad = vec![0.0; self.param_blocks().iter().sum()];
        let mut loss = 0.0;
        let mut abs = 0.0;
        for (i, s) in batch.iter().enumerate() {
            let cache = self.forward(&e, &s.window, &noise.derive(i as u64))?;
            let (l, g) = mse_loss(&cache.prediction, &s.target)?;
            loss += l;
            abs += cache.prediction.iter().zip(&s.target).map(|(p, t)| (p - t).abs()).sum::<f64>();
            let gp = self.backward(&e, &cache, &g)?;
            grad.iter_mut().zip(gp).for_each(|(a, b)| *a += b);
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(BatchOutput {
            loss: loss / n,
            grad,
            metric_sum: abs,
            metric_count: batch.len() * self.nodes,
        })
    }

    fn batch_loss(&self, batch: &[&ForecastSample], noise: &NoiseModel) -> Result<f64> {
        let e = self.engines()?;
        let mut loss = 0.0;
        for (i, s) in batch.iter().enumerate() {
            let cache = self.forward(&e, &s.window, &noise.derive(i as u64))?;
            loss += mse_loss(&cache.prediction, &s.target)?.0;
        }
        Ok(loss / batch.len().max(1) as f64)
    }

    fn occurrence_angles(&self) -> Vec<f64> {
        let mut o = self.temporal1.occurrence_angles();
        o.extend(self.temporal2.occurrence_angles());
        o
    }

    fn with_occurrence_angles(&self, occ: &[f64]) -> Result<Self> {
        let n1 = self.temporal1.occurrence_count();
        if occ.len() != n1 + self.temporal2.occurrence_count() {
            return Err(Error::Shape("wrong number of occurrence angles".into()));
        }
        Ok(Self {
            temporal1: self.temporal1.with_occurrence_angles(&occ[..n1])?,
            temporal2: self.temporal2.with_occurrence_angles(&occ[n1..])?,
            ..self.clone()
        })
    }

    fn occurrence_grad_to_params(&self, grad_occ: &[f64]) -> Result<Vec<f64>> {
        let b = self.param_blocks();
        let n1 = self.temporal1.occurrence_count();
        let mut g = self.temporal1.occurrence_grad_to_params(&grad_occ[..n1])?;
        g.extend(vec![0.0; b[1] + b[2] + b[3]]);
        g.extend(self.temporal2.occurrence_grad_to_params(&grad_occ[n1..])?);
        g.extend(vec![0.0; b[5] + b[6] + b[7]]);
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::dataset::synth_st_dataset;
    use crate::train::{finite_difference_model_grad, relative_error};

    fn small_config() -> ForecasterConfig {
        let d = synth_st_dataset(4, 40, 3).unwrap();
        let mut c = ForecasterConfig::new(4, d.adjacency().to_vec());
        c.window = 8;
        c.channels = 3;
        c
    }

    #[test]
    fn constant_series_is_a_fixed_point() {
        let cfg = small_config();
        for sim in [Simulator::StateVector, Simulator::Fft] {
            let mut f = QfTemporalForecaster::pass_through(&cfg).unwrap();
            f.set_simulator(sim);
            let pred = f.forecast(&[2.5; 32]).unwrap();
            for p in pred {
                assert!((p - 2.5).abs() < 1e-9, "{p}");
            }
        }
    }

    #[test]
    fn twin_matches_without_noise() {
        let cfg = small_config();
        let f = QfTemporalForecaster::new(&cfg).unwrap();
        let d = synth_st_dataset(4, 40, 3).unwrap();
        let s = &d.windows(8..12, 8).unwrap()[0];
        let a = f.forecast(&s.window).unwrap();
        let b = f.twin().forecast(&s.window).unwrap();
        assert!(relative_error(&a, &b) < 1e-9);
    }

    #[test]
    fn short_window_rejected() {
        let f = QfTemporalForecaster::new(&small_config()).unwrap();
        assert!(f.forecast(&[1.0; 8]).is_err());
        let mut cfg = small_config();
        cfg.window = 4;
        assert!(QfTemporalForecaster::new(&cfg).is_err());
    }

    #[test]
    fn analytic_gradient_matches_finite_difference() {
        let cfg = small_config();
        let f = QfTemporalForecaster::new(&cfg).unwrap().twin();
        let d = synth_st_dataset(4, 40, 3).unwrap();
        let w = d.windows(8..11, 8).unwrap();
        let batch: Vec<&ForecastSample> = w.iter().collect();
        let analytic = f.batch_grad(&batch, &NoiseModel::noiseless()).unwrap().grad;
        let fd = finite_difference_model_grad(&f, &batch, 1e-5).unwrap();
        assert!(relative_error(&analytic, &fd) < 1e-5, "{}", relative_error(&analytic, &fd));
    }
}
