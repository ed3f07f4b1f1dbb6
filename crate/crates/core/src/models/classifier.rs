//! Image classifier with Fourier convolution layers.
//!
//! conv(5x5, 1->8) + bias -> cap -> 2x2 max-pool -> conv(5x5, 8->16) + bias
//! -> cap -> 2x2 max-pool -> dense(->10) -> softmax.

use rand_distr::{Distribution, Normal};

use super::direct::{conv_2d_backward, direct_conv_2d, ConvMode};
use super::layers::{cap_backward, maxpool2, maxpool2_backward, Dense};
use crate::encode::{cap_activation, NoiseModel};
use crate::error::{Error, Result};
use crate::fourier_conv::{FourierConvLayer, PreparedLayer, Simulator};
use crate::rng;
use crate::tensor::Tensor;
use crate::train::{softmax, softmax_cross_entropy, BatchOutput, Trainable};

/// Value substituted for every pixel of an all-zero image, which has no
/// amplitude encoding.
pub const ZERO_IMAGE_FLOOR: f64 = 1e-6;

/// Which convolution the layers run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvBackend {
    /// The simulated Fourier layer.
    #[default]
    Quantum,
    /// Classical nested-sum convolution with the same kernels.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub image_size: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub kernel_size: usize,
    pub classes: usize,
    pub cap_c: f64,
    pub seed: u64,
    pub simulator: Simulator,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            image_size: 28,
            conv1_channels: 8,
            conv2_channels: 16,
            kernel_size: 5,
            classes: 10,
            cap_c: 10.0,
            seed: 0,
            simulator: Simulator::Fft,
        }
    }
}

/// A grayscale image with pixels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub pixels: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QfcnClassifier {
    size: usize,
    cap_c: f64,
    conv1: FourierConvLayer,
    bias1: Vec<f64>,
    conv2: FourierConvLayer,
    bias2: Vec<f64>,
    dense: Dense,
    pub noise: NoiseModel,
    pub backend: ConvBackend,
}

struct Cache {
    x0: Tensor,
    z1: Tensor,
    a1_shape: Vec<usize>,
    arg1: Vec<usize>,
    p1: Tensor,
    z2: Tensor,
    a2_shape: Vec<usize>,
    arg2: Vec<usize>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

/// Per-call state: prepared layers or classical kernels.
struct Engines<'a> {
    q1: Option<PreparedLayer<'a>>,
    q2: Option<PreparedLayer<'a>>,
    k1: Tensor,
    k2: Tensor,
}

fn gaussian(len: usize, std: f64, r: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    let d = Normal::new(0.0, std).expect("positive std");
    (0..len).map(|_| d.sample(r)).collect()
}

fn add_bias(t: &mut Tensor, bias: &[f64]) {
    for (c, b) in bias.iter().enumerate() {
        t.slab_mut(c).iter_mut().for_each(|v| *v += b);
    }
}

/// Builds the classifier with seeded random weights.
pub fn build_mnist_qfcn(config: &ClassifierConfig) -> Result<QfcnClassifier> {
    QfcnClassifier::new(config)
}

impl QfcnClassifier {
    pub fn new(config: &ClassifierConfig) -> Result<Self> {
        let k = config.kernel_size;
        let s1 = config.image_size;
        if k == 0 || s1 < k + 1 {
            return Err(Error::Shape(format!("image size {s1} incompatible with kernel {k}")));
        }
        let s2 = (s1 - k + 1) / 2;
        if s2 < k + 1 {
            return Err(Error::Shape(format!("second stage size {s2} incompatible with kernel {k}")));
        }
        let s3 = (s2 - k + 1) / 2;
        let (c1, c2) = (config.conv1_channels, config.conv2_channels);
        let mut r = rng::stream(config.seed, 0);
        let k1 = Tensor::new(
            vec![c1, 1, k, k],
            gaussian(c1 * k * k, (2.0 / (k * k) as f64).sqrt(), &mut r),
        )?;
        let k2 = Tensor::new(
            vec![c2, c1, k, k],
            gaussian(c2 * c1 * k * k, (2.0 / (c1 * k * k) as f64).sqrt(), &mut r),
        )?;
        let features = c2 * s3 * s3;
        let dense = Dense::new(
            features,
            config.classes,
            gaussian(features * config.classes, (1.0 / features as f64).sqrt(), &mut r),
            vec![0.0; config.classes],
        )?;
        Ok(Self {
            size: s1,
            cap_c: config.cap_c,
            conv1: FourierConvLayer::new(&[s1, s1], &k1, ConvMode::Linear)?
                .with_simulator(config.simulator),
            bias1: vec![0.0; c1],
            conv2: FourierConvLayer::new(&[s2, s2], &k2, ConvMode::Linear)?
                .with_simulator(config.simulator),
            bias2: vec![0.0; c2],
            dense,
            noise: NoiseModel { cap_c: config.cap_c, ..NoiseModel::noiseless() },
            backend: ConvBackend::Quantum,
        })
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    /// Same weights, classical convolutions.
    pub fn twin(&self) -> Self {
        Self { backend: ConvBackend::Direct, ..self.clone() }
    }

    pub fn set_simulator(&mut self, simulator: Simulator) {
        self.conv1.set_simulator(simulator);
        self.conv2.set_simulator(simulator);
    }

    pub fn conv_layers(&self) -> [&FourierConvLayer; 2] {
        [&self.conv1, &self.conv2]
    }

    fn engines(&self) -> Result<Engines<'_>> {
        let quantum = self.backend == ConvBackend::Quantum;
        Ok(Engines {
            q1: if quantum { Some(self.conv1.prepare()?) } else { None },
            q2: if quantum { Some(self.conv2.prepare()?) } else { None },
            k1: self.conv1.kernel_tensor(),
            k2: self.conv2.kernel_tensor(),
        })
    }

    fn conv(
        prepared: &Option<PreparedLayer<'_>>,
        kernel: &Tensor,
        x: &Tensor,
        noise: &NoiseModel,
    ) -> Result<Tensor> {
        match prepared {
            Some(p) => Ok(p.forward(x, noise)?.output),
            None => direct_conv_2d(x, kernel, ConvMode::Linear),
        }
    }

    fn input_tensor(&self, image: &[f64]) -> Result<Tensor> {
        if image.len() != self.size * self.size {
            return Err(Error::Shape(format!(
                "expected a {0}x{0} image ({1} pixels), got {2}",
                self.size,
                self.size * self.size,
                image.len()
            )));
        }
        let mut pixels = image.to_vec();
        if pixels.iter().all(|&v| v == 0.0) {
            pixels.iter_mut().for_each(|v| *v = ZERO_IMAGE_FLOOR);
        }
        Tensor::new(vec![1, self.size, self.size], pixels)
    }

    fn forward(&self, e: &Engines<'_>, image: &[f64], noise: &NoiseModel) -> Result<Cache> {
        let x0 = self.input_tensor(image)?;
        let mut z1 = Self::conv(&e.q1, &e.k1, &x0, &noise.derive(1))?;
        add_bias(&mut z1, &self.bias1);
        let a1 = Tensor::new(z1.shape().to_vec(), cap_activation(z1.data(), self.cap_c))?;
        let (p1, arg1) = maxpool2(&a1)?;
        let mut z2 = Self::conv(&e.q2, &e.k2, &p1, &noise.derive(2))?;
        add_bias(&mut z2, &self.bias2);
        let a2 = Tensor::new(z2.shape().to_vec(), cap_activation(z2.data(), self.cap_c))?;
        let (p2, arg2) = maxpool2(&a2)?;
        let features = p2.into_data();
        let logits = self.dense.forward(&features)?;
        Ok(Cache {
            x0,
            z1,
            a1_shape: a1.shape().to_vec(),
            arg1,
            p1,
            z2,
            a2_shape: a2.shape().to_vec(),
            arg2,
            features,
            logits,
        })
    }

    /// Gradient of the loss with `grad_logits` at the logits, treating the
    /// convolutions as their noiseless classical equivalents.
    fn backward(&self, e: &Engines<'_>, cache: &Cache, grad_logits: &[f64]) -> Result<Vec<f64>> {
        let mut gw = vec![0.0; self.dense.weights.len()];
        let mut gb = vec![0.0; self.dense.bias.len()];
        let gfeat = self.dense.backward(&cache.features, grad_logits, &mut gw, &mut gb);
        let mut ga2 = maxpool2_backward(&cache.a2_shape, &cache.arg2, &gfeat);
        cap_backward(cache.z2.data(), ga2.data_mut(), self.cap_c);
        let gbias2: Vec<f64> =
            (0..self.bias2.len()).map(|c| ga2.slab(c).iter().sum()).collect();
        let (gp1, gk2) = conv_2d_backward(&cache.p1, &e.k2, &ga2, ConvMode::Linear)?;
        let mut ga1 = maxpool2_backward(&cache.a1_shape, &cache.arg1, gp1.data());
        cap_backward(cache.z1.data(), ga1.data_mut(), self.cap_c);
        let gbias1: Vec<f64> =
            (0..self.bias1.len()).map(|c| ga1.slab(c).iter().sum()).collect();
        let (_, gk1) = conv_2d_backward(&cache.x0, &e.k1, &ga1, ConvMode::Linear)?;
        let mut grad = self.conv1.kernel_grad_to_params(&gk1)?;
        grad.extend(gbias1);
        grad.extend(self.conv2.kernel_grad_to_params(&gk2)?);
        grad.extend(gbias2);
        grad.extend(gw);
        grad.extend(gb);
        Ok(grad)
    }

    /// Logits for one image under `noise`.
    pub fn logits_with_noise(&self, image: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
        let e = self.engines()?;
        Ok(self.forward(&e, image, noise)?.logits)
    }

    pub fn logits(&self, image: &[f64]) -> Result<Vec<f64>> {
        self.logits_with_noise(image, &self.noise)
    }

    /// Class probabilities for one image.
    pub fn classify(&self, image: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(image)?))
    }

    pub fn predict(&self, image: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(image)?))
    }

    /// Mean cross-entropy and accuracy over `data`; image `i` uses noise
    /// stream `noise.derive(i)`.
    pub fn evaluate(&self, data: &[ImageSample], noise: &NoiseModel) -> Result<(f64, f64)> {
        let e = self.engines()?;
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (i, s) in data.iter().enumerate() {
            let cache = self.forward(&e, &s.pixels, &noise.derive(i as u64))?;
            let (l, _, _) = softmax_cross_entropy(&cache.logits, s.label)?;
            loss += l;
            correct += usize::from(argmax(&cache.logits) == s.label);
        }
        let n = data.len().max(1) as f64;
        Ok((loss / n, correct as f64 / n))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

impl Trainable for QfcnClassifier {
    type Sample = ImageSample;

    fn params(&self) -> Vec<f64> {
        let mut p = self.conv1.params();
        p.extend(&self.bias1);
        p.extend(self.conv2.params());
        p.extend(&self.bias2);
        p.extend(&self.dense.weights);
        p.extend(&self.dense.bias);
        p
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.conv1.param_count()
            + self.bias1.len()
            + self.conv2.param_count()
            + self.bias2.len()
            + self.dense.param_count();
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "classifier has {expected} parameters, got {}",
                params.len()
            )));
        }
        let mut rest = params;
        let mut take = |n: usize| {
            let (a, b) = rest.split_at(n);
            rest = b;
            a
        };
        self.conv1.set_params(take(self.conv1.param_count()))?;
        self.bias1 = take(self.bias1.len()).to_vec();
        self.conv2.set_params(take(self.conv2.param_count()))?;
        self.bias2 = take(self.bias2.len()).to_vec();
        self.dense.weights = take(self.dense.weights.len()).to_vec();
        self.dense.bias = take(self.dense.bias.len()).to_vec();
        Ok(())
    }

    fn angle_mask(&self) -> Vec<bool> {
        let mut m = self.conv1.angle_mask();
        m.extend(std::iter::repeat_n(false, self.bias1.len()));
        m.extend(self.conv2.angle_mask());
        m.extend(std::iter::repeat_n(false, self.bias2.len() + self.dense.param_count()));
        m
    }

    fn batch_grad(&self, batch: &[&ImageSample], noise: &NoiseModel) -> Result<BatchOutput> {
        let e = self.engines()?;
        let mut grad = vec![0.0; self.params().len()];
        let mut loss = 0.0;
        let mut correct = 0.0;
        for (i, s) in batch.iter().enumerate() {
            let cache = self.forward(&e, &s.pixels, &noise.derive(i as u64))?;
            let (l, _, gl) = softmax_cross_entropy(&cache.logits, s.label)?;
            loss += l;
            if argmax(&cache.logits) == s.label {
                correct += 1.0;
            }
            let g = self.backward(&e, &cache, &gl)?;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(BatchOutput { loss: loss / n, grad, metric_sum: correct, metric_count: batch.len() })
    }

    fn batch_loss(&self, batch: &[&ImageSample], noise: &NoiseModel) -> Result<f64> {
        let e = self.engines()?;
        let mut loss = 0.0;
        for (i, s) in batch.iter().enumerate() {
            let cache = self.forward(&e, &s.pixels, &noise.derive(i as u64))?;
            loss += softmax_cross_entropy(&cache.logits, s.label)?.0;
        }
        Ok(loss / batch.len().max(1) as f64)
    }

    fn occurrence_angles(&self) -> Vec<f64> {
        let mut o = self.conv1.occurrence_angles();
        o.extend(self.conv2.occurrence_angles());
        o
    }

    fn with_occurrence_angles(&self, occ: &[f64]) -> Result<Self> {
        let n1 = self.conv1.occurrence_count();
        if occ.len() != n1 + self.conv2.occurrence_count() {
            return Err(Error::Shape("wrong number of occurrence angles".into()));
        }
        Ok(Self {
            conv1: self.conv1.with_occurrence_angles(&occ[..n1])?,
            conv2: self.conv2.with_occurrence_angles(&occ[n1..])?,
            ..self.clone()
        })
    }

    fn occurrence_grad_to_params(&self, grad_occ: &[f64]) -> Result<Vec<f64>> {
        let n1 = self.conv1.occurrence_count();
        let mut g = self.conv1.occurrence_grad_to_params(&grad_occ[..n1])?;
        g.extend(vec![0.0; self.bias1.len()]);
        g.extend(self.conv2.occurrence_grad_to_params(&grad_occ[n1..])?);
        g.extend(vec![0.0; self.bias2.len() + self.dense.param_count()]);
        Ok(g)
    }
}
