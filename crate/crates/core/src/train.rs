//! Gradients and optimisation for hybrid models.
//!
//! Three gradient routes are available: reverse-mode differentiation of the
//! noiseless pipeline, the ±π/2 shift rule evaluated by shifting stored
//! parameters and re-running the circuit, and central finite differences.

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::encode::{NoiseModel, QramAddress, QramStore};
use crate::error::{Error, Result};
use crate::fourier_conv::{qconv_1d, FourierConvLayer, Simulator};
use crate::models::direct::{conv_1d_backward, ConvMode};
use crate::rng;
use crate::statevec::{Gate, StateVector};
use crate::tensor::Tensor;

/// Ordered parameters held in a [`QramStore`] at addresses `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    store: QramStore,
    len: usize,
}

impl ParamVector {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(Self { store: QramStore::from_values(values), len: values.len() })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn address(&self, j: usize) -> QramAddress {
        QramAddress(j as u64)
    }

    pub fn get(&self, j: usize) -> Result<f64> {
        self.store.read(self.address(j))
    }

    pub fn values(&self) -> Vec<f64> {
        self.store.values()
    }

    pub fn store(&self) -> &QramStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut QramStore {
        &mut self.store
    }
}

fn check_index(params: &ParamVector, j: usize) -> Result<()> {
    if j >= params.len() {
        return Err(Error::InvalidArgument(format!(
            "parameter {j} out of range for {} parameters",
            params.len()
        )));
    }
    Ok(())
}

/// Evaluates `loss_fn` with parameter `j` shifted by `delta`, restoring the
/// stored value afterwards whatever the outcome.
fn shifted_eval<F>(loss_fn: &mut F, params: &mut ParamVector, j: usize, delta: f64) -> Result<f64>
where
    F: FnMut(&ParamVector) -> Result<f64>,
{
    let addr = params.address(j);
    let original = params.store_mut().shift(addr, delta)?;
    let value = loss_fn(params);
    params.store_mut().write(addr, original);
    value
}

/// `½[L(θ_j + π/2) − L(θ_j − π/2)]`.
pub fn parameter_shift_grad<F>(mut loss_fn: F, params: &mut ParamVector, j: usize) -> Result<f64>
where
    F: FnMut(&ParamVector) -> Result<f64>,
{
    check_index(params, j)?;
    let plus = shifted_eval(&mut loss_fn, params, j, FRAC_PI_2)?;
    let minus = shifted_eval(&mut loss_fn, params, j, -FRAC_PI_2)?;
    Ok(0.5 * (plus - minus))
}

/// `[L(θ_j + h) − L(θ_j − h)] / 2h`.
pub fn finite_difference_grad<F>(
    mut loss_fn: F,
    params: &mut ParamVector,
    j: usize,
    h: f64,
) -> Result<f64>
where
    F: FnMut(&ParamVector) -> Result<f64>,
{
    check_index(params, j)?;
    let plus = shifted_eval(&mut loss_fn, params, j, h)?;
    let minus = shifted_eval(&mut loss_fn, params, j, -h)?;
    Ok((plus - minus) / (2.0 * h))
}

/// `max|a − b| / max(max|b|, 1e-12)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-12);
    diff / scale
}

/// `<Z>` after `Ry(θ)|0>`, with θ read from address 0.
pub fn ry_z_expectation(params: &ParamVector) -> Result<f64> {
    let mut s = StateVector::zero(1);
    s.apply(&Gate::ry(0, params.get(0)?))?;
    let p = s.probabilities();
    Ok(p[0] - p[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Mse,
    CrossEntropy,
}

/// Loss with mean reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LossSpec {
    pub kind: LossKind,
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, its probabilities and
/// the gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let probs = softmax(logits);
    let loss = -probs[label].max(1e-300).ln();
    let mut grad = probs.clone();
    grad[label] -= 1.0;
    Ok((loss, probs, grad))
}

impl LossSpec {
    pub fn mse() -> Self {
        Self { kind: LossKind::Mse }
    }

    pub fn cross_entropy() -> Self {
        Self { kind: LossKind::CrossEntropy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradMode {
    #[default]
    Analytic,
    ParameterShift,
    FiniteDifference,
}

impl std::str::FromStr for GradMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "parameter-shift" => Ok(Self::ParameterShift),
            "finite-difference" => Ok(Self::FiniteDifference),
            other => Err(Error::InvalidArgument(format!("unknown gradient mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub grad_mode: GradMode,
    /// Multiplicative learning-rate factor applied once per epoch.
    pub lr_decay: f64,
    /// Leading parameters excluded from updates (layer-wise training).
    pub frozen_params: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 16,
            epochs: 10,
            seed: 0,
            grad_mode: GradMode::Analytic,
            lr_decay: 1.0,
            frozen_params: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning rate must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(self.lr_decay > 0.0) || !self.lr_decay.is_finite() {
            return Err(Error::InvalidArgument("lr_decay must be positive".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch as i32)
    }
}

/// Momentum buffer for [`sgd_step`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SgdState {
    velocity: Vec<f64>,
}

impl SgdState {
    pub fn new(len: usize) -> Self {
        Self { velocity: vec![0.0; len] }
    }
}

/// `v ← μv + g; θ ← θ − lr·v`, skipping frozen leading parameters.
pub fn sgd_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut SgdState,
    lr: f64,
    config: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index, value });
    }
    if state.velocity.len() != params.len() {
        state.velocity = vec![0.0; params.len()];
    }
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        if i < config.frozen_params {
            continue;
        }
        let v = &mut state.velocity[i];
        *v = config.momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Loss, gradient and task metric accumulated over one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    /// Mean loss over the batch.
    pub loss: f64,
    /// Gradient of the mean loss.
    pub grad: Vec<f64>,
    /// Sum of the per-sample metric (correct predictions or absolute error).
    pub metric_sum: f64,
    /// Number of values the metric was summed over.
    pub metric_count: usize,
}

/// A model trainable by [`train_epoch`].
pub trait Trainable: Sized {
    type Sample;

    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;
    /// `true` for parameters that are rotation angles of a preparation
    /// circuit.
    fn angle_mask(&self) -> Vec<bool>;

    /// Forward under `noise` with the analytic (noise-free) gradient.
    fn batch_grad(&self, batch: &[&Self::Sample], noise: &NoiseModel) -> Result<BatchOutput>;

    /// Mean loss under `noise`.
    fn batch_loss(&self, batch: &[&Self::Sample], noise: &NoiseModel) -> Result<f64>;

    /// Ry angles of every preparation circuit in the model.
    fn occurrence_angles(&self) -> Vec<f64>;
    fn with_occurrence_angles(&self, occ: &[f64]) -> Result<Self>;
    fn occurrence_grad_to_params(&self, grad_occ: &[f64]) -> Result<Vec<f64>>;
}

/// Gradient of the noiseless batch loss by the shift rule on every gate
/// occurrence, chained to the model's angle parameters.
pub fn shift_rule_angle_grad<M: Trainable>(model: &M, batch: &[&M::Sample]) -> Result<Vec<f64>> {
    let clean = NoiseModel::noiseless();
    let mut pv = ParamVector::from_values(&model.occurrence_angles())?;
    let mut grad_occ = Vec::with_capacity(pv.len());
    for i in 0..pv.len() {
        let g = parameter_shift_grad(
            |p| model.with_occurrence_angles(&p.values())?.batch_loss(batch, &clean),
            &mut pv,
            i,
        )?;
        grad_occ.push(g);
    }
    model.occurrence_grad_to_params(&grad_occ)
}

/// Central finite-difference gradient of the noiseless batch loss.
pub fn finite_difference_model_grad<M: Trainable + Clone>(
    model: &M,
    batch: &[&M::Sample],
    h: f64,
) -> Result<Vec<f64>> {
    let clean = NoiseModel::noiseless();
    let mut pv = ParamVector::from_values(&model.params())?;
    let mut work = model.clone();
    (0..pv.len())
        .map(|j| {
            finite_difference_grad(
                |p| {
                    work.set_params(&p.values())?;
                    work.batch_loss(batch, &clean)
                },
                &mut pv,
                j,
                h,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Accuracy for classifiers, mean absolute error for regressors.
    pub metric: f64,
    pub samples: usize,
}

/// One pass over `data` in a seeded shuffled order.
pub fn train_epoch<M: Trainable + Clone>(
    model: &mut M,
    data: &[M::Sample],
    config: &TrainConfig,
    epoch: usize,
    state: &mut SgdState,
    noise: &NoiseModel,
) -> Result<EpochMetrics> {
    config.validate()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut r = rng::stream(rng::derive(config.seed, epoch as u64), 3);
    order.shuffle(&mut r);
    let lr = config.learning_rate_at(epoch);
    let mut loss_sum = 0.0;
    let mut metric_sum = 0.0;
    let mut metric_count = 0;
    for (b, chunk) in order.chunks(config.batch_size).enumerate() {
        let batch: Vec<&M::Sample> = chunk.iter().map(|&i| &data[i]).collect();
        let batch_noise = noise.derive(((epoch as u64) << 32) | b as u64);
        let out = model.batch_grad(&batch, &batch_noise)?;
        if !out.loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        let grad = match config.grad_mode {
            GradMode::Analytic => out.grad,
            GradMode::ParameterShift => {
                let shifted = shift_rule_angle_grad(model, &batch)?;
                let mask = model.angle_mask();
                out.grad
                    .iter()
                    .zip(&shifted)
                    .zip(&mask)
                    .map(|((a, s), &m)| if m { *s } else { *a })
                    .collect()
            }
            GradMode::FiniteDifference => finite_difference_model_grad(model, &batch, 1e-5)?,
        };
        let mut params = model.params();
        sgd_step(&mut params, &grad, state, lr, config)?;
        model.set_params(&params)?;
        loss_sum += out.loss * batch.len() as f64;
        metric_sum += out.metric_sum;
        metric_count += out.metric_count;
    }
    let n = data.len().max(1) as f64;
    Ok(EpochMetrics {
        epoch,
        mean_loss: loss_sum / n,
        metric: metric_sum / metric_count.max(1) as f64,
        samples: data.len(),
    })
}

/// A single-layer convolution model used to cross-check gradient routes:
/// a fixed input `f` is convolved (circularly) with a trainable kernel and
/// the loss is the quadratic form `yᵀ H y` of a random symmetric `H`, an
/// observable expectation on the kernel state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub layer: FourierConvLayer,
    pub input: Vec<f64>,
    pub observable: Vec<f64>,
    /// Target for the MSE variant of the loss.
    pub target: Vec<f64>,
}

impl ProbeModel {
    /// Random model with signal length `n` (a power of two) and a kernel of
    /// `kernel_len` taps.
    pub fn random(n: usize, kernel_len: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, 0);
        let mut normal = |k: usize| -> Vec<f64> {
            (0..k).map(|_| StandardNormal.sample(&mut r)).collect()
        };
        let input = normal(n);
        let kernel = Tensor::new(vec![1, 1, kernel_len], normal(kernel_len))?;
        let raw = normal(n * n);
        let mut observable = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                observable[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
            }
        }
        let target = normal(n);
        let layer = FourierConvLayer::new(&[n], &kernel, ConvMode::Circular)?
            .with_simulator(Simulator::StateVector);
        Ok(Self { layer, input, observable, target })
    }

    fn n(&self) -> usize {
        self.input.len()
    }

    pub fn output(&self, layer: &FourierConvLayer) -> Result<Vec<f64>> {
        Ok(qconv_1d(&self.input, layer, &NoiseModel::noiseless())?.output.into_data())
    }

    fn quadratic(&self, y: &[f64]) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| y[i] * (0..n).map(|j| self.observable[i * n + j] * y[j]).sum::<f64>())
            .sum()
    }

    /// `yᵀ H y` for the given layer.
    pub fn observable_loss(&self, layer: &FourierConvLayer) -> Result<f64> {
        Ok(self.quadratic(&self.output(layer)?))
    }

    /// Mean squared error against the stored target.
    pub fn mse_loss(&self, layer: &FourierConvLayer) -> Result<f64> {
        Ok(mse_loss(&self.output(layer)?, &self.target)?.0)
    }

    fn kernel_backward(&self, grad_y: Vec<f64>) -> Result<Vec<f64>> {
        let n = self.n();
        let x = Tensor::new(vec![1, n], self.input.clone())?;
        let k = self.layer.kernel_tensor();
        let gy = Tensor::new(vec![1, n], grad_y)?;
        let (_, gk) = conv_1d_backward(&x, &k, &gy, ConvMode::Circular)?;
        self.layer.kernel_grad_to_params(&gk)
    }

    /// Reverse-mode gradient of `yᵀ H y`.
    pub fn analytic_grad(&self) -> Result<Vec<f64>> {
        let y = self.output(&self.layer)?;
        let n = self.n();
        let grad_y: Vec<f64> = (0..n)
            .map(|i| 2.0 * (0..n).map(|j| self.observable[i * n + j] * y[j]).sum::<f64>())
            .collect();
        self.kernel_backward(grad_y)
    }

    pub fn analytic_mse_grad(&self) -> Result<Vec<f64>> {
        let y = self.output(&self.layer)?;
        self.kernel_backward(mse_loss(&y, &self.target)?.1)
    }

    /// Shift rule on every Ry occurrence for `loss`; scales are not
    /// rotation angles and take their entries from `analytic`.
    fn shift_grad_with<F>(&self, loss: F, analytic: Vec<f64>) -> Result<Vec<f64>>
    where
        F: Fn(&FourierConvLayer) -> Result<f64>,
    {
        let mut pv = ParamVector::from_values(&self.layer.occurrence_angles())?;
        let mut grad_occ = Vec::with_capacity(pv.len());
        for i in 0..pv.len() {
            grad_occ.push(parameter_shift_grad(
                |p| loss(&self.layer.with_occurrence_angles(&p.values())?),
                &mut pv,
                i,
            )?);
        }
        let mut grad = self.layer.occurrence_grad_to_params(&grad_occ)?;
        for ((g, a), m) in grad.iter_mut().zip(analytic).zip(self.layer.angle_mask()) {
            if !m {
                *g = a;
            }
        }
        Ok(grad)
    }

    /// Shift-rule gradient of `yᵀ H y`: each Ry occurrence is shifted by
    /// ±π/2 in the parameter store and the circuit re-run.
    pub fn shift_grad(&self) -> Result<Vec<f64>> {
        self.shift_grad_with(|l| self.observable_loss(l), self.analytic_grad()?)
    }

    /// Shift-rule estimate for the MSE loss, which is not an observable
    /// expectation; the residual against the analytic gradient is reported,
    /// not asserted.
    pub fn shift_mse_grad(&self) -> Result<Vec<f64>> {
        self.shift_grad_with(|l| self.mse_loss(l), self.analytic_mse_grad()?)
    }

    /// Central differences over the layer parameters.
    pub fn finite_difference_grad(&self, h: f64) -> Result<Vec<f64>> {
        let mut pv = ParamVector::from_values(&self.layer.params())?;
        let mut work = self.layer.clone();
        (0..pv.len())
            .map(|j| {
                finite_difference_grad(
                    |p| {
                        work.set_params(&p.values())?;
                        self.observable_loss(&work)
                    },
                    &mut pv,
                    j,
                    h,
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ry_z_shift_rule() {
        let mut p = ParamVector::from_values(&[FRAC_PI_2]).unwrap();
        let g = parameter_shift_grad(ry_z_expectation, &mut p, 0).unwrap();
        assert_abs_diff_eq!(g, -1.0, epsilon = 1e-12);
        let mut p = ParamVector::from_values(&[0.0]).unwrap();
        let g = parameter_shift_grad(ry_z_expectation, &mut p, 0).unwrap();
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
        assert_eq!(p.get(0).unwrap(), 0.0);
    }

    #[test]
    fn restores_on_error() {
        let mut p = ParamVector::from_values(&[0.25, 1.0]).unwrap();
        let before = p.values();
        let r = parameter_shift_grad(|_| Err(Error::ZeroVector), &mut p, 1);
        assert!(r.is_err());
        assert_eq!(p.values(), before);
    }

    #[test]
    fn lr_zero_keeps_params() {
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        let mut p = vec![1.0, -2.0];
        let mut s = SgdState::default();
        sgd_step(&mut p, &[3.0, 4.0], &mut s, 0.0, &cfg).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn quadratic_converges() {
        let cfg = TrainConfig { learning_rate: 0.1, momentum: 0.0, ..TrainConfig::default() };
        let mut p = vec![0.0];
        let mut s = SgdState::default();
        for _ in 0..200 {
            let g = 2.0 * (p[0] - 2.0);
            sgd_step(&mut p, &[g], &mut s, cfg.learning_rate, &cfg).unwrap();
        }
        assert!((p[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = vec![0.0, 0.0];
        let err = sgd_step(&mut p, &[0.0, f64::NAN], &mut SgdState::default(), 0.1,
            &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 1, .. }));
    }

    #[test]
    fn probe_routes_agree() {
        let m = ProbeModel::random(8, 5, 42).unwrap();
        let a = m.analytic_grad().unwrap();
        let s = m.shift_grad().unwrap();
        let f = m.finite_difference_grad(1e-5).unwrap();
        assert!(relative_error(&s, &a) < 1e-9, "{}", relative_error(&s, &a));
        assert!(relative_error(&f, &a) < 1e-4);
    }

    #[test]
    fn mse_zero_gradient_at_target() {
        let (l, g) = mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, -3.0, 20.0, 0.5]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
