//! The Fourier convolution layer: data and kernel are amplitude-encoded on
//! two registers, both are Fourier transformed, the frequency-shift map
//! aligns the spectra, the kernel register is post-selected on |0>, and an
//! inverse transform of the data register leaves the convolution.

use num_complex::Complex64;
use rand::Rng;

use super::angles::AngleTree;
use super::mmap::m_map_gate;
use crate::encode::{encode_padded, tomography_read, EncodedVector, NoiseModel};
use crate::error::{Error, Result};
use crate::models::direct::ConvMode;
use crate::models::spectral::NdFft;
use crate::qft::{iqft_gates, qft_gates};
use crate::rng;
use crate::statevec::{post_select_low_zero, tensor_product, Gate, Permutation, StateVector};
use crate::tensor::Tensor;

const MIN_SUCCESS: f64 = 1e-14;
const ATTEMPT_STREAM: u64 = 2;

/// How the post-selected product spectrum is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Simulator {
    /// Full joint-register simulation: QFT circuits, the index-map gate and
    /// exact post-selection.
    #[default]
    StateVector,
    /// The same pipeline with the transforms carried out by a classical FFT.
    Fft,
}

impl std::str::FromStr for Simulator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(Self::StateVector),
            "fft" => Ok(Self::Fft),
            other => Err(Error::InvalidArgument(format!(
                "unknown simulator '{other}' (expected statevector or fft)"
            ))),
        }
    }
}

/// Index alignment between kernel and signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `y[x] = Σ_a f[x - a] k[a]`.
    Convolution,
    /// `y[x] = Σ_a f[x + a] k[a]`, the usual CNN form.
    Correlation,
}

/// One `(out, in)` kernel slice: `scale · tree.amplitudes()`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSlice {
    pub tree: AngleTree,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub out_channel: usize,
    pub in_channel: usize,
    pub success_prob: f64,
    /// Draws until the kernel register reads |0>, in shot mode.
    pub attempts: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvResult {
    /// `[C_out, spatial...]`.
    pub output: Tensor,
    /// One entry per executed channel pair; pairs whose input channel is
    /// identically zero contribute nothing and are skipped.
    pub pairs: Vec<PairStats>,
}

impl ConvResult {
    /// Success probability of the first executed pair.
    pub fn success_prob(&self) -> Option<f64> {
        self.pairs.first().map(|p| p.success_prob)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierConvLayer {
    c_in: usize,
    c_out: usize,
    signal: Vec<usize>,
    kernel: Vec<usize>,
    compact: Vec<usize>,
    padded: Vec<usize>,
    slices: Vec<KernelSlice>,
    stride: usize,
    mode: ConvMode,
    orientation: Orientation,
    simulator: Simulator,
}

fn bits(n: usize) -> usize {
    n.trailing_zeros() as usize
}

impl FourierConvLayer {
    /// Layer for signals of spatial shape `signal` (1 or 2 axes) and kernel
    /// `[C_out, C_in, k...]`. One-axis layers convolve, two-axis layers
    /// correlate; see [`FourierConvLayer::with_orientation`].
    pub fn new(signal: &[usize], kernel: &Tensor, mode: ConvMode) -> Result<Self> {
        let rank = signal.len();
        if !(1..=2).contains(&rank) {
            return Err(Error::Shape(format!("signal must have 1 or 2 axes, got {rank}")));
        }
        let kshape = kernel.shape();
        if kshape.len() != rank + 2 {
            return Err(Error::Shape(format!(
                "kernel shape {kshape:?} does not match a {rank}-axis signal"
            )));
        }
        let (c_out, c_in) = (kshape[0], kshape[1]);
        let kdims = kshape[2..].to_vec();
        if c_out == 0 || c_in == 0 || kdims.contains(&0) || signal.contains(&0) {
            return Err(Error::Shape("empty channel or axis".into()));
        }
        for (a, (&s, &k)) in signal.iter().zip(&kdims).enumerate() {
            if k > s {
                return Err(Error::Shape(format!("kernel axis {a} ({k}) exceeds signal ({s})")));
            }
        }
        let padded: Vec<usize> = match mode {
            ConvMode::Circular => {
                for &s in signal {
                    if s < 2 || !s.is_power_of_two() {
                        return Err(Error::NotPowerOfTwo(s));
                    }
                }
                signal.to_vec()
            }
            ConvMode::Linear => signal
                .iter()
                .zip(&kdims)
                .map(|(&s, &k)| (s + k - 1).next_power_of_two().max(2))
                .collect(),
        };
        let mut compact: Vec<usize> = kdims.iter().map(|k| k.next_power_of_two()).collect();
        if compact.iter().product::<usize>() == 1 {
            *compact.last_mut().expect("rank >= 1") = 2;
        }
        let orientation =
            if rank == 1 { Orientation::Convolution } else { Orientation::Correlation };
        let mut layer = Self {
            c_in,
            c_out,
            signal: signal.to_vec(),
            kernel: kdims,
            compact,
            padded,
            slices: Vec::with_capacity(c_out * c_in),
            stride: 1,
            mode,
            orientation,
            simulator: Simulator::default(),
        };
        layer.set_kernel(kernel)?;
        Ok(layer)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        self.stride = stride;
        Ok(self)
    }

    pub fn with_simulator(mut self, simulator: Simulator) -> Self {
        self.simulator = simulator;
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn simulator(&self) -> Simulator {
        self.simulator
    }

    pub fn set_simulator(&mut self, simulator: Simulator) {
        self.simulator = simulator;
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn mode(&self) -> ConvMode {
        self.mode
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn in_channels(&self) -> usize {
        self.c_in
    }

    pub fn out_channels(&self) -> usize {
        self.c_out
    }

    pub fn signal_dims(&self) -> &[usize] {
        &self.signal
    }

    pub fn kernel_dims(&self) -> &[usize] {
        &self.kernel
    }

    /// Register length per axis.
    pub fn padded_dims(&self) -> &[usize] {
        &self.padded
    }

    pub fn slices(&self) -> &[KernelSlice] {
        &self.slices
    }

    /// Output spatial shape before striding.
    fn full_output_dims(&self) -> Vec<usize> {
        match (self.mode, self.orientation) {
            (ConvMode::Circular, _) => self.padded.clone(),
            (ConvMode::Linear, Orientation::Convolution) => {
                self.signal.iter().zip(&self.kernel).map(|(s, k)| s + k - 1).collect()
            }
            (ConvMode::Linear, Orientation::Correlation) => {
                self.signal.iter().zip(&self.kernel).map(|(s, k)| s - k + 1).collect()
            }
        }
    }

    /// Output spatial shape.
    pub fn output_dims(&self) -> Vec<usize> {
        self.full_output_dims().iter().map(|d| d.div_ceil(self.stride)).collect()
    }

    fn compact_len(&self) -> usize {
        self.compact.iter().product()
    }

    /// Kernel position of compact leaf `x`, if the leaf is not padding.
    fn leaf_position(&self, x: usize) -> Option<usize> {
        let mut rem = x;
        let mut coords = vec![0; self.compact.len()];
        for a in (0..self.compact.len()).rev() {
            coords[a] = rem % self.compact[a];
            rem /= self.compact[a];
        }
        if coords.iter().zip(&self.kernel).any(|(c, k)| c >= k) {
            return None;
        }
        Some(coords.iter().zip(&self.kernel).fold(0, |acc, (c, k)| acc * k + c))
    }

    fn kernel_slice_len(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Re-encodes all slices from a `[C_out, C_in, k...]` tensor.
    pub fn set_kernel(&mut self, kernel: &Tensor) -> Result<()> {
        let mut expected = vec![self.c_out, self.c_in];
        expected.extend(&self.kernel);
        if kernel.shape() != expected.as_slice() {
            return Err(Error::Shape(format!(
                "kernel shape {:?}, expected {expected:?}",
                kernel.shape()
            )));
        }
        let klen = self.kernel_slice_len();
        let n = self.compact_len();
        let valid: Vec<bool> = (0..n).map(|x| self.leaf_position(x).is_some()).collect();
        let mut slices = Vec::with_capacity(self.c_out * self.c_in);
        for s in 0..self.c_out * self.c_in {
            let src = &kernel.data()[s * klen..(s + 1) * klen];
            let values: Vec<f64> =
                (0..n).map(|x| self.leaf_position(x).map_or(0.0, |p| src[p])).collect();
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            let slice = if norm == 0.0 {
                let mut delta = vec![0.0; n];
                delta[0] = 1.0;
                KernelSlice { tree: AngleTree::from_amplitudes(&delta, &valid)?, scale: 0.0 }
            } else {
                KernelSlice { tree: AngleTree::from_amplitudes(&values, &valid)?, scale: norm }
            };
            slices.push(slice);
        }
        self.slices = slices;
        Ok(())
    }

    /// Kernel tensor `[C_out, C_in, k...]` currently encoded by the angles.
    pub fn kernel_tensor(&self) -> Tensor {
        let klen = self.kernel_slice_len();
        let mut shape = vec![self.c_out, self.c_in];
        shape.extend(&self.kernel);
        let mut t = Tensor::zeros(shape);
        for (s, slice) in self.slices.iter().enumerate() {
            let amps = slice.tree.amplitudes();
            let dst = &mut t.data_mut()[s * klen..(s + 1) * klen];
            for (x, a) in amps.iter().enumerate() {
                if let Some(p) = self.leaf_position(x) {
                    dst[p] = slice.scale * a;
                }
            }
        }
        t
    }

    /// Trainable values: per slice, its free tree angles then its scale.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for slice in &self.slices {
            for h in slice.tree.trainable_nodes() {
                out.push(slice.tree.angles()[h]);
            }
            out.push(slice.scale);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.slices.iter().map(|s| s.tree.trainable_nodes().len() + 1).sum()
    }

    /// `true` for rotation angles, `false` for scales.
    pub fn angle_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for slice in &self.slices {
            out.extend(std::iter::repeat_n(true, slice.tree.trainable_nodes().len()));
            out.push(false);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "layer has {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        let mut it = params.iter();
        for slice in &mut self.slices {
            for h in slice.tree.trainable_nodes() {
                slice.tree.set_angle(h, *it.next().expect("length checked"));
            }
            slice.scale = *it.next().expect("length checked");
        }
        Ok(())
    }

    /// Parameter gradient given `∂L/∂kernel`.
    pub fn kernel_grad_to_params(&self, grad_kernel: &Tensor) -> Result<Vec<f64>> {
        let klen = self.kernel_slice_len();
        if grad_kernel.len() != klen * self.slices.len() {
            return Err(Error::Shape("kernel gradient has the wrong size".into()));
        }
        let n = self.compact_len();
        let mut out = Vec::with_capacity(self.param_count());
        for (s, slice) in self.slices.iter().enumerate() {
            let src = &grad_kernel.data()[s * klen..(s + 1) * klen];
            let g: Vec<f64> =
                (0..n).map(|x| self.leaf_position(x).map_or(0.0, |p| src[p])).collect();
            let amps = slice.tree.amplitudes();
            let d_scale: f64 = g.iter().zip(&amps).map(|(a, b)| a * b).sum();
            let scaled: Vec<f64> = g.iter().map(|v| v * slice.scale).collect();
            let d_nodes = slice.tree.backward(&scaled);
            for h in slice.tree.trainable_nodes() {
                out.push(d_nodes[h]);
            }
            out.push(d_scale);
        }
        Ok(out)
    }

    /// Number of plain Ry gates across all slice preparation circuits.
    pub fn occurrence_count(&self) -> usize {
        self.slices.iter().map(|s| s.tree.angles().len()).sum()
    }

    /// Ry angles of every preparation circuit, slice by slice.
    pub fn occurrence_angles(&self) -> Vec<f64> {
        self.slices.iter().flat_map(|s| s.tree.occurrence_angles()).collect()
    }

    /// The layer whose preparation circuits use `occ` as Ry angles.
    pub fn with_occurrence_angles(&self, occ: &[f64]) -> Result<Self> {
        if occ.len() != self.occurrence_count() {
            return Err(Error::Shape(format!(
                "expected {} occurrence angles, got {}",
                self.occurrence_count(),
                occ.len()
            )));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for slice in &mut out.slices {
            let len = slice.tree.angles().len();
            slice.tree = slice.tree.with_occurrence_angles(&occ[offset..offset + len])?;
            offset += len;
        }
        Ok(out)
    }

    /// Chain rule from per-occurrence gradients to parameter gradients
    /// (zero for scales).
    pub fn occurrence_grad_to_params(&self, grad_occ: &[f64]) -> Result<Vec<f64>> {
        if grad_occ.len() != self.occurrence_count() {
            return Err(Error::Shape("occurrence gradient has the wrong size".into()));
        }
        let mut out = Vec::with_capacity(self.param_count());
        let mut offset = 0;
        for slice in &self.slices {
            let len = slice.tree.angles().len();
            let nodes = slice.tree.occurrence_grad_to_nodes(&grad_occ[offset..offset + len]);
            for h in slice.tree.trainable_nodes() {
                out.push(nodes[h]);
            }
            out.push(0.0);
            offset += len;
        }
        Ok(out)
    }

    /// Precomputes the transformed kernel states.
    pub fn prepare(&self) -> Result<PreparedLayer<'_>> {
        let axis_bits: Vec<usize> = self.padded.iter().map(|&n| bits(n)).collect();
        let reg_bits: usize = axis_bits.iter().sum();
        let total: usize = self.padded.iter().product();
        let nd = NdFft::new(&self.padded)?;
        let flip = match self.orientation {
            Orientation::Correlation => Some(negation_permutation(&self.padded)?),
            Orientation::Convolution => None,
        };
        let mut kernels = Vec::with_capacity(self.slices.len());
        for slice in &self.slices {
            let state = match self.simulator {
                Simulator::StateVector => {
                    let mut state = StateVector::zero(reg_bits);
                    let qubits = self.compact_qubits(&axis_bits);
                    for g in slice.tree.circuit(&qubits)? {
                        state.apply(&g)?;
                    }
                    if let Some(map) = &flip {
                        state.apply(&Gate::IndexMap {
                            qubits: (0..reg_bits).collect(),
                            map: map.clone(),
                        })?;
                    }
                    for g in self.register_qft(&axis_bits, 0) {
                        state.apply(&g)?;
                    }
                    state
                }
                Simulator::Fft => {
                    let mut amps = vec![Complex64::new(0.0, 0.0); total];
                    for (x, a) in slice.tree.amplitudes().iter().enumerate() {
                        let pos = self.embed(x, flip.as_ref());
                        amps[pos] = Complex64::new(*a, 0.0);
                    }
                    nd.forward(&mut amps);
                    StateVector::from_amplitudes(amps)?
                }
            };
            kernels.push(state);
        }
        let m_map = match self.simulator {
            Simulator::StateVector => Some(m_map_gate(&axis_bits)?),
            Simulator::Fft => None,
        };
        Ok(PreparedLayer { layer: self, axis_bits, nd, kernels, m_map })
    }

    /// Qubits of the compact kernel block: the low qubits of each axis.
    fn compact_qubits(&self, axis_bits: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (&b, &c) in axis_bits.iter().zip(&self.compact) {
            let m = bits(c);
            out.extend(offset + b - m..offset + b);
            offset += b;
        }
        out
    }

    /// Full-register index of compact leaf `x`.
    fn embed(&self, x: usize, flip: Option<&Permutation>) -> usize {
        let mut rem = x;
        let mut coords = vec![0; self.compact.len()];
        for a in (0..self.compact.len()).rev() {
            coords[a] = rem % self.compact[a];
            rem /= self.compact[a];
        }
        let idx = coords.iter().zip(&self.padded).fold(0, |acc, (c, n)| acc * n + c);
        flip.map_or(idx, |p| p.image(idx))
    }

    fn register_qft(&self, axis_bits: &[usize], base: usize) -> Vec<Gate> {
        let mut gates = Vec::new();
        let mut offset = base;
        for &b in axis_bits {
            let reg: Vec<usize> = (offset..offset + b).collect();
            gates.extend(qft_gates(&reg, true));
            offset += b;
        }
        gates
    }

    fn register_iqft(&self, axis_bits: &[usize]) -> Vec<Gate> {
        let mut gates = Vec::new();
        let mut offset = 0;
        for &b in axis_bits {
            let reg: Vec<usize> = (offset..offset + b).collect();
            gates.extend(iqft_gates(&reg, true));
            offset += b;
        }
        gates
    }

    /// Runs the layer on `x: [C_in, spatial...]`.
    pub fn forward(&self, x: &Tensor, noise: &NoiseModel) -> Result<ConvResult> {
        self.prepare()?.forward(x, noise)
    }
}

/// `u -> (-u) mod N` on every axis of a row-major register.
fn negation_permutation(dims: &[usize]) -> Result<Permutation> {
    let total: usize = dims.iter().product();
    let table = (0..total)
        .map(|idx| {
            let mut rem = idx;
            let mut out = 0;
            let mut stride = 1;
            for &n in dims.iter().rev() {
                let c = rem % n;
                rem /= n;
                out += ((n - c) % n) * stride;
                stride *= n;
            }
            out
        })
        .collect();
    Permutation::new(table)
}

/// A layer with its kernel spectra computed, ready for repeated forwards.
#[derive(Debug, Clone)]
pub struct PreparedLayer<'a> {
    layer: &'a FourierConvLayer,
    axis_bits: Vec<usize>,
    nd: NdFft,
    /// Transformed kernel register per slice.
    kernels: Vec<StateVector>,
    m_map: Option<Gate>,
}

impl PreparedLayer<'_> {
    /// Normalised post-selected data-register state and its probability.
    fn product_state(&self, data: &StateVector, slice: usize) -> Result<(StateVector, f64)> {
        let kernel = &self.kernels[slice];
        let reg_bits: usize = self.axis_bits.iter().sum();
        match self.layer.simulator {
            Simulator::StateVector => {
                let mut t = data.clone();
                for g in self.layer.register_qft(&self.axis_bits, 0) {
                    t.apply(&g)?;
                }
                let mut joint = tensor_product(&t, kernel);
                joint.apply(self.m_map.as_ref().expect("state-vector engine"))?;
                let (mut out, p) = post_select_low_zero(&joint, reg_bits).map_err(|e| match e {
                    Error::ZeroProbabilityBranch(p) => Error::DegenerateSpectrum(p),
                    other => other,
                })?;
                for g in self.layer.register_iqft(&self.axis_bits) {
                    out.apply(&g)?;
                }
                Ok((out, p))
            }
            Simulator::Fft => {
                let mut amps = data.amplitudes().to_vec();
                self.nd.forward(&mut amps);
                amps.iter_mut().zip(kernel.amplitudes()).for_each(|(a, k)| *a *= k);
                let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                if p < MIN_SUCCESS {
                    return Err(Error::DegenerateSpectrum(p));
                }
                self.nd.inverse(&mut amps);
                let s = 1.0 / p.sqrt();
                amps.iter_mut().for_each(|a| *a *= s);
                Ok((StateVector::from_amplitudes(amps)?, p))
            }
        }
    }

    pub fn forward(&self, x: &Tensor, noise: &NoiseModel) -> Result<ConvResult> {
        let layer = self.layer;
        noise.validate()?;
        let mut expected = vec![layer.c_in];
        expected.extend(&layer.signal);
        if x.shape() != expected.as_slice() {
            return Err(Error::Shape(format!(
                "input shape {:?}, expected {expected:?}",
                x.shape()
            )));
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer input"));
        }
        let total: usize = layer.padded.iter().product();
        let full = layer.full_output_dims();
        let out_dims = layer.output_dims();
        let out_len: usize = out_dims.iter().product();
        let mut out_shape = vec![layer.c_out];
        out_shape.extend(&out_dims);
        let mut output = Tensor::zeros(out_shape);
        // grid index of each (strided) output position
        let taps: Vec<usize> = (0..out_len)
            .map(|o| {
                let mut rem = o;
                let mut coords = vec![0; out_dims.len()];
                for a in (0..out_dims.len()).rev() {
                    coords[a] = (rem % out_dims[a]) * layer.stride;
                    rem /= out_dims[a];
                }
                debug_assert!(coords.iter().zip(&full).all(|(c, f)| c < f));
                coords.iter().zip(&layer.padded).fold(0, |acc, (c, n)| acc * n + c)
            })
            .collect();
        let sig_len: usize = layer.signal.iter().product();
        let mut pairs = Vec::new();
        for c in 0..layer.c_in {
            let channel = x.slab(c);
            if channel.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut grid = vec![0.0; total];
            for (i, &v) in channel.iter().enumerate() {
                grid[grid_index(i, &layer.signal, &layer.padded)] = v;
            }
            debug_assert_eq!(channel.len(), sig_len);
            for o in 0..layer.c_out {
                let s = o * layer.c_in + c;
                let slice = &layer.slices[s];
                if slice.scale == 0.0 {
                    continue;
                }
                let pair_noise = noise.derive(s as u64);
                let enc = encode_padded(&grid, &pair_noise)?;
                let (psi, p) = self.product_state(&enc.state, s)?;
                let attempts = noise.shots.map(|_| {
                    let mut r = rng::stream(pair_noise.seed, ATTEMPT_STREAM);
                    geometric(&mut r, p)
                });
                let readout = EncodedVector {
                    state: psi,
                    norm: enc.norm * slice.scale.abs() * (total as f64 * p).sqrt(),
                    original_len: total,
                };
                let values = tomography_read(&readout, &pair_noise);
                let sign = slice.scale.signum();
                let dst = output.slab_mut(o);
                for (d, &t) in dst.iter_mut().zip(&taps) {
                    *d += sign * values[t];
                }
                pairs.push(PairStats { out_channel: o, in_channel: c, success_prob: p, attempts });
            }
        }
        Ok(ConvResult { output, pairs })
    }
}

fn grid_index(i: usize, dims: &[usize], padded: &[usize]) -> usize {
    let mut rem = i;
    let mut out = 0;
    let mut stride = 1;
    for (&d, &n) in dims.iter().zip(padded).rev() {
        out += (rem % d) * stride;
        rem /= d;
        stride *= n;
    }
    out
}

/// Number of Bernoulli(p) trials up to and including the first success.
fn geometric<R: Rng>(rng: &mut R, p: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    (u.ln() / (1.0 - p).ln()).ceil().max(1.0) as u64
}

/// 1-D layer applied to a single-channel signal.
pub fn qconv_1d(f: &[f64], layer: &FourierConvLayer, noise: &NoiseModel) -> Result<ConvResult> {
    if layer.signal.len() != 1 {
        return Err(Error::Shape("qconv_1d needs a one-axis layer".into()));
    }
    if layer.c_in != 1 {
        return Err(Error::Shape(format!("qconv_1d needs one input channel, layer has {}", layer.c_in)));
    }
    let x = Tensor::new(vec![1, f.len()], f.to_vec())?;
    layer.forward(&x, noise)
}

/// 2-D layer applied to `x: [C_in, H, W]`.
pub fn qconv_2d(x: &Tensor, layer: &FourierConvLayer, noise: &NoiseModel) -> Result<ConvResult> {
    if layer.signal.len() != 2 {
        return Err(Error::Shape("qconv_2d needs a two-axis layer".into()));
    }
    layer.forward(x, noise)
}

/// `Σ_t |f̂(t) ĝ(t)|²` for unit-normalised spectra of `f` and `g`, both
/// zero-padded to the next power of two covering the longer operand.
pub fn conv_success_probability(f: &[f64], g: &[f64]) -> Result<f64> {
    let n = f.len().max(g.len()).next_power_of_two().max(2);
    let spectrum = |v: &[f64]| -> Result<Vec<Complex64>> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut a: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x / norm, 0.0)).collect();
        a.resize(n, Complex64::new(0.0, 0.0));
        crate::models::spectral::fft(&a)
    };
    let (fh, gh) = (spectrum(f)?, spectrum(g)?);
    Ok(fh.iter().zip(&gh).map(|(a, b)| (a * b).norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::direct::{direct_conv, direct_conv_2d};
    use approx::assert_abs_diff_eq;

    fn layer_1d(n: usize, g: &[f64], mode: ConvMode, sim: Simulator) -> FourierConvLayer {
        let k = Tensor::new(vec![1, 1, g.len()], g.to_vec()).unwrap();
        FourierConvLayer::new(&[n], &k, mode).unwrap().with_simulator(sim)
    }

    #[test]
    fn circular_example_both_engines() {
        for sim in [Simulator::StateVector, Simulator::Fft] {
            let l = layer_1d(4, &[1.0, 1.0], ConvMode::Circular, sim);
            let r = qconv_1d(&[1.0, 2.0, 3.0, 4.0], &l, &NoiseModel::noiseless()).unwrap();
            for (a, b) in r.output.data().iter().zip([5.0, 3.0, 5.0, 7.0]) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn delta_signal_returns_kernel() {
        let g = [0.4, -1.0, 2.0, 0.5];
        let l = layer_1d(4, &g, ConvMode::Circular, Simulator::StateVector);
        let r = qconv_1d(&[1.0, 0.0, 0.0, 0.0], &l, &NoiseModel::noiseless()).unwrap();
        for (a, b) in r.output.data().iter().zip(g) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_pair_probability() {
        let l = layer_1d(4, &[1.0], ConvMode::Circular, Simulator::StateVector);
        let r = qconv_1d(&[1.0, 0.0, 0.0, 0.0], &l, &NoiseModel::noiseless()).unwrap();
        assert_abs_diff_eq!(r.success_prob().unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            conv_success_probability(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap(),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn linear_1d_matches_direct() {
        let f = [0.5, -1.0, 2.0, 0.25, 1.5];
        let g = [1.0, -0.5, 0.75];
        let want = direct_conv(&f, &g, ConvMode::Linear).unwrap();
        for sim in [Simulator::StateVector, Simulator::Fft] {
            let l = layer_1d(5, &g, ConvMode::Linear, sim);
            let r = qconv_1d(&f, &l, &NoiseModel::noiseless()).unwrap();
            assert_eq!(r.output.shape(), &[1, 7]);
            for (a, b) in r.output.data().iter().zip(&want) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn linear_2d_matches_direct() {
        let x = Tensor::new(vec![2, 5, 4], (0..40).map(|v| ((v * 7 % 11) as f64) - 4.0).collect())
            .unwrap();
        let k = Tensor::new(vec![3, 2, 3, 2], (0..36).map(|v| ((v * 5 % 7) as f64) - 2.5).collect())
            .unwrap();
        let want = direct_conv_2d(&x, &k, ConvMode::Linear).unwrap();
        for sim in [Simulator::StateVector, Simulator::Fft] {
            let l = FourierConvLayer::new(&[5, 4], &k, ConvMode::Linear).unwrap().with_simulator(sim);
            let r = qconv_2d(&x, &l, &NoiseModel::noiseless()).unwrap();
            assert_eq!(r.output.shape(), want.shape());
            for (a, b) in r.output.data().iter().zip(want.data()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn circular_2d_delta_is_identity() {
        let x = Tensor::new(vec![1, 4, 4], (0..16).map(|v| v as f64 - 3.0).collect()).unwrap();
        let k = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let l = FourierConvLayer::new(&[4, 4], &k, ConvMode::Circular).unwrap();
        let r = qconv_2d(&x, &l, &NoiseModel::noiseless()).unwrap();
        for (a, b) in r.output.data().iter().zip(x.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn params_round_trip_and_kernel() {
        let k = Tensor::new(vec![2, 1, 3], vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        let mut l = FourierConvLayer::new(&[6], &k, ConvMode::Linear).unwrap();
        let p = l.params();
        assert_eq!(p.len(), l.param_count());
        l.set_params(&p).unwrap();
        for (a, b) in l.kernel_tensor().data().iter().zip(k.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn stride_subsamples() {
        let f = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let l = layer_1d(8, &[1.0, 1.0], ConvMode::Circular, Simulator::Fft).with_stride(3).unwrap();
        let r = qconv_1d(&f, &l, &NoiseModel::noiseless()).unwrap();
        let full = direct_conv(&f, &[1.0, 1.0], ConvMode::Circular).unwrap();
        let want: Vec<f64> = full.iter().step_by(3).copied().collect();
        for (a, b) in r.output.data().iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn disjoint_spectra_rejected() {
        // f has only the even frequencies, g only the odd ones
        let l = layer_1d(4, &[1.0, 0.0, -1.0, 0.0], ConvMode::Circular, Simulator::StateVector);
        let err = qconv_1d(&[1.0, 0.0, 1.0, 0.0], &l, &NoiseModel::noiseless()).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum(_)));
    }
}
