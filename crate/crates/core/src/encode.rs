//! Classical <-> amplitude bridge: amplitude encoding with preparation
//! noise, noisy readout, the capped activation and a keyed parameter store
//! standing in for qRAM.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;
use crate::statevec::StateVector;

const PREP_STREAM: u64 = 0;
const READ_STREAM: u64 = 1;

/// Preparation/readout noise and the activation cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of the additive Gaussian noise on amplitudes.
    pub eps: f64,
    pub cap_c: f64,
    /// `None` reads exact expectations; `Some(s)` estimates magnitudes
    /// from `s` samples.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { eps: 0.0, cap_c: 10.0, shots: None, seed: 0 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn new(eps: f64, cap_c: f64, seed: u64) -> Result<Self> {
        let m = Self { eps, cap_c, shots: None, seed };
        m.validate()?;
        Ok(m)
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = Some(shots);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {}", self.eps)));
        }
        if !(self.cap_c > 0.0) {
            return Err(Error::InvalidArgument(format!("cap must be > 0, got {}", self.cap_c)));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        Ok(())
    }

    /// Same model with an independent seed for sub-computation `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        Self { seed: rng::derive(self.seed, tag), ..*self }
    }

    pub fn is_noiseless(&self) -> bool {
        self.eps == 0.0 && self.shots.is_none()
    }
}

/// A normalised state plus the classical bookkeeping needed to undo the
/// normalisation and padding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVector {
    pub state: StateVector,
    /// Classical ℓ2 norm divided out during encoding.
    pub norm: f64,
    pub original_len: usize,
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("input vector"))
    }
}

/// Pads `v` with zeros to the next power of two (at least 2) and prepares
/// `(v + η)/‖v + η‖`, with η ~ N(0, (eps‖v‖/√N)²) per entry.
pub fn amplitude_encode(v: &[f64], noise: &NoiseModel) -> Result<EncodedVector> {
    let n = v.len().next_power_of_two().max(2);
    let mut padded = v.to_vec();
    padded.resize(n, 0.0);
    let mut enc = encode_padded(&padded, noise)?;
    enc.original_len = v.len();
    Ok(enc)
}

/// Amplitude encoding of an already padded vector (length a power of two).
pub fn encode_padded(v: &[f64], noise: &NoiseModel) -> Result<EncodedVector> {
    check_finite(v)?;
    if !v.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(v.len()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut amps: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    if noise.eps > 0.0 {
        let sigma = noise.eps * norm / (v.len() as f64).sqrt();
        let mut rng = rng::stream(noise.seed, PREP_STREAM);
        for a in &mut amps {
            let z: f64 = StandardNormal.sample(&mut rng);
            a.re += sigma * z;
        }
    }
    let (state, _) = StateVector::normalized(amps)?;
    Ok(EncodedVector { state, norm, original_len: v.len() })
}

/// Simulated tomography: reads `norm · (Re a_i + N(0, eps²))` for the first
/// `original_len` entries. In shot mode the magnitudes come from a
/// multinomial sample and the sign is copied from the true amplitude.
pub fn tomography_read(enc: &EncodedVector, noise: &NoiseModel) -> Vec<f64> {
    let amps = enc.state.amplitudes();
    let mut rng = rng::stream(noise.seed, READ_STREAM);
    let mut values: Vec<f64> = match noise.shots {
        None => amps.iter().map(|a| a.re).collect(),
        Some(shots) => {
            let counts = multinomial(&enc.state.probabilities(), shots, &mut rng);
            counts
                .iter()
                .zip(amps)
                .map(|(&c, a)| {
                    let mag = (c as f64 / shots as f64).sqrt();
                    // sign recovery is not simulated; take it from the state
                    if a.re < 0.0 {
                        -mag
                    } else {
                        mag
                    }
                })
                .collect()
        }
    };
    values.truncate(enc.original_len);
    if noise.eps > 0.0 {
        for v in &mut values {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += noise.eps * z;
        }
    }
    values.iter_mut().for_each(|v| *v *= enc.norm);
    values
}

fn multinomial<R: Rng>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if remaining == 0 || mass <= 0.0 {
            out.push(0);
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0);
        out.push(k);
        remaining -= k;
        mass -= p;
    }
    out
}

/// `min(max(x, 0), cap)` elementwise.
pub fn cap_activation(x: &[f64], cap_c: f64) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0).min(cap_c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QramAddress(pub u64);

impl fmt::Display for QramAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Addressable parameter memory. Reads return the last write.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QramStore {
    cells: BTreeMap<QramAddress, f64>,
}

impl QramStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `values` at addresses `0..values.len()`.
    pub fn from_values(values: &[f64]) -> Self {
        let mut store = Self::new();
        for (i, &v) in values.iter().enumerate() {
            store.write(QramAddress(i as u64), v);
        }
        store
    }

    pub fn write(&mut self, address: QramAddress, value: f64) {
        self.cells.insert(address, value);
    }

    pub fn read(&self, address: QramAddress) -> Result<f64> {
        self.cells.get(&address).copied().ok_or(Error::MissingAddress(address.0))
    }

    /// Adds `delta` in place and returns the previous value.
    pub fn shift(&mut self, address: QramAddress, delta: f64) -> Result<f64> {
        let cell = self.cells.get_mut(&address).ok_or(Error::MissingAddress(address.0))?;
        let old = *cell;
        *cell += delta;
        Ok(old)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Values in address order.
    pub fn values(&self) -> Vec<f64> {
        self.cells.values().copied().collect()
    }
}

pub fn qram_write(store: &mut QramStore, address: QramAddress, value: f64) {
    store.write(address, value)
}

pub fn qram_read(store: &QramStore, address: QramAddress) -> Result<f64> {
    store.read(address)
}

pub fn qram_shift(store: &mut QramStore, address: QramAddress, delta: f64) -> Result<f64> {
    store.shift(address, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn basis_and_pythagorean_encodings() {
        let e = amplitude_encode(&[1.0, 0.0, 0.0, 0.0], &NoiseModel::noiseless()).unwrap();
        assert_eq!(e.state, StateVector::zero(2));
        assert_eq!(e.norm, 1.0);

        let e = amplitude_encode(&[3.0, 4.0], &NoiseModel::noiseless()).unwrap();
        assert_abs_diff_eq!(e.state.amplitude(0).re, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(e.state.amplitude(1).re, 0.8, epsilon = 1e-15);
        assert_eq!(e.norm, 5.0);
    }

    #[test]
    fn padding_to_power_of_two() {
        let e = amplitude_encode(&[1.0, 2.0, 3.0, 4.0, 5.0], &NoiseModel::noiseless()).unwrap();
        assert_eq!(e.state.n_qubits(), 3);
        assert_eq!(e.original_len, 5);
        for i in 5..8 {
            assert_eq!(e.state.amplitude(i).norm(), 0.0);
        }
    }

    #[test]
    fn encode_errors() {
        assert_eq!(
            amplitude_encode(&[0.0, 0.0], &NoiseModel::noiseless()),
            Err(Error::ZeroVector)
        );
        assert!(matches!(
            amplitude_encode(&[1.0, f64::NAN], &NoiseModel::noiseless()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn cap_examples() {
        assert_eq!(cap_activation(&[-1.0, 5.0, 20.0], 10.0), vec![0.0, 5.0, 10.0]);
        assert_eq!(cap_activation(&[0.5, 9.5], 10.0), vec![0.5, 9.5]);
    }

    #[test]
    fn qram_semantics() {
        let mut s = QramStore::new();
        let a = QramAddress(7);
        qram_write(&mut s, a, 0.5);
        assert_eq!(qram_read(&s, a).unwrap(), 0.5);
        assert_eq!(qram_shift(&mut s, a, FRAC_PI_2).unwrap(), 0.5);
        qram_shift(&mut s, a, -2.0 * FRAC_PI_2).unwrap();
        qram_shift(&mut s, a, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(qram_read(&s, a).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(qram_read(&s, QramAddress(8)), Err(Error::MissingAddress(8)));
        assert_eq!(qram_shift(&mut s, QramAddress(8), 1.0), Err(Error::MissingAddress(8)));
    }

    #[test]
    fn noise_model_validation() {
        assert!(NoiseModel::new(-0.1, 10.0, 0).is_err());
        assert!(NoiseModel::new(0.0, 0.0, 0).is_err());
        assert!(NoiseModel::new(0.01, 10.0, 0).unwrap().with_shots(0).validate().is_err());
    }
}
