//! Why the layer needs the frequency-shift map and post-selection.
//!
//! A unitary `P` with `P(f̂ ⊗ ĝ) = (f̂ ⊙ ĝ)/‖f̂ ⊙ ĝ‖ ⊗ |0>` for every input
//! would have to preserve inner products. Tensor inputs have overlap
//! `<f̂₁|f̂₂><ĝ₁|ĝ₂>`, while the normalised pointwise products generally do
//! not, so two pairs with different overlaps rule out every such `P`,
//! including all permutation and diagonal unitaries.

use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::models::spectral::fft;
use crate::rng;

use super::conv_success_probability;

const WITNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub samples: Vec<PairSample>,
    /// `|<in_a|in_b>|` for the first witnessing pair of samples.
    pub input_overlap: f64,
    /// `|<out_a|out_b>|` for the same samples.
    pub output_overlap: f64,
    /// Indices of the two samples forming the witness.
    pub witness: Option<(usize, usize)>,
    /// Post-selection success probability of the frequency-shift route,
    /// per sample.
    pub mmap_success: Vec<f64>,
    pub explanation: String,
}

impl WitnessReport {
    pub fn found(&self) -> bool {
        self.witness.is_some()
    }

    pub fn gap(&self) -> f64 {
        (self.input_overlap - self.output_overlap).abs()
    }
}

fn unit_spectrum(v: &[f64]) -> Result<Vec<Complex64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let a: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x / norm, 0.0)).collect();
    fft(&a)
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

struct Encoded {
    f_hat: Vec<Complex64>,
    g_hat: Vec<Complex64>,
    product: Vec<Complex64>,
}

fn encode(s: &PairSample) -> Result<Encoded> {
    let f_hat = unit_spectrum(&s.f)?;
    let g_hat = unit_spectrum(&s.g)?;
    let mut product: Vec<Complex64> = f_hat.iter().zip(&g_hat).map(|(a, b)| a * b).collect();
    let norm = product.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    product.iter_mut().for_each(|v| *v /= norm);
    Ok(Encoded { f_hat, g_hat, product })
}

/// Searches the given `(f, g)` samples for two whose input and output
/// overlaps differ, which no unitary can reconcile.
pub fn verify_no_pointwise_product(samples: &[PairSample]) -> Result<WitnessReport> {
    let encoded: Vec<Encoded> = samples.iter().map(encode).collect::<Result<_>>()?;
    let mmap_success = samples
        .iter()
        .map(|s| conv_success_probability(&s.f, &s.g))
        .collect::<Result<Vec<_>>>()?;
    let mut best = (0.0, 0.0, None);
    'outer: for a in 0..encoded.len() {
        for b in a + 1..encoded.len() {
            let (ea, eb) = (&encoded[a], &encoded[b]);
            let input = (inner(&ea.f_hat, &eb.f_hat) * inner(&ea.g_hat, &eb.g_hat)).norm();
            let output = inner(&ea.product, &eb.product).norm();
            if (input - output).abs() > WITNESS_TOL {
                best = (input, output, Some((a, b)));
                break 'outer;
            }
        }
    }
    let (input_overlap, output_overlap, witness) = best;
    let explanation = match witness {
        Some((a, b)) => format!(
            "samples {a} and {b}: tensor inputs overlap {input_overlap:.6}, normalised \
             pointwise products overlap {output_overlap:.6}; a unitary preserves overlaps, \
             so no fixed circuit maps every f̂⊗ĝ to f̂⊙ĝ. The frequency-shift map instead \
             moves f̂(t)ĝ(t) onto the |j=0> branch, reached by post-selection with \
             probability Σ|f̂ĝ|²."
        ),
        None => "no pair of samples separates the overlaps (identical or too few samples)".into(),
    };
    Ok(WitnessReport {
        samples: samples.to_vec(),
        input_overlap,
        output_overlap,
        witness,
        mmap_success,
        explanation,
    })
}

/// `count` random `(f, g)` pairs of length `n`, entries uniform in [-1, 1).
pub fn random_pairs(count: usize, n: usize, seed: u64) -> Vec<PairSample> {
    let mut r = rng::stream(seed, 0);
    let draw = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
            if v.iter().any(|x| *x != 0.0) {
                return v;
            }
        }
    };
    (0..count).map(|_| PairSample { f: draw(&mut r), g: draw(&mut r) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_pairs_give_witness() {
        let report = verify_no_pointwise_product(&random_pairs(2, 4, 11)).unwrap();
        assert!(report.found());
        assert!(report.gap() > 1e-6);
        assert_eq!(report.mmap_success.len(), 2);
    }

    #[test]
    fn identical_pairs_are_consistent() {
        let s = random_pairs(1, 4, 3);
        let report = verify_no_pointwise_product(&[s[0].clone(), s[0].clone()]).unwrap();
        assert!(!report.found());
    }
}
