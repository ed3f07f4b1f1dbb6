//! Property tests for the simulator, the convolution layer and the
//! classical oracles.

use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;

use qfcn_core::encode::{amplitude_encode, cap_activation, tomography_read, NoiseModel};
use qfcn_core::fourier_conv::{
    conv_success_probability, m_map, m_map_permutation, qconv_1d, qconv_2d, FourierConvLayer,
    Simulator,
};
use qfcn_core::models::{
    dft_oracle, direct_conv, direct_conv_2d, fft, fft_conv_2d, ifft, mae, mse, ConvMode,
};
use qfcn_core::qft::{iqft_amplitudes, qft_amplitudes};
use qfcn_core::statevec::{tensor_product, StateVector};
use qfcn_core::train::{relative_error, softmax};
use qfcn_core::Tensor;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

/// A random normalised state on `1..=max_qubits` qubits.
fn state(max_qubits: usize) -> impl Strategy<Value = StateVector> {
    (1..=max_qubits)
        .prop_flat_map(|n| complex_vec(1 << n))
        .prop_filter_map("zero vector", |a| StateVector::normalized(a).ok().map(|(s, _)| s))
}

fn real_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
        .prop_filter("zero vector", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qft_matches_dft_and_fft(s in state(8)) {
        let q = qft_amplitudes(&s).unwrap();
        let d = dft_oracle(s.amplitudes());
        let f = fft(s.amplitudes()).unwrap();
        prop_assert!(max_diff(q.amplitudes(), &d) < 1e-9);
        prop_assert!(max_diff(&f, &d) < 1e-9);
        let back = iqft_amplitudes(&q).unwrap();
        prop_assert!(max_diff(back.amplitudes(), s.amplitudes()) < 1e-10);
        prop_assert!((q.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fft_matches_dft_up_to_1024(bits in 0usize..=10, seed in any::<u64>()) {
        let n = 1usize << bits;
        let x: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = qfcn_core::rng::derive(seed, i as u64);
                Complex64::new((t % 1000) as f64 / 500.0 - 1.0, ((t >> 20) % 1000) as f64 / 500.0 - 1.0)
            })
            .collect();
        let f = fft(&x).unwrap();
        prop_assert!(max_diff(&f, &dft_oracle(&x)) < 1e-9 * (n as f64).sqrt().max(1.0));
        prop_assert!(max_diff(&ifft(&f).unwrap(), &x) < 1e-12 * n as f64);
    }

    #[test]
    fn m_map_is_a_bijection(bits in prop::collection::vec(1usize..=3, 1..=2)) {
        let p = m_map_permutation(&bits).unwrap();
        let mut seen = vec![false; p.len()];
        for i in 0..p.len() {
            let j = p.image(i);
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
        let inv = p.inverse();
        prop_assert!((0..p.len()).all(|i| inv.image(p.image(i)) == i));
    }

    #[test]
    fn m_map_product_branch_holds_pointwise_product(bits in 1usize..=4, seed in any::<u64>()) {
        let n = 1usize << bits;
        let draw = |tag: u64| -> StateVector {
            let amps = (0..n)
                .map(|i| {
                    let t = qfcn_core::rng::derive(seed ^ tag, i as u64);
                    Complex64::new((t % 997) as f64 / 997.0 + 0.01, 0.0)
                })
                .collect();
            StateVector::normalized(amps).unwrap().0
        };
        let (f, g) = (draw(1), draw(2));
        let out = m_map(&tensor_product(&f, &g)).unwrap();
        for t in 0..n {
            let want = f.amplitude(t) * g.amplitude(t);
            prop_assert!((out.amplitude(t * n) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_qconv_matches_direct(bits in 1usize..=5, seed in any::<u64>(), klen_frac in 0.0..1.0f64) {
        let n = 1usize << bits;
        let klen = 1 + ((n - 1) as f64 * klen_frac) as usize;
        let f: Vec<f64> = (0..n).map(|i| ((qfcn_core::rng::derive(seed, i as u64) % 2001) as f64 - 1000.0) / 1000.0 + 1e-3).collect();
        let g: Vec<f64> = (0..klen).map(|i| ((qfcn_core::rng::derive(!seed, i as u64) % 2001) as f64 - 1000.0) / 1000.0 + 1e-3).collect();
        let k = Tensor::new(vec![1, 1, klen], g.clone()).unwrap();
        for sim in [Simulator::StateVector, Simulator::Fft] {
            let layer = FourierConvLayer::new(&[n], &k, ConvMode::Circular).unwrap().with_simulator(sim);
            let res = qconv_1d(&f, &layer, &NoiseModel::noiseless()).unwrap();
            let want = direct_conv(&f, &g, ConvMode::Circular).unwrap();
            prop_assert!(relative_error(res.output.data(), &want) < 1e-9);
            let mut padded = g.clone();
            padded.resize(n, 0.0);
            let p = conv_success_probability(&f, &padded).unwrap();
            prop_assert!((res.success_prob().unwrap() - p).abs() < 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn success_probability_bounds(f in real_vec(8), g in real_vec(8)) {
        // Σ|f̂ĝ|² ≤ max|ĝ|² · Σ|f̂|², with both spectra unit-normalised
        let p = conv_success_probability(&f, &g).unwrap();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let gh = fft(&g.iter().map(|&x| Complex64::new(x / norm, 0.0)).collect::<Vec<_>>()).unwrap();
        let peak = gh.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        prop_assert!(p >= 0.0 && p <= peak + 1e-12);
    }

    #[test]
    fn separable_kernel_factorises(rows in real_vec(3), cols in real_vec(3), x in real_vec(64)) {
        // a rank-one kernel convolves rows then columns
        let k2: Vec<f64> = rows.iter().flat_map(|r| cols.iter().map(move |c| r * c)).collect();
        let img = Tensor::new(vec![1, 8, 8], x.clone()).unwrap();
        let full = direct_conv_2d(&img, &Tensor::new(vec![1, 1, 3, 3], k2).unwrap(), ConvMode::Linear).unwrap();
        let along_rows = direct_conv_2d(&img, &Tensor::new(vec![1, 1, 1, 3], cols).unwrap(), ConvMode::Linear).unwrap();
        let both = direct_conv_2d(&along_rows, &Tensor::new(vec![1, 1, 3, 1], rows).unwrap(), ConvMode::Linear).unwrap();
        prop_assert_eq!(full.shape(), both.shape());
        prop_assert!(relative_error(full.data(), both.data()) < 1e-12);
    }

    #[test]
    fn qconv_2d_matches_direct(h in 3usize..=9, w in 3usize..=9, seed in any::<u64>()) {
        let val = |t: u64, i: usize| ((qfcn_core::rng::derive(t, i as u64) % 2001) as f64 - 1000.0) / 1000.0 + 1e-3;
        let x = Tensor::new(vec![2, h, w], (0..2 * h * w).map(|i| val(seed, i)).collect()).unwrap();
        let k = Tensor::new(vec![2, 2, 3, 3], (0..36).map(|i| val(!seed, i)).collect()).unwrap();
        let layer = FourierConvLayer::new(&[h, w], &k, ConvMode::Linear).unwrap()
            .with_simulator(Simulator::StateVector);
        let q = qconv_2d(&x, &layer, &NoiseModel::noiseless()).unwrap().output;
        let d = direct_conv_2d(&x, &k, ConvMode::Linear).unwrap();
        prop_assert!(relative_error(q.data(), d.data()) < 1e-9);
        prop_assert!(relative_error(fft_conv_2d(&x, &k).unwrap().data(), d.data()) < 1e-10);
    }

    #[test]
    fn mae_mse_metric_properties(a in prop::collection::vec(-5.0..5.0f64, 1..40), shift in -1.0..1.0f64) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + shift * (i as f64).cos()).collect();
        let (m1, m2) = (mae(&a, &b).unwrap(), mse(&a, &b).unwrap());
        prop_assert!(m1 >= 0.0 && m2 >= 0.0);
        prop_assert!(m1 * m1 <= m2 + 1e-12);
        prop_assert_eq!(mae(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
        if a != b {
            prop_assert!(m1 > 0.0 && m2 > 0.0);
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0..50.0f64, 1..12)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn cap_activation_is_bounded(x in prop::collection::vec(-100.0..100.0f64, 1..20), c in 0.5..20.0f64) {
        prop_assert!(cap_activation(&x, c).iter().all(|y| y.abs() <= c));
    }
}

#[test]
fn noise_error_grows_with_eps() {
    let v: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
    let mean_error = |eps: f64| -> f64 {
        (0..200u64)
            .map(|seed| {
                let noise = NoiseModel::new(eps, 10.0, seed).unwrap();
                let read = tomography_read(&amplitude_encode(&v, &noise).unwrap(), &noise);
                mae(&read, &v).unwrap()
            })
            .sum::<f64>()
            / 200.0
    };
    let errors: Vec<f64> = [0.0, 0.001, 0.01, 0.1].iter().map(|&e| mean_error(e)).collect();
    assert!(errors[0] < 1e-12, "{errors:?}");
    assert!(errors.windows(2).all(|w| w[0] < w[1]), "{errors:?}");
}

#[test]
fn noisy_runs_are_deterministic_per_seed() {
    let k = Tensor::new(vec![1, 1, 3], vec![0.5, -1.0, 0.25]).unwrap();
    let layer = FourierConvLayer::new(&[8], &k, ConvMode::Circular).unwrap();
    let f: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
    let noise = NoiseModel::new(0.05, 10.0, 9).unwrap();
    let a = qconv_1d(&f, &layer, &noise).unwrap().output;
    let b = qconv_1d(&f, &layer, &noise).unwrap().output;
    let c = qconv_1d(&f, &layer, &noise.derive(1)).unwrap().output;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

/// The radix-2 FFT must stay near `N log N`: doubling `N` four times at a
/// time may cost at most 3× the ideal growth.
#[test]
fn fft_scales_like_n_log_n() {
    let time = |bits: u32| -> f64 {
        let n = 1usize << bits;
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
        let mut best = f64::INFINITY;
        for _ in 0..7 {
            let start = Instant::now();
            std::hint::black_box(fft(&x).unwrap());
            best = best.min(start.elapsed().as_secs_f64());
        }
        best / (n as f64 * bits as f64)
    };
    let per_op: Vec<f64> = [14, 16, 18].iter().map(|&b| time(b)).collect();
    for w in per_op.windows(2) {
        assert!(w[1] / w[0] < 3.0, "per-element cost {per_op:?}");
    }
}
