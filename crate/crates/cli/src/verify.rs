//! Oracle suites behind `qfcn verify`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qfcn_core::encode::NoiseModel;
use qfcn_core::fourier_conv::{
    conv_success_probability, m_map, qconv_1d, qconv_2d, FourierConvLayer, Simulator,
};
use qfcn_core::models::{direct_conv, direct_conv_2d, dft_oracle, ConvMode};
use qfcn_core::qft::{build_qft, iqft_amplitudes, qft_amplitudes};
use qfcn_core::rng;
use qfcn_core::statevec::StateVector;
use qfcn_core::train::{
    parameter_shift_grad, relative_error, ry_z_expectation, ParamVector, ProbeModel,
};
use qfcn_core::Tensor;

use crate::error::{CliError, CliResult};

/// A classical FFT with the unitary positive-exponent convention.
pub type FftFn = fn(&[Complex64]) -> qfcn_core::Result<Vec<Complex64>>;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// FFT under test; replaceable to check that the suites catch bugs.
    pub fft: FftFn,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { fft: qfcn_core::models::fft, seed: 2024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Qft,
    Conv,
    Grad,
    Mmap,
    Prob,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Qft, Suite::Conv, Suite::Grad, Suite::Mmap, Suite::Prob];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Qft => "qft",
            Suite::Conv => "conv",
            Suite::Grad => "grad",
            Suite::Mmap => "mmap",
            Suite::Prob => "prob",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Suite::Qft => "QFT = DFT = FFT",
            Suite::Conv => "qconv = direct_conv",
            Suite::Grad => "shift = finite difference = analytic",
            Suite::Mmap => "m_map permutation",
            Suite::Prob => "success probability = sum |f^ g^|^2",
        }
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            CliError::Config(format!("unknown suite '{s}' (expected qft, conv, grad, mmap, prob)"))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Inputs of the first failing case.
    pub failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<5} {:<40} cases={} max_error={:.3e} tol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite.name(),
            self.suite.title(),
            self.cases,
            self.max_error,
            self.tolerance
        )?;
        if let Some(case) = &self.failure {
            write!(f, "\n  first failing case: {case}")?;
        }
        Ok(())
    }
}

/// Running maximum error with the first case over tolerance.
struct Tally {
    suite: Suite,
    tolerance: f64,
    cases: usize,
    max_error: f64,
    failure: Option<String>,
}

impl Tally {
    fn new(suite: Suite, tolerance: f64) -> Self {
        Self { suite, tolerance, cases: 0, max_error: 0.0, failure: None }
    }

    fn check(&mut self, error: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        let error = if error.is_nan() { f64::INFINITY } else { error };
        self.max_error = self.max_error.max(error);
        if error > self.tolerance && self.failure.is_none() {
            self.failure = Some(format!("{} (error {error:.3e})", case()));
        }
    }

    fn fail(&mut self, case: String) {
        self.cases += 1;
        if self.failure.is_none() {
            self.failure = Some(case);
        }
    }

    fn report(self) -> SuiteReport {
        SuiteReport {
            suite: self.suite,
            cases: self.cases,
            max_error: self.max_error,
            tolerance: self.tolerance,
            failure: self.failure,
        }
    }
}

fn random_state(r: &mut ChaCha8Rng, n: usize) -> CliResult<StateVector> {
    let amps = (0..1usize << n)
        .map(|_| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
        .collect();
    Ok(StateVector::normalized(amps)?.0)
}

fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_cvec(v: &[Complex64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{:.17e}{:+.17e}i", x.re, x.im)).collect();
    format!("[{}]", items.join(", "))
}

fn qft_suite(opts: &VerifyOptions) -> CliResult<SuiteReport> {
    let mut tally = Tally::new(Suite::Qft, 1e-9);
    let mut r = rng::stream(opts.seed, 1);
    for n in 1..=8 {
        for _ in 0..10 {
            let s = random_state(&mut r, n)?;
            let q = qft_amplitudes(&s)?;
            let d = dft_oracle(s.amplitudes());
            let f = (opts.fft)(s.amplitudes())?;
            let back = iqft_amplitudes(&q)?;
            let err = max_diff(q.amplitudes(), &d)
                .max(max_diff(&f, &d))
                .max(max_diff(back.amplitudes(), s.amplitudes()));
            tally.check(err, || format!("n={n} state={}", fmt_cvec(s.amplitudes())));
        }
    }
    for n in 1..=16 {
        let counted = build_qft(n)?.counted_gates;
        if counted != n * (n + 1) / 2 {
            tally.fail(format!("n={n}: {counted} gates, expected {}", n * (n + 1) / 2));
        }
    }
    Ok(tally.report())
}

fn conv_suite(opts: &VerifyOptions) -> CliResult<SuiteReport> {
    let mut tally = Tally::new(Suite::Conv, 1e-6);
    let mut r = rng::stream(opts.seed, 2);
    let clean = NoiseModel::noiseless();
    for bits in 1..=6 {
        let n = 1usize << bits;
        for _ in 0..5 {
            let klen = r.random_range(1..=n);
            let f = random_vec(&mut r, n);
            let g = random_vec(&mut r, klen);
            let k = Tensor::new(vec![1, 1, klen], g.clone())?;
            let layer = FourierConvLayer::new(&[n], &k, ConvMode::Circular)?
                .with_simulator(Simulator::StateVector);
            let q = qconv_1d(&f, &layer, &clean)?.output.into_data();
            let d = direct_conv(&f, &g, ConvMode::Circular)?;
            tally.check(relative_error(&q, &d), || {
                format!("circular N={n} f={} g={}", fmt_vec(&f), fmt_vec(&g))
            });
        }
    }
    for _ in 0..4 {
        let (h, w) = (r.random_range(4..=10), r.random_range(4..=10));
        let k = if h.min(w) >= 5 && r.random::<bool>() { 5 } else { 3 };
        let x = Tensor::new(vec![1, h, w], random_vec(&mut r, h * w))?;
        let kern = Tensor::new(vec![1, 1, k, k], random_vec(&mut r, k * k))?;
        let layer = FourierConvLayer::new(&[h, w], &kern, ConvMode::Linear)?
            .with_simulator(Simulator::StateVector);
        let q = qconv_2d(&x, &layer, &clean)?.output;
        let d = direct_conv_2d(&x, &kern, ConvMode::Linear)?;
        tally.check(relative_error(q.data(), d.data()), || {
            format!("2-D {h}x{w} k={k} x={} k={}", fmt_vec(x.data()), fmt_vec(kern.data()))
        });
    }
    Ok(tally.report())
}

fn grad_suite(opts: &VerifyOptions) -> CliResult<SuiteReport> {
    let mut tally = Tally::new(Suite::Grad, 1e-4);
    for i in 0..5u64 {
        let seed = rng::derive(opts.seed, i);
        let model = ProbeModel::random(8, 3, seed)?;
        let analytic = model.analytic_grad()?;
        let shift = model.shift_grad()?;
        let fd = model.finite_difference_grad(1e-5)?;
        let err = relative_error(&shift, &analytic).max(relative_error(&fd, &analytic));
        tally.check(err, || format!("ProbeModel::random(8, 3, {seed})"));
    }
    for theta in [-2.5, -0.3, 0.0, 0.7, 1.9, 3.0] {
        let mut pv = ParamVector::from_values(&[theta])?;
        let g = parameter_shift_grad(ry_z_expectation, &mut pv, 0)?;
        tally.check((g + f64::sin(theta)).abs(), || format!("Ry/Z theta={theta}"));
    }
    Ok(tally.report())
}

fn mmap_suite(opts: &VerifyOptions) -> CliResult<SuiteReport> {
    let mut tally = Tally::new(Suite::Mmap, 1e-12);
    for n in 1..=4 {
        let size = 1usize << n;
        for t in 0..size {
            for j in 0..size {
                let s = StateVector::basis(2 * n, t * size + j)?;
                let out = m_map(&s)?;
                let want = t * size + (j + size - t) % size;
                let err = (out.amplitude(want) - Complex64::new(1.0, 0.0)).norm();
                tally.check(err, || format!("n={n} |t={t}>|j={j}> expected index {want}"));
            }
        }
    }
    // on f̂ ⊗ ĝ the j = 0 branch holds the pointwise product
    let mut r = rng::stream(opts.seed, 4);
    for n in 1..=5 {
        let f = random_state(&mut r, n)?;
        let g = random_state(&mut r, n)?;
        let joint = qfcn_core::statevec::tensor_product(&f, &g);
        let out = m_map(&joint)?;
        let size = 1usize << n;
        let err = (0..size)
            .map(|t| (out.amplitude(t * size) - f.amplitude(t) * g.amplitude(t)).norm())
            .fold(0.0, f64::max);
        tally.check(err, || format!("product branch n={n}"));
    }
    Ok(tally.report())
}

fn prob_suite(opts: &VerifyOptions) -> CliResult<SuiteReport> {
    let mut tally = Tally::new(Suite::Prob, 1e-9);
    let mut r = rng::stream(opts.seed, 5);
    let clean = NoiseModel::noiseless();
    let unit_spectrum = |v: &[f64]| -> CliResult<Vec<Complex64>> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x / norm, 0.0)).collect();
        Ok((opts.fft)(&a)?)
    };
    for bits in 1..=5 {
        let n = 1usize << bits;
        for _ in 0..4 {
            let f = random_vec(&mut r, n);
            let klen = r.random_range(1..=n);
            let mut g = random_vec(&mut r, klen);
            let k = Tensor::new(vec![1, 1, klen], g.clone())?;
            let layer = FourierConvLayer::new(&[n], &k, ConvMode::Circular)?
                .with_simulator(Simulator::StateVector);
            let p = qconv_1d(&f, &layer, &clean)?
                .success_prob()
                .ok_or_else(|| CliError::Assertion("no pair statistics".into()))?;
            g.resize(n, 0.0);
            let (fh, gh) = (unit_spectrum(&f)?, unit_spectrum(&g)?);
            let expected: f64 = fh.iter().zip(&gh).map(|(a, b)| (a * b).norm_sqr()).sum();
            let closed = conv_success_probability(&f, &g)?;
            let err = (p - expected).abs().max((closed - expected).abs());
            tally.check(err, || format!("N={n} f={} g={}", fmt_vec(&f), fmt_vec(&g)));
        }
    }
    Ok(tally.report())
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> CliResult<SuiteReport> {
    match suite {
        Suite::Qft => qft_suite(opts),
        Suite::Conv => conv_suite(opts),
        Suite::Grad => grad_suite(opts),
        Suite::Mmap => mmap_suite(opts),
        Suite::Prob => prob_suite(opts),
    }
}

/// Runs the selected suites (all when `only` is `None`), printing one
/// line per suite to `out`; returns the reports.
pub fn cmd_verify(
    only: Option<Suite>,
    opts: &VerifyOptions,
    out: &mut dyn std::io::Write,
) -> CliResult<Vec<SuiteReport>> {
    let suites: Vec<Suite> = match only {
        Some(s) => vec![s],
        None => Suite::ALL.to_vec(),
    };
    let mut reports = Vec::with_capacity(suites.len());
    for s in suites {
        let report = run_suite(s, opts)?;
        writeln!(out, "{report}").map_err(|e| CliError::io("<stdout>", e))?;
        reports.push(report);
    }
    Ok(reports)
}
