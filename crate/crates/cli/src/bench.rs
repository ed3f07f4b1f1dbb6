//! `qfcn bench-conv`: direct versus FFT-based 2-D convolution.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;

use qfcn_core::models::{direct_conv_2d, ConvMode, FftConv2d};
use qfcn_core::rng;
use qfcn_core::Tensor;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchScale {
    /// Kernel 2×3×5×5, signal 3×1024×1024.
    Large,
    /// Kernel 2×3×3×3, signal 3×16×16.
    Tiny,
}

impl BenchScale {
    /// `(signal [C, H, W], kernel [O, C, kh, kw])`.
    pub fn shapes(self) -> ([usize; 3], [usize; 4]) {
        match self {
            BenchScale::Large => ([3, 1024, 1024], [2, 3, 5, 5]),
            BenchScale::Tiny => ([3, 16, 16], [2, 3, 3, 3]),
        }
    }

    /// Only the large scale asserts that the FFT route is faster.
    pub fn requires_speedup(self) -> bool {
        self == BenchScale::Large
    }
}

impl FromStr for BenchScale {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "paper" | "large" => Ok(BenchScale::Large),
            "tiny" => Ok(BenchScale::Tiny),
            other => Err(CliError::Config(format!("unknown scale '{other}' (paper or tiny)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub scale: BenchScale,
    pub repetitions: usize,
    pub direct_median: f64,
    pub fft_median: f64,
    pub max_abs_diff: f64,
}

impl BenchReport {
    pub fn ratio(&self) -> f64 {
        self.fft_median / self.direct_median
    }

    pub fn passed(&self) -> bool {
        !self.scale.requires_speedup() || self.ratio() < 1.0
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (x, k) = self.scale.shapes();
        writeln!(f, "signal {x:?}  kernel {k:?}  repetitions {}", self.repetitions)?;
        writeln!(f, "direct median {:.3} ms", self.direct_median * 1e3)?;
        writeln!(f, "fft    median {:.3} ms", self.fft_median * 1e3)?;
        writeln!(f, "max |fft - direct| {:.3e}", self.max_abs_diff)?;
        write!(f, "ratio fft/direct {:.3}", self.ratio())?;
        if self.scale.requires_speedup() {
            write!(f, "  ({})", if self.passed() { "PASS: < 1.0" } else { "FAIL: >= 1.0" })?;
        }
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time<T>(f: impl Fn() -> CliResult<T>, reps: usize) -> CliResult<(Vec<f64>, T)> {
    let mut last = f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        last = f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((times, last))
}

/// Times both routes after one warm-up run each; `repetitions` must be at
/// least 1.
pub fn run_bench(scale: BenchScale, repetitions: usize, seed: u64) -> CliResult<BenchReport> {
    if repetitions == 0 {
        return Err(CliError::Config("repetitions must be >= 1".into()));
    }
    let (xs, ks) = scale.shapes();
    let mut r = rng::stream(seed, 0);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| r.random::<f64>() - 0.5).collect() };
    let x = Tensor::new(xs.to_vec(), draw(xs.iter().product()))?;
    let k = Tensor::new(ks.to_vec(), draw(ks.iter().product()))?;
    let (direct_times, direct) =
        time(|| Ok(direct_conv_2d(&x, &k, ConvMode::Linear)?), repetitions)?;
    let (fft_times, fast) = time(|| Ok(FftConv2d::new(&k)?.apply(&x)?), repetitions)?;
    let max_abs_diff = direct
        .data()
        .iter()
        .zip(fast.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(BenchReport {
        scale,
        repetitions,
        direct_median: median(direct_times),
        fft_median: median(fft_times),
        max_abs_diff,
    })
}
