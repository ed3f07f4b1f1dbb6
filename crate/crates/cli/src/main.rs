use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qfcn_cli::bench::{run_bench, BenchScale};
use qfcn_cli::verify::{cmd_verify, Suite, VerifyOptions};
use qfcn_cli::{train_mnist, train_ts, CliError, CliResult};

#[derive(Parser)]
#[command(name = "qfcn", version, about = "Quantum Fourier convolution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oracle suites; exit 0 iff all pass.
    Verify {
        /// Only run this suite: qft, conv, grad, mmap or prob.
        #[arg(long)]
        suite: Option<Suite>,
    },
    /// Train the image classifier on MNIST IDX files.
    TrainMnist {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` settings that take precedence over the config file.
        overrides: Vec<String>,
    },
    /// Train the spatio-temporal forecaster.
    TrainTs {
        #[arg(long)]
        config: Option<PathBuf>,
        overrides: Vec<String>,
    },
    /// Time direct against FFT-based 2-D convolution.
    BenchConv {
        #[arg(long, default_value = "paper")]
        scale: BenchScale,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

fn run(cli: Cli) -> CliResult<bool> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Verify { suite } => {
            let reports = cmd_verify(suite, &VerifyOptions::default(), &mut stdout)?;
            Ok(reports.iter().all(|r| r.passed()))
        }
        Command::TrainMnist { config, overrides } => {
            let cfg = train_mnist::resolve_config(config.as_deref(), &overrides)?;
            train_mnist::cmd_train_mnist(&cfg, &mut stdout)?;
            Ok(true)
        }
        Command::TrainTs { config, overrides } => {
            let cfg = train_ts::resolve_config(config.as_deref(), &overrides)?;
            train_ts::cmd_train_ts(&cfg, &mut stdout)?;
            Ok(true)
        }
        Command::BenchConv { scale, reps } => {
            let report = run_bench(scale, reps, 0)?;
            writeln!(stdout, "{report}").map_err(|e| CliError::io("<stdout>", e))?;
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
