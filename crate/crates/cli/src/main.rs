use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hafit_cli::{CliError, RunInputs};
use hafit_core::grad::DEFAULT_STEP_DB;
use hafit_core::synth::SynthCorpusSpec;
use hafit_core::train::CbPolicy;

/// Fit hearing-aid gains by gradient descent on an auditory-model
/// intelligibility objective.
#[derive(Parser)]
#[command(name = "hafit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Zero,
    Mirror,
}

impl From<Policy> for CbPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Zero => CbPolicy::Zero,
            Policy::Mirror => CbPolicy::Mirror,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Audiogram JSON file, a standard label (N1..N7, S1..S3) or flatNN.
    #[arg(long)]
    audiogram: Option<String>,
    /// Corpus directory of WAV files.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Training config (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_enum)]
    cb_policy: Option<Policy>,
}

impl Common {
    fn inputs(&self) -> RunInputs {
        RunInputs {
            audiogram: self.audiogram.clone(),
            corpus: self.corpus.clone(),
            config: self.config.clone(),
            seed: self.seed,
            epochs: self.epochs,
            cb_policy: self.cb_policy.map(Into::into),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train processor gains for one audiogram.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint written by an earlier fit.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the NAL-R prescription for an audiogram.
    Prescribe {
        #[arg(long)]
        audiogram: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score gain records on the held-out split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Gain record file, or `original` / `nalr`. Repeatable.
        #[arg(long = "gains", required = true)]
        gains: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Number of random segments to check.
        #[arg(long, default_value_t = 1)]
        segments: usize,
        /// Finite-difference step in dB.
        #[arg(long, default_value_t = DEFAULT_STEP_DB)]
        step: f64,
        /// Gain (dB, all bands) at which to check; defaults to the
        /// configured initialisation.
        #[arg(long)]
        init: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a deterministic synthetic speech-like corpus.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 160)]
        train: usize,
        #[arg(long, default_value_t = 20)]
        valid: usize,
        #[arg(long, default_value_t = 20)]
        test: usize,
        #[arg(long, default_value_t = 3.0)]
        seconds: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { common, resume, out } => {
            let s = hafit_cli::fit(argv, &common.inputs(), resume.as_deref(), &out)?;
            println!("epochs: {}", s.epochs);
            println!("best gains (dB):  {}", s.best_gains);
            println!("final gains (dB): {}", s.final_gains);
            if let Some(v) = s.best_val_loss {
                println!("best validation loss: {v:.6}");
            }
            println!("outputs in {}", out.display());
        }
        Command::Prescribe { audiogram, out } => {
            let g = hafit_cli::prescribe(argv, &audiogram, &out)?;
            println!("NAL-R gains (dB): {g}");
        }
        Command::Evaluate { common, gains, out } => {
            let r = hafit_cli::evaluate_cmd(argv, &common.inputs(), &gains, &out)?;
            print!("{}", r.report);
        }
        Command::Gradcheck { common, segments, step, init, out } => {
            let r = hafit_cli::gradcheck(argv, &common.inputs(), segments, step, init, out.as_deref())?;
            print!("{}", r.to_csv());
            let verdict = if r.passed() { "PASS" } else { "FAIL" };
            println!(
                "{verdict}: max relative error {:.3e} at gains {} (tolerance {:e})",
                r.max_error(),
                r.gains,
                r.tolerance
            );
            if !r.passed() {
                return Err(CliError::Check("gradient check failed".into()));
            }
        }
        Command::SynthCorpus { out, train, valid, test, seconds, seed } => {
            let spec = SynthCorpusSpec { train, validation: valid, test, seconds, seed, ..Default::default() };
            let n = hafit_cli::synth_corpus(argv, &spec, &out)?;
            println!("wrote {n} files ({:.1} min) to {}", spec.total_seconds() / 60.0, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
