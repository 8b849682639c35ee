use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use unimod::config::parse_algorithm;
use unimod::error::exit;
use unimod::{
    load_config, parse_seeds, run_design, run_sweep, run_verify, Overrides, StopReason,
    VerifyOptions, VerifySizes,
};

#[derive(Parser)]
#[command(
    name = "unimod",
    version,
    about = "Design unimodular sequence sets with low correlation sidelobes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Admm,
    Pdmm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SizesArg {
    Small,
    Medium,
}

#[derive(Subcommand)]
enum Command {
    /// Run one design and write its output files.
    Design {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in self-check suites.
    Verify {
        #[arg(long, value_enum, default_value = "small")]
        sizes: SizesArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Repeat a design over several seeds and aggregate the levels.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn algorithm_name(a: AlgorithmArg) -> &'static str {
    match a {
        AlgorithmArg::Admm => "admm",
        AlgorithmArg::Pdmm => "pdmm",
    }
}

fn run(cli: Cli) -> unimod::Result<i32> {
    match cli.command {
        Command::Design {
            config,
            seed,
            algorithm,
            out,
        } => {
            let overrides = Overrides {
                seed,
                algorithm: algorithm
                    .map(|a| parse_algorithm(algorithm_name(a)))
                    .transpose()?,
                output_dir: out,
            };
            let cfg = load_config(&config, &overrides)?;
            let rep = run_design(&cfg)?;
            let s = &rep.summary;
            println!(
                "{}: {} iterations, average level {:.2} dB, minimum {:.2} dB -> {}",
                s.stop_reason,
                s.iterations,
                s.level.average_db,
                s.level.minimum_db,
                rep.dir.display()
            );
            Ok(if s.stop_reason == StopReason::Diverged {
                exit::DIVERGENCE
            } else {
                exit::SUCCESS
            })
        }
        Command::Verify { sizes, seed } => {
            let opts = VerifyOptions {
                sizes: match sizes {
                    SizesArg::Small => VerifySizes::Small,
                    SizesArg::Medium => VerifySizes::Medium,
                },
                seed,
                ..Default::default()
            };
            let report = run_verify(&opts)?;
            print!("{}", report.render());
            if report.all_passed() {
                Ok(exit::SUCCESS)
            } else {
                for s in report.suites.iter().filter(|s| !s.passed) {
                    eprintln!("suite {} failed: {}", s.name, s.detail);
                }
                Ok(exit::VERIFY_FAILURE)
            }
        }
        Command::Sweep { config, seeds, out } => {
            let seeds = parse_seeds(&seeds)?;
            let overrides = Overrides {
                output_dir: out,
                ..Default::default()
            };
            let cfg = load_config(&config, &overrides)?;
            let rep = run_sweep(&cfg, &seeds)?;
            println!(
                "{} runs, {} failed; aggregate average {:.2} dB, minimum {:.2} dB",
                rep.runs.len(),
                rep.failures(),
                rep.aggregate_average_db,
                rep.aggregate_minimum_db
            );
            Ok(if rep.failures() == 0 {
                exit::SUCCESS
            } else {
                exit::DIVERGENCE
            })
        }
    }
}

fn main() -> ExitCode {
    // clap's own usage-error code (2) would collide with divergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::VALIDATION as u8
            } else {
                0
            });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
