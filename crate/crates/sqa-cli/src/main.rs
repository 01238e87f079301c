//! `sqa` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sqa_cli::{
    baseline_label, run_bench, run_check, speedup_table, toy_train, BenchSpec, FaultInjection,
    Suite,
};
use sqa_core::{attention_flops_with_mode, AttentionConfig, CountingMode};

/// Environment variable overriding the bench spec's thread count.
const THREADS_ENV: &str = "SQA_THREADS";

#[derive(Parser)]
#[command(
    name = "sqa",
    version,
    about = "Attention-variant benchmark harness, FLOP model and validation suites",
    after_help = "Set SQA_THREADS to override the thread count of `bench` runs."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a timing sweep described by a JSON spec and write a CSV.
    Bench {
        /// Path to the sweep spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Suppress the summary tables on stdout.
        #[arg(long)]
        quiet: bool,
    },
    /// Print the FLOP report of one config at sequence length N as JSON.
    Flops {
        /// Path to an attention config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Sequence length.
        #[arg(long)]
        n: usize,
        /// Counting mode: what a dense kernel executes, or only
        /// mask-allowed positions.
        #[arg(long, default_value = "dense", value_parser = parse_mode)]
        mode: CountingMode,
    },
    /// Run validation suites; exits nonzero if any case fails.
    Check {
        /// One of: equivalence, gradients, flops, all.
        #[arg(long)]
        suite: Suite,
        /// Inject a deliberate defect (softmax-sign) to prove the suite
        /// catches it.
        #[arg(long, value_name = "FAULT")]
        inject_fault: Option<FaultInjection>,
    },
    /// Fit one attention layer to a fixed random regression and print the
    /// loss curve.
    Train {
        /// Path to an attention config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the variant tag of a config.
    Classify {
        /// Path to an attention config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<CountingMode, String> {
    match s {
        "dense" => Ok(CountingMode::Dense),
        "effective" => Ok(CountingMode::Effective),
        other => Err(format!("unknown mode '{other}' (expected dense or effective)")),
    }
}

fn load_config(path: &PathBuf) -> Result<AttentionConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    AttentionConfig::from_json(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Bench { spec, out, quiet } => {
            let text =
                std::fs::read_to_string(&spec).map_err(|e| format!("{}: {e}", spec.display()))?;
            let mut spec = BenchSpec::from_json(&text).map_err(|e| e.to_string())?;
            if let Ok(value) = std::env::var(THREADS_ENV) {
                spec.threads = value
                    .parse()
                    .map_err(|_| format!("{THREADS_ENV} must be a positive integer"))?;
            }
            let output = run_bench(&spec).map_err(|e| e.to_string())?;
            std::fs::write(&out, sqa_cli::csv::emit(&output))
                .map_err(|e| format!("{}: {e}", out.display()))?;
            if !quiet {
                println!(
                    "# threads={} precision={} seed={}",
                    output.meta.threads, output.meta.precision, output.meta.seed
                );
                for skip in &output.skipped {
                    println!("# skipped {}@{}: {}", skip.label, skip.n, skip.reason);
                }
                if !output.records.is_empty() {
                    let baseline = baseline_label(&spec.configs);
                    let table = speedup_table(&output.records, &baseline)
                        .map_err(|e| e.to_string())?;
                    println!("{table}");
                }
                println!("wrote {}", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Flops { config, n, mode } => {
            let cfg = load_config(&config)?;
            let report = attention_flops_with_mode(&cfg, n, mode).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { suite, inject_fault } => {
            let fault = inject_fault.unwrap_or_default();
            let report = run_check(suite, fault);
            for case in &report.cases {
                println!("{case}");
            }
            let (pass, total) = (
                report.cases.iter().filter(|c| c.passed).count(),
                report.cases.len(),
            );
            println!("{pass}/{total} cases passed");
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Cmd::Train {
            config,
            steps,
            lr,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let losses = toy_train(&cfg, steps, lr, seed).map_err(|e| e.to_string())?;
            println!("step,loss");
            for (step, loss) in losses.iter().enumerate() {
                println!("{step},{loss}");
            }
            let (first, last) = (losses[0], losses[losses.len() - 1]);
            eprintln!("initial {first:.6} final {last:.6} ratio {:.4}", last / first);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Classify { config } => {
            let cfg = load_config(&config)?;
            let tag = cfg.classify().map_err(|e| e.to_string())?;
            println!("{tag}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
