use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use imdp_core::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "imdp", version, about = "Certified controller synthesis through interval MDP abstractions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build, solve, refine and validate once
    Run(Common),
    /// Interval MDP versus point-estimate MDP over the configured sample sizes
    Sweep(Common),
    /// Write the explicit-state interval MDP only
    Export(Common),
    /// Re-validate the controller stored in the output directory
    Validate(Common),
    /// Print or write a built-in configuration
    Preset {
        name: String,
        /// Write the configuration here instead of standard output
        #[arg(long, value_name = "PATH")]
        emit: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn show(dir: &Path, file: &str) -> String {
    dir.join(file).display().to_string()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let out = harness::run_pipeline(&cfg)?;
            let s = &out.summary;
            println!(
                "certified {:.6}  empirical {:.6} [{:.6}, {:.6}]  {}",
                s.certified,
                s.validation.empirical,
                s.validation.ci_low,
                s.validation.ci_high,
                if s.validation.pass { "pass" } else { "FAIL" }
            );
            println!(
                "{} regions, {} transitions; abstraction {:.3}s, solving {:.3}s, validation {:.3}s",
                s.regions, s.transitions, out.timings.abstraction_s, out.timings.solving_s, out.timings.validation_s
            );
            println!("summary written to {}", show(&out.dir, harness::SUMMARY_FILE));
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let res = harness::run_sweep(&cfg)?;
            println!("{} rows written to {}", res.rows.len(), show(&cfg.output, harness::SWEEP_FILE));
        }
        Command::Export(c) => {
            let cfg = load(&c)?;
            let (sta, tra) = harness::export_model(&cfg)?;
            println!("{}\n{}", sta.display(), tra.display());
        }
        Command::Validate(c) => {
            let cfg = load(&c)?;
            let r = harness::revalidate(&cfg)?;
            println!(
                "certified {:.6}  empirical {:.6} [{:.6}, {:.6}]  {}",
                r.certified,
                r.empirical,
                r.ci_low,
                r.ci_high,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        Command::Preset { name, emit } => {
            let cfg = harness::preset(&name)?;
            match emit {
                Some(path) => {
                    cfg.save(&path).with_context(|| format!("writing {}", path.display()))?;
                    println!("{}", path.display());
                }
                None => print!("{}", cfg.to_toml_string()?),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
