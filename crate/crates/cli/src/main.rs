use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drne_core::artifact::{read_checkpoint, read_points};
use drne_core::diagnostics::{projected_residual, restricted_gap, ProbeKind, ProbeSet};
use drne_core::experiment::run_experiment;
use drne_core::par::with_workers;
use drne_core::selftest::{run_selftest, SelftestHooks};
use drne_core::{Error, Execution, ExperimentConfig};

#[derive(Parser)]
#[command(name = "drne", version)]
#[command(about = "Gradient descent-ascent solver for distributionally robust Nash games")]
struct Cli {
    /// Worker threads for parallel runs (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory; overrides the config's [output] dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (batch size, seed) combination of an experiment config
    Run { config: PathBuf },
    /// Run the built-in correctness checks
    Selftest {
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_simplex: f64,
    },
    /// Evaluate the restricted gap and residual of a saved checkpoint
    Gap {
        checkpoint: PathBuf,
        config: PathBuf,
        /// Checkpoint or iterate trace to add to the probe set (repeatable)
        #[arg(long = "probe")]
        probes: Vec<PathBuf>,
    },
}

/// Failed check or incomplete run.
const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parameter(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CHECK,
    }
}

fn cmd_run(config_path: &Path, out: Option<PathBuf>, quiet: bool) -> Result<u8, Error> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(dir) = out {
        config.output.dir = dir;
    }
    let bundle = run_experiment(&config, Execution::Parallel)?;
    if !quiet {
        println!("wrote {} files to {}", bundle.manifest.files.len(), bundle.dir.display());
        println!("{:>6} {:>9} {:>5} {:>14} {:>14}", "batch", "T", "runs", "mean gap", "mean residual");
        for r in &bundle.manifest.summary {
            println!("{:>6} {:>9} {:>5} {:>14.6e} {:>14.6e}", r.batch_size, r.t, r.runs, r.mean_gap, r.mean_residual);
        }
    }
    for f in &bundle.manifest.failures {
        eprintln!("run b={} seed={} failed: {}", f.batch_size, f.seed, f.message);
    }
    Ok(if bundle.is_complete() { 0 } else { EXIT_CHECK })
}

fn cmd_selftest(perturb: f64, out: Option<PathBuf>, quiet: bool) -> Result<u8, Error> {
    let report = run_selftest(&SelftestHooks {
        simplex_perturbation: perturb,
    });
    if !quiet {
        print!("{}", report.table());
    }
    if let Some(dir) = out {
        report.write(&dir)?;
    }
    for c in report.failed() {
        eprintln!("check failed: {}", c.name);
    }
    Ok(if report.all_passed() { 0 } else { EXIT_CHECK })
}

fn cmd_gap(checkpoint: &Path, config_path: &Path, extra: &[PathBuf], quiet: bool) -> Result<u8, Error> {
    let config = ExperimentConfig::load(config_path)?;
    let game = config.instance.build()?;
    let z = read_checkpoint(checkpoint)?;
    z.check_shape(&game)?;
    let mut probes = ProbeSet::global(&game, config.solver.probe_seed);
    for path in extra {
        for y in read_points(path)? {
            y.check_shape(&game)?;
            if !y.is_feasible(&game, 1e-9) {
                return Err(Error::Domain(format!("probe from {} is not feasible", path.display())));
            }
            probes.push(ProbeKind::History, y);
        }
    }
    let probes = probes.with_anchored(&game, &z)?;
    let gap = restricted_gap(&game, &z, &probes, Execution::Parallel)?;
    let residual = projected_residual(&game, &z, config.solver.residual_step)?;
    let feasible = z.is_feasible(&game, 1e-9);
    println!("gap {:.12e}", gap.value);
    println!("residual {:.12e}", residual);
    if !quiet {
        println!("feasible {feasible}");
        println!("probes {} (maximizer #{}, {:?})", gap.probe_count, gap.probe_index, gap.method);
        for (kind, n) in &gap.provenance {
            println!("  {kind:?}: {n}");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .init();

    let Cli {
        workers,
        out,
        quiet,
        command,
    } = cli;
    let result = with_workers(workers, move || match command {
        Command::Run { config } => cmd_run(&config, out, quiet),
        Command::Selftest { perturb_simplex } => cmd_selftest(perturb_simplex, out, quiet),
        Command::Gap {
            checkpoint,
            config,
            probes,
        } => cmd_gap(&checkpoint, &config, &probes, quiet),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
