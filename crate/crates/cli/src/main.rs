use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pno_cli::commands::{
    cmd_check_propriety, cmd_evaluate, cmd_generate_data, cmd_grad_check, cmd_train,
};
use pno_cli::eval::DEFAULT_M_EVAL;
use pno_cli::sweep::{cmd_sweep, SweepKind};
use pno_cli::exit_code;
use pno_core::propriety::ProprietySettings;
use pno_core::Result;

#[derive(Parser)]
#[command(name = "pno", version, about = "Probabilistic neural operators trained with the energy score")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it with its manifest.
    GenerateData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Fit a model and write checkpoint, history and resolved config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Score a checkpoint on the test split.
    Evaluate {
        /// Checkpoint file or training output directory.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_M_EVAL)]
        m_eval: usize,
        /// Seed of the sampling stream; defaults to the training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Fuzz energy-score propriety and the kernel-score identity on random discrete measures.
    CheckPropriety {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dims: usize,
        #[arg(long, default_value_t = 5)]
        atoms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare every autodiff primitive and the training losses with finite differences.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate over a grid: dropout, samples or methods.
    Sweep {
        #[arg(long)]
        kind: SweepKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of seeds per cell, starting at --seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_M_EVAL)]
        m_eval: usize,
        #[arg(long)]
        force: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData { config, out, seed, force } => {
            let m = cmd_generate_data(&config, &out, seed, force)?;
            println!(
                "wrote {} samples ({} -> {} frames on {} points) to {}",
                m.samples,
                m.t_in,
                m.t_out,
                m.grid_points,
                out.display()
            );
        }
        Command::Train { config, dataset, out, seed, force } => {
            let run = cmd_train(&config, &dataset, &out, seed, force)?;
            println!(
                "{} seed {}: {} epochs, best epoch {} (validation loss {:.6e}); wrote {}",
                run.config.method,
                run.config.seed,
                run.report.epochs_run(),
                run.report.best_epoch,
                run.report.best_val_loss,
                out.display()
            );
        }
        Command::Evaluate { checkpoint, dataset, out, m_eval, seed, force } => {
            let r = cmd_evaluate(&checkpoint, &dataset, &out, m_eval, seed, force)?;
            println!("method {} seed {} (M = {m_eval})", r.method, r.seed);
            for (name, v) in r.metrics() {
                println!("  {name:<12} {v:.6e}");
            }
        }
        Command::CheckPropriety { trials, dims, atoms, seed, out } => {
            let r = cmd_check_propriety(ProprietySettings { trials, dims, atoms, seed }, out.as_deref())?;
            println!(
                "{} trials, {} equal pairs: min gap {:.3e}, max equal-pair gap {:.3e}, max identity error {:.3e}, max anchor spread {:.3e}",
                r.trials, r.equal_pairs, r.min_gap, r.max_equal_gap, r.max_identity_error, r.max_anchor_spread
            );
        }
        Command::GradCheck { seed, out } => {
            let reports = cmd_grad_check(seed, out.as_deref())?;
            for r in reports {
                println!("{:<22} {:.3e} (< {:.0e})", r.name, r.rel_err, r.tolerance);
            }
        }
        Command::Sweep { kind, config, dataset, out, seeds, seed, m_eval, force } => {
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            let results = cmd_sweep(kind, &config, &dataset, &out, &seeds, m_eval, force, &mut |c| {
                let status = match c.seconds_per_epoch() {
                    Some(s) => format!("{} seeds ok, {s:.3} s/epoch", c.runs.len()),
                    None => "failed".to_string(),
                };
                eprintln!(
                    "{} p_w={} p_f={} M={}: {status}",
                    c.cell.method, c.cell.weight_dropout, c.cell.fourier_dropout, c.cell.m_train
                );
            })?;
            println!("{} cells written to {}", results.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
