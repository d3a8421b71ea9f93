use std::path::PathBuf;
use std::process::ExitCode;

use adagrad_lab_harness::checks::{run_checks, Suite};
use adagrad_lab_harness::config::ExperimentConfig;
use adagrad_lab_harness::experiment::{bound_constants, run_experiment, thresholds, CellStatus};
use adagrad_lab_harness::{HarnessError, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "adagrad-lab", version, about = "AdaGrad experiment grids and property checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write traces plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named property suite: lemma1, lemma2, descent, assumptions, trajectory.
    Check {
        #[arg(long)]
        suite: String,
        /// Print every instance, not only failures.
        #[arg(long)]
        verbose: bool,
    },
    /// Print bound constants and learning-rate thresholds for a config's problem.
    Constants {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg)?;
            for c in &summary.cells {
                let last = c.running_min.iter().rev().flatten().next();
                println!(
                    "eta={} seed={} status={:?} steps={} min_grad_sq={}",
                    c.eta,
                    c.seed,
                    c.status,
                    c.steps,
                    last.map_or("-".into(), |m| format!("{m:.6e}")),
                );
            }
            let errors = summary.count(CellStatus::Error);
            if errors > 0 {
                let e = HarnessError::Config(format!("{errors} cell(s) failed, see summary.json"));
                eprintln!("{}", e.record());
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { suite, verbose } => {
            let suite: Suite = suite.parse()?;
            let report = run_checks(suite)?;
            for item in &report.items {
                if verbose || !item.passed {
                    let tag = if item.passed { "PASS" } else { "FAIL" };
                    println!("{tag} {} margin={:.3e}", item.name, item.margin);
                }
            }
            let failed = report.failures().count();
            println!(
                "{suite}: {} of {} passed, worst margin {:.3e}",
                report.items.len() - failed,
                report.items.len(),
                report.worst_margin()
            );
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Constants { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            #[derive(Serialize)]
            struct Row {
                eta: f64,
                c1: Option<f64>,
                c2: Option<f64>,
                c3: Option<f64>,
            }
            let mut rows = Vec::new();
            let mut limits = None;
            for &eta in &cfg.eta_grid {
                let p = cfg.build_problem(eta)?;
                let c = bound_constants(p.as_ref(), eta, cfg.nu0)?;
                rows.push(Row { eta, c1: c.map(|c| c.c1), c2: c.map(|c| c.c2), c3: c.map(|c| c.c3) });
                limits.get_or_insert_with(|| thresholds(p.as_ref()));
            }
            let out = serde_json::json!({
                "problem": cfg.problem.name,
                "constants": rows,
                "thresholds": limits,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
