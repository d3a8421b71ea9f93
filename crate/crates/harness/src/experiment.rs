use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use adagrad_lab::diagnostics::{
    compute_bound_constants, fit_rate_after_burn_in, running_min_at, theorem1_rhs,
    theorem4_threshold, theorem5_threshold, BoundConstants, BoundInputs, RateFit,
};
use adagrad_lab::linalg::norm_sq;
use adagrad_lab::optimizers::{
    run_with_rng, DivergenceReport, Method, OptimizerConfig, RunOptions, TracePoint,
};
use adagrad_lab::problems::Problem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub const THREADS_ENV: &str = "ADAGRAD_LAB_THREADS";
pub const SUMMARY_FILE: &str = "summary.json";

/// A run that never aborts is still reported as diverged when ‖∇f‖² rises at
/// every step and ends at least this factor above where it started.
pub const GROWTH_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Diverged,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub eta: f64,
    pub eta_index: usize,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceReport>,
    /// Recorded iterations (epochs for `rr`).
    pub steps: usize,
    /// File name inside the output directory.
    pub trace_file: String,
    /// min_{t ≤ T} ‖∇f(w_t)‖² per checkpoint; null past the last completed step.
    pub running_min: Vec<Option<f64>>,
    pub rate_fit: Option<RateFit>,
    pub last_grad_norm: Option<f64>,
    /// Whether the running minimum exceeds the high-probability bound, per checkpoint.
    pub exceeds_bound: Vec<Option<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaSummary {
    pub eta: f64,
    pub bound_constants: Option<BoundConstants>,
    pub bound_rhs: Vec<f64>,
    /// Fraction of cells at this eta whose running minimum exceeds the bound,
    /// per checkpoint, among cells that reached it.
    pub violation_fraction: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    /// Largest learning rate covered by the relaxed-smoothness convergence result.
    pub relaxed_eta_max: Option<f64>,
    /// Learning rate above which the zigzag construction diverges.
    pub zigzag_eta_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub problem: String,
    pub params: BTreeMap<String, f64>,
    pub method: Method,
    pub nu0: f64,
    pub delta: f64,
    pub trace_stride: u64,
    pub checkpoints: Vec<u64>,
    pub thresholds: Thresholds,
    pub etas: Vec<EtaSummary>,
    pub cells: Vec<CellSummary>,
}

impl Summary {
    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

pub fn trace_file_name(eta_index: usize, seed: u64) -> String {
    format!("trace_eta{eta_index}_seed{seed}.csv")
}

pub fn thresholds(problem: &dyn Problem) -> Thresholds {
    let c = problem.constants();
    Thresholds {
        relaxed_eta_max: c.l1.zip(c.d1).and_then(|(l1, d1)| theorem4_threshold(l1, d1).ok()),
        zigzag_eta_min: c.l1.and_then(|l1| theorem5_threshold(l1).ok()),
    }
}

/// Bound constants for a run from the problem's initial point, when the
/// problem declares L, D0 and D1.
pub fn bound_constants(problem: &dyn Problem, eta: f64, nu0: f64) -> Result<Option<BoundConstants>> {
    let c = problem.constants();
    let (Some(l), Some(d0), Some(d1)) = (c.l, c.d0, c.d1) else {
        return Ok(None);
    };
    let w1 = problem.initial_point();
    let inputs = BoundInputs {
        f_w1: problem.value(&w1)?,
        f_star: c.f_star,
        eta,
        l,
        d0,
        d1,
        nu0,
        grad0_norm_sq: norm_sq(&problem.gradient(&w1)?),
    };
    Ok(Some(compute_bound_constants(inputs)?))
}

/// Worker count from `ADAGRAD_LAB_THREADS`; 0 means the rayon default.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| {
            HarnessError::Config(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"))
        }),
    }
}

struct Cell {
    eta_index: usize,
    seed: u64,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary> {
    config.validate()?;
    let method = config.method()?;
    let problems: Vec<Box<dyn Problem>> =
        config.eta_grid.iter().map(|&eta| config.build_problem(eta)).collect::<Result<_>>()?;
    let out_dir = &config.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;

    let cells: Vec<Cell> = (0..config.eta_grid.len())
        .flat_map(|eta_index| config.seeds.iter().map(move |&seed| Cell { eta_index, seed }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<Result<(CellSummary, Vec<f64>)>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(config, method, problems[cell.eta_index].as_ref(), cell))
            .collect()
    });

    let mut etas = Vec::with_capacity(config.eta_grid.len());
    for (i, &eta) in config.eta_grid.iter().enumerate() {
        // a start with non-finite f leaves the bound undefined; the cells report it
        let bound_constants = bound_constants(problems[i].as_ref(), eta, config.nu0).ok().flatten();
        let bound_rhs = match &bound_constants {
            Some(c) => config
                .horizons
                .iter()
                .map(|&t| theorem1_rhs(c, t, config.delta, c.inputs.d0))
                .collect::<adagrad_lab::Result<_>>()?,
            None => Vec::new(),
        };
        etas.push(EtaSummary { eta, bound_constants, bound_rhs, violation_fraction: Vec::new() });
    }

    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        let (mut cell, grads) = r?;
        let rhs = &etas[cell.eta_index].bound_rhs;
        if !rhs.is_empty() && !grads.is_empty() {
            cell.exceeds_bound = cell
                .running_min
                .iter()
                .zip(rhs)
                .map(|(m, b)| m.map(|m| m > *b))
                .collect();
        }
        summaries.push(cell);
    }
    for (i, e) in etas.iter_mut().enumerate() {
        if e.bound_rhs.is_empty() {
            continue;
        }
        e.violation_fraction = (0..config.horizons.len())
            .map(|k| {
                let flags: Vec<bool> = summaries
                    .iter()
                    .filter(|c| c.eta_index == i)
                    .filter_map(|c| c.exceeds_bound.get(k).copied().flatten())
                    .collect();
                (!flags.is_empty())
                    .then(|| flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64)
            })
            .collect();
    }

    let summary = Summary {
        problem: config.problem.name.clone(),
        params: config.problem.params.clone(),
        method,
        nu0: config.nu0,
        delta: config.delta,
        trace_stride: config.trace_stride,
        checkpoints: config.horizons.clone(),
        thresholds: thresholds(problems[0].as_ref()),
        etas,
        cells: summaries,
    };
    let path = out_dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(summary)
}

/// Runs one cell and writes its trace. Returns the summary together with the
/// full ‖∇f‖² series.
fn run_cell(
    config: &ExperimentConfig,
    method: Method,
    problem: &dyn Problem,
    cell: &Cell,
) -> Result<(CellSummary, Vec<f64>)> {
    let eta = config.eta_grid[cell.eta_index];
    let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
    rng.set_stream(cell.eta_index as u64);
    let trace_file = trace_file_name(cell.eta_index, cell.seed);
    let n_cp = config.horizons.len();
    let mut summary = CellSummary {
        eta,
        eta_index: cell.eta_index,
        seed: cell.seed,
        status: CellStatus::Ok,
        error: None,
        divergence: None,
        steps: 0,
        trace_file: trace_file.clone(),
        running_min: vec![None; n_cp],
        rate_fit: None,
        last_grad_norm: None,
        exceeds_bound: vec![None; n_cp],
    };

    let opt = OptimizerConfig::new(eta, config.nu0);
    let horizon = config.horizon() as usize;
    let out = match run_with_rng(problem, method, &opt, horizon, &mut rng, RunOptions::default()) {
        Ok(out) => out,
        Err(e) => {
            summary.status = CellStatus::Error;
            summary.error = Some(e.to_string());
            write_trace(&config.output_dir.join(&trace_file), method, &[], config.trace_stride)?;
            return Ok((summary, Vec::new()));
        }
    };
    write_trace(&config.output_dir.join(&trace_file), method, &out.points, config.trace_stride)?;

    let grads: Vec<f64> = out.points.iter().map(|p| p.grad_norm_sq).collect();
    summary.steps = grads.len();
    summary.last_grad_norm = grads.last().map(|g| g.sqrt());
    let reached: Vec<u64> =
        config.horizons.iter().copied().filter(|&t| t as usize <= grads.len()).collect();
    if !reached.is_empty() {
        let mins = running_min_at(&grads, &reached)?;
        for (slot, m) in summary.running_min.iter_mut().zip(&mins) {
            *slot = Some(*m);
        }
        summary.rate_fit = fit_rate_after_burn_in(&reached, &mins).ok();
    }
    if out.divergence.is_some() || grows_without_bound(&grads) {
        summary.status = CellStatus::Diverged;
    }
    summary.divergence = out.divergence;
    Ok((summary, grads))
}

fn grows_without_bound(grads: &[f64]) -> bool {
    grads.len() >= 2
        && grads.windows(2).all(|p| p[1] > p[0])
        && grads[grads.len() - 1] >= GROWTH_FACTOR * grads[0]
}

pub fn trace_header(method: Method) -> Vec<&'static str> {
    let mut h = vec!["t", "f", "grad_norm_sq", "nu_summary", "xi"];
    if method != Method::Norm {
        h.push("xi_coord");
    }
    h.push("step_norm");
    h
}

/// 17 significant digits, enough to round-trip any f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes every `stride`-th point, starting with t = 1.
fn write_trace(path: &Path, method: Method, points: &[TracePoint], stride: u64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(method))?;
    for p in points.iter().filter(|p| (p.t - 1) % stride == 0) {
        let mut row = vec![
            p.t.to_string(),
            fmt_f64(p.f),
            fmt_f64(p.grad_norm_sq),
            fmt_f64(p.nu_summary),
            fmt_f64(p.xi),
        ];
        if method != Method::Norm {
            row.push(p.xi_coord.map(fmt_f64).unwrap_or_default());
        }
        row.push(fmt_f64(p.step_norm));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_rule() {
        assert!(!grows_without_bound(&[1.0]));
        assert!(grows_without_bound(&[1.0, 10.0, 1e6]));
        assert!(!grows_without_bound(&[1.0, 10.0, 9e5]));
        assert!(!grows_without_bound(&[1.0, 1e7, 1e7]));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, 2f64.powi(50) + 1.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn header_depends_on_method() {
        assert!(!trace_header(Method::Norm).contains(&"xi_coord"));
        assert_eq!(trace_header(Method::Rr)[5], "xi_coord");
    }
}
