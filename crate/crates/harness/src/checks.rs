use std::fmt;
use std::str::FromStr;

use adagrad_lab::assumption_checkers::{
    check_coordinate_affine, estimate_affine_constants, estimate_smoothness, rr_probe_points,
    BoxRegion, SmoothnessEstimate, SmoothnessFit, ZigzagField, ZigzagPath,
};
use adagrad_lab::diagnostics::{
    descent_residual, lemma1_gap, series_bounds_check, theorem5_threshold, SmoothnessMode,
};
use adagrad_lab::linalg::norm_sq;
use adagrad_lab::optimizers::{adagrad_norm_step, run, Accumulator, IterateState, Method, OptimizerConfig};
use adagrad_lab::problems::{
    make_interpolation_least_squares, make_l0l1_exemplar, make_truncated_gaussian_regression,
    make_twopoint_quadratic, Problem, ZigzagGeometry, ZigzagProblem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemma1,
    Lemma2,
    Descent,
    Assumptions,
    Trajectory,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::Lemma1, Suite::Lemma2, Suite::Descent, Suite::Assumptions, Suite::Trajectory];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::Descent => "descent",
            Suite::Assumptions => "assumptions",
            Suite::Trajectory => "trajectory",
        })
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.to_string() == s).ok_or_else(|| {
            HarnessError::Argument(format!(
                "unknown suite `{s}` (expected lemma1, lemma2, descent, assumptions or trajectory)"
            ))
        })
    }
}

/// One property instance. `margin` is the slack of the inequality being
/// checked: nonnegative (up to the stated tolerance) means pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub suite: Suite,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    /// Smallest margin over all items.
    pub fn worst_margin(&self) -> f64 {
        self.items.iter().map(|i| i.margin).fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, name: impl Into<String>, margin: f64, tol: f64) {
        self.items.push(CheckItem { name: name.into(), passed: margin >= -tol, margin });
    }
}

pub fn run_checks(suite: Suite) -> Result<CheckReport> {
    let mut report = CheckReport { suite, items: Vec::new() };
    match suite {
        Suite::Lemma1 => lemma1(&mut report)?,
        Suite::Lemma2 => lemma2(&mut report)?,
        Suite::Descent => descent(&mut report)?,
        Suite::Assumptions => assumptions(&mut report)?,
        Suite::Trajectory => trajectory(&mut report)?,
    }
    Ok(report)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * gaussian(rng)).collect()
}

/// Problems with a finite oracle support and declared L, D0, D1.
fn lemma1_problems() -> Result<Vec<Box<dyn Problem>>> {
    Ok(vec![
        Box::new(make_twopoint_quadratic(1.0, 1.0, 1)?),
        Box::new(make_twopoint_quadratic(2.5, 0.3, 4)?),
        Box::new(make_interpolation_least_squares(6, 10, 0)?),
    ])
}

/// 100 random one-step states across the finite-support problems, with
/// log-uniform ν, ‖g_{t−1}‖² and η.
fn lemma1(report: &mut CheckReport) -> Result<()> {
    let problems = lemma1_problems()?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for k in 0..100 {
        let p = problems[k % problems.len()].as_ref();
        let w = random_point(&mut rng, p.dim(), 2.0);
        let nu_prev = 10f64.powf(rng.random_range(-2.0..3.0));
        let g_prev = 10f64.powf(rng.random_range(-2.0..2.0));
        let eta = 10f64.powf(rng.random_range(-2.0..1.0));
        let gap = lemma1_gap(p, &w, nu_prev, g_prev, eta, None)?;
        report.push(format!("{}#{k}", p.name()), gap.rhs - gap.lhs, 1e-12);
    }
    Ok(())
}

/// 1000 sequences: half-normal, sparse and heavy-tailed increments.
fn lemma2(report: &mut CheckReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for k in 0..1000 {
        let len = rng.random_range(2..=200);
        let mut a: Vec<f64> = (0..len)
            .map(|_| {
                let z = gaussian(&mut rng).abs();
                match k % 3 {
                    0 => z,
                    1 if rng.random_bool(0.7) => 0.0,
                    1 => z,
                    _ => z.powi(4) * 100.0,
                }
            })
            .collect();
        if a[0] == 0.0 {
            a[0] = 1e-3;
        }
        let names = ["sum a/S^1.5", "sum a/S", "sum a/(sqrtS (sqrtS' + sqrtS)^2)"];
        for (name, (lhs, rhs)) in names.iter().zip(series_bounds_check(&a)?) {
            report.push(format!("seq{k} {name}"), rhs - lhs, 1e-12 * rhs.abs().max(1.0));
        }
    }
    Ok(())
}

fn descent(report: &mut CheckReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let uniform: Vec<Box<dyn Problem>> = vec![
        Box::new(make_twopoint_quadratic(1.0, 1.0, 1)?),
        Box::new(make_twopoint_quadratic(3.0, 1.0, 5)?),
        Box::new(make_interpolation_least_squares(10, 25, 1)?),
        Box::new(make_truncated_gaussian_regression(4)?),
    ];
    for p in &uniform {
        let l = p.constants().require_l()?;
        for k in 0..1000 {
            let a = random_point(&mut rng, p.dim(), 3.0);
            let b = random_point(&mut rng, p.dim(), 3.0);
            let r = descent_residual(p.as_ref(), &a, &b, SmoothnessMode::Uniform { l })?;
            let scale = 1.0 + p.value(&a)?.abs() + p.value(&b)?.abs();
            report.push(format!("{}#{k}", p.name()), -r, 1e-12 * scale);
        }
    }
    let e = make_l0l1_exemplar();
    let (l0, l1) = (e.constants().l0.unwrap_or(1.0), e.constants().l1.unwrap_or(1.0));
    for k in 0..1000 {
        let a = rng.random_range(-30.0..30.0);
        let b = a + rng.random_range(-1.0..=1.0) / l1;
        let r = descent_residual(&e, &[b], &[a], SmoothnessMode::Relaxed { l0, l1 })?;
        report.push(format!("l0l1_exemplar#{k}"), -r, 1e-12 * (1.0 + e.value(&[a])?));
    }
    Ok(())
}

fn assumptions(report: &mut CheckReport) -> Result<()> {
    // exact support: the two-point quadratic has E‖g‖² = σ² + ‖∇f‖²
    let q = make_twopoint_quadratic(1.0, 1.0, 1)?;
    let probes: Vec<Vec<f64>> = (-3..=3).filter(|k| *k != 0).map(|k| vec![k as f64]).collect();
    let fit = estimate_affine_constants(&q, &probes, 0, 0)?;
    report.push("quadratic affine D0 = 1", 1e-9 - (fit.d0_hat - 1.0).abs(), 0.0);
    report.push("quadratic affine D1 = 1", 1e-9 - (fit.d1_hat - 1.0).abs(), 0.0);

    // fitted constants never exceed the certified strong-growth constant
    let ls = make_interpolation_least_squares(20, 50, 0)?;
    let d1 = ls.constants().d1.expect("declared");
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let probes: Vec<Vec<f64>> = (0..50).map(|_| random_point(&mut rng, ls.dim(), 1.0)).collect();
    let fit = estimate_affine_constants(&ls, &probes, 0, 1)?;
    let g_max = probes.iter().map(|w| ls.gradient(w).map(|g| norm_sq(&g))).collect::<adagrad_lab::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.push(
        "least squares fitted bound within certificate",
        d1 * g_max - (fit.d0_hat + fit.d1_hat * g_max),
        1e-9 * d1 * g_max,
    );

    // reshuffled inner iterates satisfy E‖g‖² ≤ D1‖∇f‖² with the certificate
    let rr = rr_probe_points(&ls, &OptimizerConfig::new(0.5, 1.0), 5, 7)?;
    let mut worst = f64::INFINITY;
    for w in &rr {
        let sup = ls.support(w)?.expect("finite sum");
        let m: f64 = sup.iter().map(|o| o.prob * norm_sq(&o.gradient)).sum();
        let bound = d1 * norm_sq(&ls.gradient(w)?);
        worst = worst.min((bound - m) / bound.max(1e-300));
    }
    report.push(format!("least squares affine on {} reshuffled iterates", rr.len()), worst, 1e-9);

    // full-norm bound is finite while the per-coordinate ratio grows
    let reg = make_truncated_gaussian_regression(2)?;
    let probes: Vec<Vec<f64>> = (0..8).map(|k| vec![1.0 + k as f64, 0.5]).collect();
    let fit = estimate_affine_constants(&reg, &probes, 20_000, 5)?;
    let finite = fit.d0_hat.is_finite() && fit.d1_hat.is_finite();
    report.push("regression affine fit is finite", if finite { fit.d1_hat } else { -1.0 }, 0.0);
    let path: Vec<Vec<f64>> = [1.0, 10.0, 100.0].iter().map(|m| vec![0.1, *m]).collect();
    let coord = check_coordinate_affine(&reg, 0, &path, 100_000, 6)?;
    let gap = coord.ratios.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    report.push("regression coordinate ratio strictly increasing", if coord.strictly_increasing { gap } else { -gap.abs() - 1.0 }, 0.0);

    // smoothness estimates stay inside the declared constants
    let q3 = make_twopoint_quadratic(2.0, 1.0, 3)?;
    let fit = estimate_smoothness(&q3, &BoxRegion::cube(3, 5.0)?, 200, SmoothnessEstimate::Uniform, 8)?;
    if let SmoothnessFit::Uniform { l_hat } = fit {
        report.push("quadratic L_hat = L", 1e-9 - (l_hat - 2.0).abs(), 0.0);
    }
    let e = make_l0l1_exemplar();
    let fit = estimate_smoothness(&e, &BoxRegion::cube(1, 20.0)?, 2000, SmoothnessEstimate::Relaxed, 9)?;
    if let SmoothnessFit::Relaxed { l0_hat, l1_hat, .. } = fit {
        report.push("exemplar L0_hat <= 1.1", 1.1 - l0_hat, 0.0);
        report.push("exemplar L1_hat <= 1.1", 1.1 - l1_hat, 0.0);
    }
    let geom = ZigzagGeometry::new(11.0, 1.0, 16)?;
    let path = ZigzagPath::new(geom.clone(), 15)?;
    let fit = estimate_smoothness(&ZigzagField(&geom), &path, 2000, SmoothnessEstimate::Relaxed, 10)?;
    if let SmoothnessFit::Relaxed { l1_hat, .. } = fit {
        report.push("zigzag L1_hat <= L1 on the path", 1.0 - l1_hat, 1e-9);
    }
    Ok(())
}

/// The 25-step divergent orbit: corners of the zigzag path and doubling
/// gradient norms, replayed step by step and compared with `run`.
fn trajectory(report: &mut CheckReport) -> Result<()> {
    let (eta, l1, steps) = (11.0, 1.0, 25usize);
    report.push("eta above the divergence threshold", eta - theorem5_threshold(l1)?, 0.0);
    let geom = ZigzagGeometry::new(eta, l1, steps + 2)?;
    let problem = ZigzagProblem::new(geom.clone());
    let out = run(&problem, Method::Norm, &OptimizerConfig::new(eta, 1.0), steps, 0)?;
    let s = |k: i64| geom.partial_sum(k);
    let mut state = IterateState::new(problem.initial_point(), Accumulator::Scalar(1.0))?;
    for k in 1..=steps {
        let expected = 2f64.powi(k as i32);
        let g = problem.gradient(&state.w)?;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        report.push(format!("k={k} |grad f(w_k)| = 2^k"), 1e-9 - rel(norm_sq(&g).sqrt(), expected), 0.0);
        let traced = out.points.get(k - 1).map(|p| p.grad_norm_sq.sqrt()).unwrap_or(f64::NAN);
        report.push(format!("k={k} traced |grad f| = 2^k"), 1e-9 - rel(traced, expected), 0.0);
        let m = (k as i64 + 1) / 2;
        let corner = if k % 2 == 1 { [s(2 * m - 3), s(2 * m - 2)] } else { [s(2 * m - 1), s(2 * m - 2)] };
        let err = (0..2).map(|c| rel(state.w[c], corner[c])).fold(0.0, f64::max);
        report.push(format!("k={k} w_k on the corner pattern"), 1e-9 - err, 0.0);
        state = adagrad_norm_step(&state, &g, eta)?;
    }
    Ok(())
}
