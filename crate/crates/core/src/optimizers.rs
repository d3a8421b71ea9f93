//! AdaGrad-Norm, coordinate-wise AdaGrad and randomly reshuffled AdaGrad.
//!
//! The accumulator is updated with the current gradient before the parameter
//! step, so every step moves by at most η in each coordinate (η in norm for
//! AdaGrad-Norm).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{all_finite, dist, norm, norm_sq};
use crate::problems::Problem;

/// Magnitude beyond which a run counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e300;

/// Preconditioner accumulator ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Accumulator {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Accumulator {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Accumulator::Scalar(v) => *v > 0.0 && v.is_finite(),
            Accumulator::Vector(v) => !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("accumulator entries must be positive and finite"))
        }
    }

    /// ν itself, or Σ_l ν_l for the per-coordinate accumulator.
    pub fn summary(&self) -> f64 {
        match self {
            Accumulator::Scalar(v) => *v,
            Accumulator::Vector(v) => v.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub w: Vec<f64>,
    pub nu: Accumulator,
    pub t: u64,
}

impl IterateState {
    pub fn new(w: Vec<f64>, nu: Accumulator) -> Result<Self> {
        nu.validate()?;
        if let Accumulator::Vector(v) = &nu {
            check_dim(w.len(), v.len())?;
        }
        Ok(Self { w, nu, t: 0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub eta: f64,
    /// Initial accumulator ν₀. A scalar is broadcast for the coordinate
    /// methods.
    pub nu0: Accumulator,
}

impl OptimizerConfig {
    pub fn new(eta: f64, nu0: f64) -> Self {
        Self { eta, nu0: Accumulator::Scalar(nu0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        self.nu0.validate()
    }
}

/// One permutation of the component indices 0..n for an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    n: usize,
    permutation: Vec<usize>,
}

impl EpochPlan {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let n = permutation.len();
        let mut seen = vec![false; n];
        for &i in &permutation {
            if i >= n || seen[i] {
                return Err(invalid(format!("{permutation:?} is not a permutation of 0..{n}")));
            }
            seen[i] = true;
        }
        Ok(Self { n, permutation })
    }

    pub fn random(n: usize, rng: &mut dyn RngCore) -> Self {
        let mut permutation: Vec<usize> = (0..n).collect();
        permutation.shuffle(rng);
        Self { n, permutation }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }
}

fn check_step_inputs(w: &[f64], g: &[f64], eta: f64) -> Result<()> {
    check_dim(w.len(), g.len())?;
    if !all_finite(g) {
        return Err(Error::NonFinite("gradient"));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid(format!("eta must be nonnegative, got {eta}")));
    }
    Ok(())
}

/// ν ← ν + ‖g‖², w ← w − ηg/√ν.
pub fn adagrad_norm_step(state: &IterateState, g: &[f64], eta: f64) -> Result<IterateState> {
    let Accumulator::Scalar(nu) = state.nu else {
        return Err(invalid("AdaGrad-Norm needs a scalar accumulator"));
    };
    if !(nu > 0.0) {
        return Err(invalid("accumulator must be positive"));
    }
    check_step_inputs(&state.w, g, eta)?;
    let nu = nu + norm_sq(g);
    let root = nu.sqrt();
    let w = state.w.iter().zip(g).map(|(w, g)| w - eta * g / root).collect();
    Ok(IterateState { w, nu: Accumulator::Scalar(nu), t: state.t + 1 })
}

/// ν_l ← ν_l + g_l², w_l ← w_l − ηg_l/√ν_l.
pub fn adagrad_step(state: &IterateState, g: &[f64], eta: f64) -> Result<IterateState> {
    let Accumulator::Vector(nu) = &state.nu else {
        return Err(invalid("AdaGrad needs a per-coordinate accumulator"));
    };
    check_dim(state.w.len(), nu.len())?;
    if nu.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("accumulator must be positive"));
    }
    check_step_inputs(&state.w, g, eta)?;
    let nu: Vec<f64> = nu.iter().zip(g).map(|(v, g)| v + g * g).collect();
    let w = state
        .w
        .iter()
        .zip(g)
        .zip(&nu)
        .map(|((w, g), v)| w - eta * g / v.sqrt())
        .collect();
    Ok(IterateState { w, nu: Accumulator::Vector(nu), t: state.t + 1 })
}

/// One inner step of a reshuffled epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRecord {
    /// Component used at this step.
    pub component: usize,
    /// Inner iterate the component gradient was evaluated at.
    pub w: Vec<f64>,
    pub g: Vec<f64>,
    /// Accumulator after absorbing `g`.
    pub nu: Vec<f64>,
}

/// Runs n AdaGrad steps, the i-th with the gradient of component
/// `plan.permutation()[i]` at the current inner iterate. ν carries over from
/// the incoming state; the step counter advances by one per epoch.
pub fn rr_adagrad_epoch<F>(
    state: &IterateState,
    mut component_gradient: F,
    plan: &EpochPlan,
    eta: f64,
) -> Result<(IterateState, Vec<InnerRecord>)>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    EpochPlan::new(plan.permutation.clone())?;
    let mut inner = state.clone();
    let mut trace = Vec::with_capacity(plan.n);
    for &i in &plan.permutation {
        let g = component_gradient(i, &inner.w)?;
        let next = adagrad_step(&inner, &g, eta)?;
        let Accumulator::Vector(nu) = &next.nu else { unreachable!() };
        trace.push(InnerRecord { component: i, w: inner.w, g, nu: nu.clone() });
        inner = next;
    }
    inner.t = state.t + 1;
    Ok((inner, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// AdaGrad-Norm.
    Norm,
    /// Coordinate-wise AdaGrad.
    Coordinate,
    /// Randomly reshuffled AdaGrad over finite-sum components.
    Rr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Norm => "norm",
            Method::Coordinate => "coordinate",
            Method::Rr => "rr",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Method::Norm),
            "coordinate" => Ok(Method::Coordinate),
            "rr" => Ok(Method::Rr),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected norm, coordinate or rr)"
            ))),
        }
    }
}

/// Per-iteration record. For the reshuffled method one record per epoch, taken
/// at the epoch's starting point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: u64,
    /// f(w_t).
    pub f: f64,
    /// ‖∇f(w_t)‖².
    pub grad_norm_sq: f64,
    /// ‖g_t‖² (summed over the epoch for the reshuffled method).
    pub g_norm_sq: f64,
    /// Accumulator after step t, summed over coordinates when per-coordinate.
    pub nu_summary: f64,
    /// ‖∇f(w_t)‖²/√ν_t with ν_t the summary above.
    pub xi: f64,
    /// Σ_l (∂_l f(w_t))²/√ν_{t,l}; per-coordinate methods only.
    pub xi_coord: Option<f64>,
    /// ‖w_{t+1} − w_t‖.
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    /// Step at which the blow-up was detected.
    pub t: u64,
    pub reason: String,
    pub last_f: f64,
    pub last_w_norm: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub points: Vec<TracePoint>,
    /// Inner steps of every epoch, when requested for the reshuffled method.
    pub inner: Vec<Vec<InnerRecord>>,
    pub divergence: Option<DivergenceReport>,
    /// Iterate after the last completed step.
    pub final_state: Option<IterateState>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_inner: bool,
}

/// Runs `horizon` steps (epochs for `Method::Rr`) from the problem's initial
/// point with a generator seeded from `seed`.
pub fn run(
    problem: &dyn Problem,
    method: Method,
    config: &OptimizerConfig,
    horizon: usize,
    seed: u64,
) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_with_rng(problem, method, config, horizon, &mut rng, RunOptions::default())
}

pub fn run_with_rng(
    problem: &dyn Problem,
    method: Method,
    config: &OptimizerConfig,
    horizon: usize,
    rng: &mut dyn RngCore,
    options: RunOptions,
) -> Result<RunOutput> {
    config.validate()?;
    let d = problem.dim();
    let nu = match (method, &config.nu0) {
        (Method::Norm, Accumulator::Scalar(v)) => Accumulator::Scalar(*v),
        (Method::Norm, Accumulator::Vector(_)) => {
            return Err(Error::Config("AdaGrad-Norm takes a scalar nu0".into()))
        }
        (_, Accumulator::Scalar(v)) => Accumulator::Vector(vec![*v; d]),
        (_, Accumulator::Vector(v)) => Accumulator::Vector(v.clone()),
    };
    let n_components = match method {
        Method::Rr => Some(problem.num_components().ok_or_else(|| {
            Error::Config(format!(
                "reshuffled AdaGrad needs a finite-sum problem, `{}` is not one",
                problem.name()
            ))
        })?),
        _ => None,
    };
    let mut state = IterateState::new(problem.initial_point(), nu)?;
    let mut out = RunOutput { points: Vec::with_capacity(horizon), ..Default::default() };

    for _ in 0..horizon {
        let w_norm = norm(&state.w);
        let f = problem.value(&state.w)?;
        let grad = problem.gradient(&state.w)?;
        let grad_norm_sq = norm_sq(&grad);
        if let Some(reason) = blow_up(f, w_norm, grad_norm_sq, state.nu.summary()) {
            out.divergence = Some(DivergenceReport { t: state.t + 1, reason, last_f: f, last_w_norm: w_norm });
            break;
        }

        let (next, g_norm_sq) = match (method, n_components) {
            (Method::Rr, Some(n)) => {
                let plan = EpochPlan::random(n, rng);
                let (next, records) =
                    rr_adagrad_epoch(&state, |i, w| problem.component_gradient(i, w), &plan, config.eta)
                        .or_else(|e| nonfinite_as_none(e).map(|_| (state.clone(), Vec::new())))?;
                if records.len() != n {
                    out.divergence = Some(nonfinite_report(&state, f, w_norm));
                    break;
                }
                let g_sq = records.iter().map(|r| norm_sq(&r.g)).sum();
                if options.record_inner {
                    out.inner.push(records);
                }
                (next, g_sq)
            }
            _ => {
                let g = problem.sample_gradient(&state.w, rng)?;
                if !all_finite(&g) {
                    out.divergence = Some(nonfinite_report(&state, f, w_norm));
                    break;
                }
                let next = match method {
                    Method::Norm => adagrad_norm_step(&state, &g, config.eta)?,
                    _ => adagrad_step(&state, &g, config.eta)?,
                };
                (next, norm_sq(&g))
            }
        };

        let nu_summary = next.nu.summary();
        let xi_coord = match &next.nu {
            Accumulator::Vector(v) => Some(diagnostics::xi_coord(&grad, v)?),
            Accumulator::Scalar(_) => None,
        };
        out.points.push(TracePoint {
            t: next.t,
            f,
            grad_norm_sq,
            g_norm_sq,
            nu_summary,
            xi: diagnostics::xi(grad_norm_sq, nu_summary)?,
            xi_coord,
            step_norm: dist(&next.w, &state.w),
        });
        state = next;
    }
    out.final_state = Some(state);
    Ok(out)
}

fn blow_up(f: f64, w_norm: f64, grad_norm_sq: f64, nu: f64) -> Option<String> {
    if !f.is_finite() || !w_norm.is_finite() || !grad_norm_sq.is_finite() || !nu.is_finite() {
        Some("non-finite objective, iterate, gradient or accumulator".into())
    } else if f.abs() > DIVERGENCE_LIMIT {
        Some(format!("|f| = {f:e} exceeds {DIVERGENCE_LIMIT:e}"))
    } else if w_norm > DIVERGENCE_LIMIT {
        Some(format!("‖w‖ = {w_norm:e} exceeds {DIVERGENCE_LIMIT:e}"))
    } else {
        None
    }
}

fn nonfinite_as_none(e: Error) -> Result<()> {
    match e {
        Error::NonFinite(_) => Ok(()),
        other => Err(other),
    }
}

fn nonfinite_report(state: &IterateState, f: f64, w_norm: f64) -> DivergenceReport {
    DivergenceReport {
        t: state.t + 1,
        reason: "non-finite stochastic gradient".into(),
        last_f: f,
        last_w_norm: w_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_interpolation_least_squares, make_twopoint_quadratic};

    fn scalar_state(w: Vec<f64>, nu: f64) -> IterateState {
        IterateState::new(w, Accumulator::Scalar(nu)).unwrap()
    }

    fn vector_state(w: Vec<f64>, nu: Vec<f64>) -> IterateState {
        IterateState::new(w, Accumulator::Vector(nu)).unwrap()
    }

    #[test]
    fn norm_step_hand_trace() {
        let s = adagrad_norm_step(&scalar_state(vec![1.0], 1.0), &[2.0], 0.5).unwrap();
        assert_eq!(s.nu, Accumulator::Scalar(5.0));
        assert!((s.w[0] - (1.0 - 1.0 / 5f64.sqrt())).abs() < 1e-15);
        assert!((s.w[0] - 0.552_786_4).abs() < 1e-7);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_only_advances_the_counter() {
        let s0 = scalar_state(vec![1.0, -3.0], 7.0);
        let s = adagrad_norm_step(&s0, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(s.w, s0.w);
        assert_eq!(s.nu, s0.nu);
        assert_eq!(s.t, 1);
        let v0 = vector_state(vec![2.0, 5.0], vec![1.0, 3.0]);
        let v = adagrad_step(&v0, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!((v.w, v.nu), (v0.w, v0.nu));
    }

    #[test]
    fn zero_learning_rate_still_accumulates() {
        let s = adagrad_norm_step(&scalar_state(vec![4.0, 1.0], 2.0), &[3.0, 4.0], 0.0).unwrap();
        assert_eq!(s.w, vec![4.0, 1.0]);
        assert_eq!(s.nu, Accumulator::Scalar(27.0));
    }

    #[test]
    fn coordinate_step_hand_trace() {
        let s = adagrad_step(&vector_state(vec![1.0, 1.0], vec![1.0, 4.0]), &[0.0, 2.0], 1.0).unwrap();
        assert_eq!(s.nu, Accumulator::Vector(vec![1.0, 8.0]));
        assert_eq!(s.w[0], 1.0);
        assert!((s.w[1] - (1.0 - 2.0 / 8f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn step_errors() {
        let s = scalar_state(vec![1.0, 2.0], 1.0);
        assert!(matches!(adagrad_norm_step(&s, &[1.0], 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(adagrad_norm_step(&s, &[f64::NAN, 0.0], 1.0), Err(Error::NonFinite(_))));
        assert!(adagrad_step(&s, &[1.0, 1.0], 1.0).is_err());
        assert!(IterateState::new(vec![1.0], Accumulator::Scalar(0.0)).is_err());
        assert!(IterateState::new(vec![1.0], Accumulator::Vector(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn reshuffled_epoch_hand_trace() {
        let centres = [0.0, 2.0];
        let plan = EpochPlan::new(vec![0, 1]).unwrap();
        let (s, trace) = rr_adagrad_epoch(
            &vector_state(vec![1.0], vec![1.0]),
            |i, w| Ok(vec![w[0] - centres[i]]),
            &plan,
            1.0,
        )
        .unwrap();
        let w1 = 1.0 - 1.0 / 2f64.sqrt();
        assert!((trace[0].w[0] - 1.0).abs() < 1e-15);
        assert!((trace[1].w[0] - w1).abs() < 1e-15);
        assert!((trace[1].g[0] - (w1 - 2.0)).abs() < 1e-15);
        let nu2 = 2.0 + (w1 - 2.0) * (w1 - 2.0);
        assert!((trace[1].nu[0] - nu2).abs() < 1e-12);
        assert!((trace[1].nu[0] - 4.914_22).abs() < 1e-5);
        assert!((s.w[0] - (w1 - (w1 - 2.0) / nu2.sqrt())).abs() < 1e-15);
        assert!((s.w[0] - 1.062_969).abs() < 1e-6);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn single_component_epoch_is_one_step() {
        let plan = EpochPlan::new(vec![0]).unwrap();
        let s0 = vector_state(vec![0.3, -0.7], vec![2.0, 0.5]);
        let grad = |w: &[f64]| vec![3.0 * w[0], w[1] - 1.0];
        let (s, _) = rr_adagrad_epoch(&s0, |_, w| Ok(grad(w)), &plan, 0.4).unwrap();
        let direct = adagrad_step(&s0, &grad(&s0.w), 0.4).unwrap();
        assert_eq!(s, direct);
    }

    #[test]
    fn epoch_at_common_minimiser_is_a_no_op() {
        let plan = EpochPlan::new(vec![2, 0, 1]).unwrap();
        let s0 = vector_state(vec![5.0], vec![1.0]);
        let (s, _) = rr_adagrad_epoch(&s0, |_, w| Ok(vec![w[0] - 5.0]), &plan, 1.0).unwrap();
        assert_eq!(s.w, s0.w);
    }

    #[test]
    fn epoch_visits_each_component_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let plan = EpochPlan::random(7, &mut rng);
        let mut calls = vec![0; 7];
        rr_adagrad_epoch(
            &vector_state(vec![0.0], vec![1.0]),
            |i, _| {
                calls[i] += 1;
                Ok(vec![1.0])
            },
            &plan,
            0.1,
        )
        .unwrap();
        assert_eq!(calls, vec![1; 7]);
    }

    #[test]
    fn invalid_permutations() {
        assert!(EpochPlan::new(vec![0, 0]).is_err());
        assert!(EpochPlan::new(vec![1, 2]).is_err());
        assert!(EpochPlan::new(vec![]).is_ok());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Norm, Method::Coordinate, Method::Rr] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("adam".parse::<Method>(), Err(Error::Config(_))));
    }

    #[test]
    fn empty_horizon_and_determinism() {
        let p = make_twopoint_quadratic(1.0, 1.0, 3).unwrap();
        let cfg = OptimizerConfig::new(0.5, 1.0);
        assert!(run(&p, Method::Norm, &cfg, 0, 1).unwrap().points.is_empty());
        for m in [Method::Norm, Method::Coordinate] {
            let a = run(&p, m, &cfg, 200, 42).unwrap().points;
            let b = run(&p, m, &cfg, 200, 42).unwrap().points;
            assert_eq!(a.len(), 200);
            assert_eq!(a, b);
            let c = run(&p, m, &cfg, 200, 43).unwrap().points;
            assert_ne!(a, c);
        }
    }

    #[test]
    fn reshuffling_requires_a_finite_sum() {
        let p = make_twopoint_quadratic(1.0, 1.0, 1).unwrap();
        let err = run(&p, Method::Rr, &OptimizerConfig::new(0.1, 1.0), 5, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn norm_method_rejects_vector_nu0() {
        let p = make_twopoint_quadratic(1.0, 1.0, 2).unwrap();
        let cfg = OptimizerConfig { eta: 0.1, nu0: Accumulator::Vector(vec![1.0, 1.0]) };
        assert!(matches!(run(&p, Method::Norm, &cfg, 5, 0), Err(Error::Config(_))));
        assert!(run(&p, Method::Coordinate, &cfg, 5, 0).is_ok());
    }

    #[test]
    fn interpolation_run_makes_progress() {
        let p = make_interpolation_least_squares(20, 50, 0).unwrap();
        for eta in [0.1, 1.0] {
            let out = run(&p, Method::Norm, &OptimizerConfig::new(eta, 1.0), 10_000, 7).unwrap();
            let mut best = f64::INFINITY;
            let mut mins = Vec::new();
            for pt in &out.points {
                best = best.min(pt.grad_norm_sq);
                mins.push(best);
            }
            assert!(mins.windows(2).all(|w| w[1] <= w[0]));
            assert!(*mins.last().unwrap() < out.points[0].grad_norm_sq);
        }
    }

    #[test]
    fn reshuffled_run_records_epochs() {
        let p = make_interpolation_least_squares(4, 9, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = run_with_rng(
            &p,
            Method::Rr,
            &OptimizerConfig::new(0.5, 1.0),
            30,
            &mut rng,
            RunOptions { record_inner: true },
        )
        .unwrap();
        assert_eq!(out.points.len(), 30);
        assert_eq!(out.inner.len(), 30);
        assert!(out.inner.iter().all(|e| e.len() == 4));
        assert!(out.points.last().unwrap().grad_norm_sq < out.points[0].grad_norm_sq);
    }

    #[test]
    fn overflow_aborts_with_a_report() {
        // oracle turns infinite once the iterate leaves [0, 1]
        struct Exploding;
        impl Problem for Exploding {
            fn name(&self) -> &str {
                "exploding"
            }
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, w: &[f64]) -> Result<f64> {
                Ok(w[0] * w[0])
            }
            fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![2.0 * w[0]])
            }
            fn sample_gradient(&self, w: &[f64], _: &mut dyn RngCore) -> Result<Vec<f64>> {
                Ok(vec![if w[0] > 1.0 { f64::INFINITY } else { -1.0 }])
            }
            fn constants(&self) -> &crate::problems::AssumptionConstants {
                unimplemented!()
            }
            fn initial_point(&self) -> Vec<f64> {
                vec![0.0]
            }
        }
        let out = run(&Exploding, Method::Norm, &OptimizerConfig::new(300.0, 1.0), 100, 0).unwrap();
        let report = out.divergence.expect("run should abort");
        assert_eq!(report.t, 2);
        assert_eq!(out.points.len(), 1);
    }
}
