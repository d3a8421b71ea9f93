//! Potential functions, high-probability bound constants, exact checks of the
//! one-step error bound and the series inequalities behind it, descent-lemma
//! residuals, and log-log rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{dot, norm_sq, sub};
use crate::problems::{Field, Problem};

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("nu must be positive and finite, got {nu}")))
    }
}

/// ξ = ‖∇f‖²/√ν.
pub fn xi(grad_norm_sq: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    Ok(grad_norm_sq / nu.sqrt())
}

/// ξ̂ = ‖∇f‖·‖g‖/√ν.
pub fn xi_hat(grad_norm: f64, g_norm: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    Ok(grad_norm * g_norm / nu.sqrt())
}

/// ξ̃ = Σ_l ∂_l f²/√ν_l.
pub fn xi_coord(partials: &[f64], nu: &[f64]) -> Result<f64> {
    check_dim(partials.len(), nu.len())?;
    let mut acc = 0.0;
    for (p, &v) in partials.iter().zip(nu) {
        check_nu(v)?;
        acc += p * p / v.sqrt();
    }
    Ok(acc)
}

/// Inputs of the high-probability bound. `grad0_norm_sq` is ‖∇f(w₀)‖² with
/// w₀ taken equal to the initial point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub f_w1: f64,
    pub f_star: f64,
    pub eta: f64,
    pub l: f64,
    pub d0: f64,
    pub d1: f64,
    pub nu0: f64,
    pub grad0_norm_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub inputs: BoundInputs,
}

pub fn compute_bound_constants(inputs: BoundInputs) -> Result<BoundConstants> {
    let BoundInputs { f_w1, f_star, eta, l, d0, d1, nu0, grad0_norm_sq } = inputs;
    for (name, v) in [("eta", eta), ("L", l), ("D1", d1), ("nu0", nu0)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if !(d0 >= 0.0 && grad0_norm_sq >= 0.0) {
        return Err(invalid("D0 and the initial gradient norm must be nonnegative"));
    }
    if !(f_w1.is_finite() && f_star.is_finite()) {
        return Err(Error::NonFinite("objective value"));
    }
    let sqrt_nu0 = nu0.sqrt();
    let l_eta = l * eta;
    let c1 = 4.0
        * (f_w1 - f_star
            + 0.5 * eta * d1 * grad0_norm_sq / sqrt_nu0
            + (2.0 * eta * (l_eta * d1).powi(2) + eta * d1 * l_eta * l_eta + 0.5 * eta * d0) / sqrt_nu0
            - 0.5 * l * eta * eta * nu0.ln())
        / eta;
    let c2 = 2.0 * l_eta;
    let c3 = 4.0 * d1 * c1
        + 48.0 * c2 * d1 * (4.0 * c2 * d1 + std::f64::consts::E).ln()
        + 2.0 * sqrt_nu0;
    Ok(BoundConstants { c1, c2, c3, inputs })
}

/// Right-hand side of the bound on min_{t ≤ T} ‖∇f(w_t)‖² holding with
/// probability at least 1 − δ.
pub fn theorem1_rhs(c: &BoundConstants, t: u64, delta: f64, d0: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if t == 0 {
        return Err(invalid("T must be positive"));
    }
    if !(d0 >= 0.0) {
        return Err(invalid("D0 must be nonnegative"));
    }
    let t = t as f64;
    let log_term = 2.0 * c.c2 * (2.0 * (2.0 * d0 * t).sqrt() + c.c3).ln();
    let d2 = delta * delta;
    Ok(2.0 * (2.0 * d0).sqrt() * (log_term + c.c1) / (t.sqrt() * d2)
        + c.c3 * (c.c1 + log_term) / (t * d2))
}

/// Largest admissible learning rate for convergence under (L0, L1)-smoothness:
/// (1/L1)·min(1/(64 D1), 1/(8√D1)).
pub fn theorem4_threshold(l1: f64, d1: f64) -> Result<f64> {
    if !(l1 > 0.0 && d1 > 0.0) {
        return Err(invalid("L1 and D1 must be positive"));
    }
    Ok((1.0 / (64.0 * d1)).min(1.0 / (8.0 * d1.sqrt())) / l1)
}

/// Learning rate above which the zigzag construction makes AdaGrad-Norm
/// diverge: 9√5/(2 L1).
pub fn theorem5_threshold(l1: f64) -> Result<f64> {
    if !(l1 > 0.0) {
        return Err(invalid("L1 must be positive"));
    }
    Ok(9.0 * 5f64.sqrt() / (2.0 * l1))
}

/// Both sides of the one-step error bound, with conditional expectations taken
/// exactly over the oracle's finite support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Gap {
    pub lhs: f64,
    /// Bound with ξ(t−1) built from the supplied previous gradient norm (or
    /// the current one when none is supplied).
    pub rhs: f64,
    /// Bound with ξ(t−1) = ‖∇f(w_t)‖²/√ν_{t−1}.
    pub rhs_current: f64,
}

/// lhs = E[⟨∇f(w), η(1/√ν_{t−1} − 1/√ν_t)g⟩] with ν_t = ν_{t−1} + ‖g‖².
pub fn lemma1_gap(
    problem: &dyn Problem,
    w: &[f64],
    nu_prev: f64,
    g_prev_norm_sq: f64,
    eta: f64,
    prev_grad_norm_sq: Option<f64>,
) -> Result<Lemma1Gap> {
    check_nu(nu_prev)?;
    if !(eta >= 0.0 && g_prev_norm_sq >= 0.0) {
        return Err(invalid("eta and ‖g_{t−1}‖² must be nonnegative"));
    }
    let c = problem.constants();
    let l = c.require_l()?;
    let (d0, d1) = c.require_affine()?;
    let support = problem.support(w)?.ok_or_else(|| {
        Error::Config(format!("problem `{}` has no finite oracle support", problem.name()))
    })?;
    let grad = problem.gradient(w)?;
    let grad_sq = norm_sq(&grad);
    let s_prev = nu_prev.sqrt();

    let mut lhs = 0.0;
    let mut noise = 0.0;
    let mut xi_next = 0.0;
    for o in &support {
        let g_sq = norm_sq(&o.gradient);
        let s_next = (nu_prev + g_sq).sqrt();
        lhs += o.prob * eta * (1.0 / s_prev - 1.0 / s_next) * dot(&grad, &o.gradient);
        noise += o.prob * g_sq / (s_next + s_prev).powi(2);
        xi_next += o.prob * grad_sq / s_next;
    }
    let l_eta = l * eta;
    let fixed = 0.75 * eta * grad_sq / s_prev
        + 0.5 * (eta / s_prev) * d0 * noise
        + (eta * (l_eta * d1).powi(2) + 0.5 * eta * d1 * l_eta * l_eta) * g_prev_norm_sq
            / nu_prev.powf(1.5);
    let potential = |prev_sq: f64| 0.5 * eta * d1 * (prev_sq / s_prev - xi_next);
    Ok(Lemma1Gap {
        lhs,
        rhs: fixed + potential(prev_grad_norm_sq.unwrap_or(grad_sq)),
        rhs_current: fixed + potential(grad_sq),
    })
}

/// (lhs, rhs) of the three series inequalities for partial sums S_t = Σ_{s≤t} a_s:
/// Σ a_t/S_t^{3/2} ≤ 2/√a₀, Σ a_t/S_t ≤ ln S_T − ln a₀, and
/// Σ a_t/(√S_t (√S_{t−1} + √S_t)²) ≤ 1/√a₀, all sums over t ≥ 1.
pub fn series_bounds_check(a: &[f64]) -> Result<[(f64, f64); 3]> {
    if a.len() < 2 {
        return Err(invalid("need a_0 and at least one increment"));
    }
    if !(a[0] > 0.0 && a[0].is_finite()) {
        return Err(invalid(format!("a_0 must be positive, got {}", a[0])));
    }
    if a.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(invalid("increments must be nonnegative and finite"));
    }
    let (mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0);
    let mut s_prev = a[0];
    for &x in &a[1..] {
        let s = s_prev + x;
        let rs = s.sqrt();
        p1 += x / (s * rs);
        p2 += x / s;
        p3 += x / (rs * (s_prev.sqrt() + rs).powi(2));
        s_prev = s;
    }
    let r0 = a[0].sqrt();
    Ok([(p1, 2.0 / r0), (p2, s_prev.ln() - a[0].ln()), (p3, 1.0 / r0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SmoothnessMode {
    Uniform { l: f64 },
    /// Valid only for ‖w1 − w2‖ ≤ 1/L1.
    Relaxed { l0: f64, l1: f64 },
}

/// f(w1) − f(w2) − ⟨∇f(w2), w1 − w2⟩ − (c/2)‖w1 − w2‖² with c = L, or
/// c = L0 + L1‖∇f(w2)‖ in relaxed mode. Nonpositive whenever the smoothness
/// assumption holds.
pub fn descent_residual(
    field: &(impl Field + ?Sized),
    w1: &[f64],
    w2: &[f64],
    mode: SmoothnessMode,
) -> Result<f64> {
    check_dim(w1.len(), w2.len())?;
    let diff = sub(w1, w2);
    let dist_sq = norm_sq(&diff);
    let g2 = field.gradient(w2)?;
    let coef = match mode {
        SmoothnessMode::Uniform { l } => l,
        SmoothnessMode::Relaxed { l0, l1 } => {
            if l1 > 0.0 && dist_sq.sqrt() > 1.0 / l1 {
                return Err(Error::Precondition(format!(
                    "‖w1 − w2‖ = {} exceeds 1/L1 = {}",
                    dist_sq.sqrt(),
                    1.0 / l1
                )));
            }
            l0 + l1 * norm_sq(&g2).sqrt()
        }
    };
    Ok(field.value(w1)? - field.value(w2)? - dot(&g2, &diff) - 0.5 * coef * dist_sq)
}

/// Least-squares line through (ln T, ln y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(points: &[(u64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(invalid(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(t, y)) = points.iter().find(|(t, y)| *t == 0 || !(*y > 0.0 && y.is_finite())) {
        return Err(invalid(format!("rate fit needs T > 0 and y > 0, got ({t}, {y})")));
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs at least two distinct T"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    // a constant series is fitted exactly by the zero-slope line
    let r_squared = if ss_tot <= f64::EPSILON * f64::EPSILON {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit { slope, intercept, r_squared })
}

/// Checkpoints round(10^{k/per_decade}) for exponents lo..=hi, deduplicated.
pub fn log_checkpoints(lo_exp: u32, hi_exp: u32, per_decade: u32) -> Vec<u64> {
    let per = per_decade.max(1);
    let mut out: Vec<u64> = (lo_exp * per..=hi_exp * per)
        .map(|k| 10f64.powf(k as f64 / per as f64).round() as u64)
        .collect();
    out.dedup();
    out
}

/// min_{t ≤ T} values[t−1] at each checkpoint T (1-based, T ≤ values.len()).
pub fn running_min_at(values: &[f64], checkpoints: &[u64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut best = f64::INFINITY;
    let mut upto = 0usize;
    for &t in checkpoints {
        let t = t as usize;
        if t == 0 || t > values.len() || t < upto {
            return Err(invalid(format!(
                "checkpoint {t} outside 1..={} or out of order",
                values.len()
            )));
        }
        for v in &values[upto..t] {
            best = best.min(*v);
        }
        upto = t;
        out.push(best);
    }
    Ok(out)
}

/// Rate fit over the checkpoints at least ten times the first one, dropping
/// the initial decade as burn-in.
pub fn fit_rate_after_burn_in(checkpoints: &[u64], values: &[f64]) -> Result<RateFit> {
    check_dim(checkpoints.len(), values.len())?;
    let first = *checkpoints.first().ok_or_else(|| invalid("no checkpoints"))?;
    let pts: Vec<(u64, f64)> = checkpoints
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= 10 * first)
        .map(|(t, v)| (*t, *v))
        .collect();
    fit_rate(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_twopoint_quadratic, FnField};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn potentials() {
        assert_eq!(xi(25.0, 25.0).unwrap(), 5.0);
        assert_eq!(xi(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(xi(6.0, 4.0).unwrap(), 3.0 * xi(2.0, 4.0).unwrap());
        assert!(xi(1.0, 0.0).is_err());
        assert_eq!(xi_hat(2.0, 3.0, 36.0).unwrap(), 1.0);
        assert_eq!(xi_hat(0.0, 3.0, 36.0).unwrap(), 0.0);
        assert_eq!(xi_hat(1.5, 1.5, 9.0).unwrap(), xi(2.25, 9.0).unwrap());
        assert!(xi_hat(1.0, 1.0, -1.0).is_err());
        assert_eq!(xi_coord(&[1.0, 2.0], &[4.0, 16.0]).unwrap(), 1.5);
        assert_eq!(xi_coord(&[1.0, 2.0], &[4.0, 4.0]).unwrap(), xi(5.0, 4.0).unwrap());
        assert_eq!(xi_coord(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(xi_coord(&[1.0], &[1.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    fn unit_inputs() -> BoundInputs {
        BoundInputs {
            f_w1: 1.0,
            f_star: 0.0,
            eta: 1.0,
            l: 1.0,
            d0: 1.0,
            d1: 1.0,
            nu0: 1.0,
            grad0_norm_sq: 1.0,
        }
    }

    #[test]
    fn bound_constants_hand_values() {
        let c = compute_bound_constants(unit_inputs()).unwrap();
        assert!(close(c.c1, 20.0, 1e-12));
        assert_eq!(c.c2, 2.0);
        let c3 = 82.0 + 96.0 * (8.0 + std::f64::consts::E).ln();
        assert!(close(c.c3, c3, 1e-10));
        assert!(close(c.c3, 309.71, 0.01));

        let c = compute_bound_constants(BoundInputs { l: 2.0, eta: 0.5, ..unit_inputs() }).unwrap();
        assert_eq!(c.c2, 2.0);
        assert!(c.c3 >= 2.0);
    }

    #[test]
    fn log_term_vanishes_at_unit_nu0() {
        // with ν₀ = 1 the −(L/2)η² ln ν₀ term is zero, so C1 is linear in the
        // remaining terms only
        let a = compute_bound_constants(unit_inputs()).unwrap().c1;
        let b = compute_bound_constants(BoundInputs { nu0: 2.0, ..unit_inputs() }).unwrap().c1;
        let expected_b = 4.0 * (1.0 + (0.5 + 3.5) / 2f64.sqrt() - 0.5 * 2f64.ln());
        assert!(close(a, 20.0, 1e-12));
        assert!(close(b, expected_b, 1e-12));
    }

    #[test]
    fn bound_constant_errors() {
        for bad in [
            BoundInputs { eta: 0.0, ..unit_inputs() },
            BoundInputs { l: -1.0, ..unit_inputs() },
            BoundInputs { d1: 0.0, ..unit_inputs() },
            BoundInputs { nu0: 0.0, ..unit_inputs() },
        ] {
            assert!(compute_bound_constants(bad).is_err());
        }
    }

    #[test]
    fn rhs_shape() {
        let c = compute_bound_constants(unit_inputs()).unwrap();
        let no_noise = theorem1_rhs(&c, 100, 0.5, 0.0).unwrap();
        let expected = c.c3 * (c.c1 + 2.0 * c.c2 * c.c3.ln()) / (100.0 * 0.25);
        assert!(close(no_noise, expected, 1e-9 * expected));
        let a = theorem1_rhs(&c, 10_000, 0.5, 1.0).unwrap();
        let b = theorem1_rhs(&c, 20_000, 0.5, 1.0).unwrap();
        assert!(a.is_finite() && a > 0.0 && b < a);
        assert!(theorem1_rhs(&c, 10, 0.0, 1.0).is_err());
        assert!(theorem1_rhs(&c, 10, 1.0, 1.0).is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(theorem4_threshold(1.0, 1.0).unwrap(), 1.0 / 64.0);
        // for small D1 the second branch binds
        assert_eq!(theorem4_threshold(2.0, 1.0 / 256.0).unwrap(), 1.0);
        assert!(close(theorem5_threshold(1.0).unwrap(), 10.062_305_898_749_054, 1e-12));
        assert!(11.0 > theorem5_threshold(1.0).unwrap());
    }

    #[test]
    fn lemma1_hand_values() {
        let p = make_twopoint_quadratic(1.0, 1.0, 1).unwrap();
        let gap = lemma1_gap(&p, &[1.0], 1.0, 1.0, 0.5, None).unwrap();
        assert!(close(gap.lhs, 0.5 * (1.0 - 1.0 / 5f64.sqrt()), 1e-15));
        assert!(close(gap.lhs, 0.2764, 1e-4));
        assert!(close(gap.rhs, 0.6794, 1e-4));
        assert_eq!(gap.rhs, gap.rhs_current);
        assert!(gap.lhs <= gap.rhs);
    }

    #[test]
    fn lemma1_degenerate_cases() {
        let p = make_twopoint_quadratic(1.0, 0.0, 2).unwrap();
        let gap = lemma1_gap(&p, &[0.0, 0.0], 2.0, 0.5, 0.3, None).unwrap();
        assert_eq!(gap.lhs, 0.0);
        assert!(gap.rhs >= 0.0);
        let q = make_twopoint_quadratic(1.0, 1.0, 1).unwrap();
        let tiny = lemma1_gap(&q, &[1.0], 1.0, 1.0, 1e-12, None).unwrap();
        assert!(tiny.lhs.abs() < 1e-11 && tiny.rhs.abs() < 1e-11);
    }

    #[test]
    fn lemma1_needs_support_and_constants() {
        let p = crate::problems::make_truncated_gaussian_regression(2).unwrap();
        assert!(matches!(lemma1_gap(&p, &[1.0, 1.0], 1.0, 1.0, 0.1, None), Err(Error::Config(_))));
        let e = crate::problems::make_l0l1_exemplar();
        assert!(matches!(lemma1_gap(&e, &[1.0], 1.0, 1.0, 0.1, None), Err(Error::Config(_))));
    }

    #[test]
    fn series_hand_values() {
        let [p1, p2, p3] = series_bounds_check(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(close(p1.0, 0.6710, 1e-4) && p1.1 == 2.0);
        assert!(close(p2.0, 13.0 / 12.0, 1e-15) && close(p2.1, 4f64.ln(), 1e-15));
        assert!(close(p3.0, 0.2155, 1e-4) && p3.1 == 1.0);
        for (l, r) in [p1, p2, p3] {
            assert!(l <= r);
        }
        let zero = series_bounds_check(&[3.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(zero.iter().all(|(l, _)| *l == 0.0));
        assert!(series_bounds_check(&[0.0, 1.0]).is_err());
        assert!(series_bounds_check(&[1.0]).is_err());
        assert!(series_bounds_check(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn descent_residual_cases() {
        let half_sq = FnField::new(|w: &[f64]| 0.5 * w[0] * w[0], |w: &[f64]| vec![w[0]]);
        let uni = SmoothnessMode::Uniform { l: 1.0 };
        assert_eq!(descent_residual(&half_sq, &[2.0], &[0.0], uni).unwrap(), 0.0);
        assert_eq!(descent_residual(&half_sq, &[1.3], &[1.3], uni).unwrap(), 0.0);
        let relaxed = SmoothnessMode::Relaxed { l0: 1.0, l1: 2.0 };
        assert!(matches!(
            descent_residual(&half_sq, &[1.0], &[0.0], relaxed),
            Err(Error::Precondition(_))
        ));
        assert!(descent_residual(&half_sq, &[0.4], &[0.0], relaxed).unwrap() <= 0.0);
    }

    #[test]
    fn rate_fits() {
        let f = fit_rate(&[(10, 0.1), (100, 0.01), (1000, 0.001)]).unwrap();
        assert!(close(f.slope, -1.0, 1e-12) && close(f.r_squared, 1.0, 1e-12));
        let c = 3.0;
        let f = fit_rate(&[(10, c / 10f64.sqrt()), (100, c / 10.0), (1000, c / 1000f64.sqrt())]).unwrap();
        assert!(close(f.slope, -0.5, 1e-12));
        let f = fit_rate(&[(10, 2.0), (100, 2.0), (1000, 2.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(fit_rate(&[(10, 1.0), (100, 0.0), (1000, 1.0)]).is_err());
        assert!(fit_rate(&[(10, 1.0), (100, 1.0)]).is_err());
    }

    #[test]
    fn checkpoint_helpers() {
        assert_eq!(log_checkpoints(2, 3, 2), vec![100, 316, 1000]);
        let mins = running_min_at(&[5.0, 3.0, 4.0, 1.0, 2.0], &[1, 3, 5]).unwrap();
        assert_eq!(mins, vec![5.0, 3.0, 1.0]);
        assert!(running_min_at(&[1.0], &[2]).is_err());
        let cps = log_checkpoints(2, 5, 2);
        let ys: Vec<f64> = cps.iter().map(|t| 1.0 / *t as f64).collect();
        let fit = fit_rate_after_burn_in(&cps, &ys).unwrap();
        assert!(close(fit.slope, -1.0, 1e-3));
    }
}
