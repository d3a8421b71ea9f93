use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{AssumptionConstants, Problem};
use crate::error::{check_dim, invalid, Result};
use crate::linalg::dot;

/// E[c(X)^k] for X standard normal and c(x) = max(−1, min(1, x)), by composite
/// Simpson quadrature on [0, 1] plus the exact tail mass at ±1.
pub fn truncated_normal_moment(k: u32) -> f64 {
    const INTERVALS: usize = 4096;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let simpson = |g: &dyn Fn(f64) -> f64| {
        let h = 1.0 / INTERVALS as f64;
        let mut acc = g(0.0) + g(1.0);
        for i in 1..INTERVALS {
            let x = i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
        }
        acc * h / 3.0
    };
    let inner = 2.0 * simpson(&|x| x.powi(k as i32) * phi(x));
    let tail = 1.0 - 2.0 * simpson(&phi);
    if k % 2 == 1 {
        0.0
    } else {
        inner + tail
    }
}

/// f(w) = E(⟨w, x⟩)² with x_l i.i.d. standard normal clipped to [−1, 1]; the
/// oracle is g = 2xxᵀw. Satisfies the norm affine-noise bound with D0 = 0 but
/// not the coordinate-wise one.
#[derive(Debug, Clone)]
pub struct TruncatedGaussianRegression {
    dim: usize,
    m2: f64,
    m4: f64,
    start: f64,
    constants: AssumptionConstants,
}

pub fn make_truncated_gaussian_regression(dim: usize) -> Result<TruncatedGaussianRegression> {
    if dim < 2 {
        return Err(invalid(format!("dim must be at least 2, got {dim}")));
    }
    let m2 = truncated_normal_moment(2);
    let m4 = truncated_normal_moment(4);
    // E‖g‖² = 4‖w‖²(m4 + (d−1)m2²) and ‖∇f‖² = 4m2²‖w‖².
    let d1 = m4 / (m2 * m2) + (dim - 1) as f64;
    let constants = AssumptionConstants {
        l: Some(2.0 * m2),
        d0: Some(0.0),
        d1: Some(d1),
        f_star: 0.0,
        coordinate_affine_holds: false,
        ..Default::default()
    };
    Ok(TruncatedGaussianRegression { dim, m2, m4, start: 1.0, constants })
}

impl TruncatedGaussianRegression {
    pub fn with_start(mut self, norm: f64) -> Self {
        self.start = norm;
        self
    }

    /// Second moment of one clipped coordinate.
    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn m4(&self) -> f64 {
        self.m4
    }

    /// Closed form of E[g_l²] = 4(w_l² m4 + m2² Σ_{j≠l} w_j²).
    pub fn coordinate_second_moment(&self, w: &[f64], l: usize) -> f64 {
        let others: f64 = w
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != l)
            .map(|(_, v)| v * v)
            .sum();
        4.0 * (w[l] * w[l] * self.m4 + self.m2 * self.m2 * others)
    }
}

impl Problem for TruncatedGaussianRegression {
    fn name(&self) -> &str {
        "truncated_gaussian_regression"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim, w.len())?;
        Ok(self.m2 * crate::linalg::norm_sq(w))
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, w.len())?;
        Ok(w.iter().map(|v| 2.0 * self.m2 * v).collect())
    }

    fn sample_gradient(&self, w: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        check_dim(self.dim, w.len())?;
        let x: Vec<f64> = (0..self.dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z.clamp(-1.0, 1.0)
            })
            .collect();
        let s = 2.0 * dot(&x, w);
        Ok(x.iter().map(|xi| s * xi).collect())
    }

    fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![self.start / (self.dim as f64).sqrt(); self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Closed forms via integration by parts, P = erf(1/√2):
    //   m2 = P − 2φ(1) + (1 − P),  m4 = 3P − 8φ(1) + (1 − P),
    // evaluated in double precision with a correctly rounded erf.
    fn closed_forms() -> (f64, f64) {
        (0.516_058_550_961_713_3, 0.429_613_188_121_025)
    }

    #[test]
    fn quadrature_matches_closed_form_moments() {
        let (m2, m4) = closed_forms();
        assert!((truncated_normal_moment(2) - m2).abs() < 1e-13);
        let d4 = (truncated_normal_moment(4) - m4).abs();
        assert!(d4 < 1e-13, "{d4}");
        assert!((truncated_normal_moment(0) - 1.0).abs() < 1e-13);
        assert_eq!(truncated_normal_moment(3), 0.0);
    }

    #[test]
    fn zero_point_gives_zero_draws() {
        let p = make_truncated_gaussian_regression(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert!(p.sample_gradient(&[0.0; 3], &mut rng).unwrap().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn oracle_is_unbiased_within_three_sigma() {
        let p = make_truncated_gaussian_regression(3).unwrap();
        let w = [0.7, -1.2, 0.4];
        let grad = p.gradient(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut sum_sq = [0.0; 3];
        for _ in 0..n {
            let g = p.sample_gradient(&w, &mut rng).unwrap();
            for l in 0..3 {
                sum[l] += g[l];
                sum_sq[l] += g[l] * g[l];
            }
        }
        for l in 0..3 {
            let mean = sum[l] / n as f64;
            let var = sum_sq[l] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!((mean - grad[l]).abs() <= 3.0 * se, "coord {l}: {mean} vs {}", grad[l]);
        }
    }

    #[test]
    fn declared_d1_matches_monte_carlo_second_moment() {
        let p = make_truncated_gaussian_regression(4).unwrap();
        let w = [1.0, -0.5, 2.0, 0.25];
        let grad_sq = crate::linalg::norm_sq(&p.gradient(&w).unwrap());
        let exact = p.constants().d1.unwrap() * grad_sq;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| crate::linalg::norm_sq(&p.sample_gradient(&w, &mut rng).unwrap()))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - exact).abs() <= 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn coordinate_ratio_grows_with_the_second_coordinate() {
        let p = make_truncated_gaussian_regression(3).unwrap();
        let ratio = |m: f64| {
            let w = [0.1, m, 0.0];
            let d1f = 2.0 * p.m2() * w[0];
            p.coordinate_second_moment(&w, 0) / (d1f * d1f)
        };
        assert!(ratio(1.0) < ratio(10.0) && ratio(10.0) < ratio(100.0));
    }

    #[test]
    fn needs_two_dimensions() {
        assert!(make_truncated_gaussian_regression(1).is_err());
    }
}
