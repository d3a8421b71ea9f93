use rand::{Rng, RngCore};

use super::{AssumptionConstants, Outcome, Problem};
use crate::error::{check_dim, invalid, Result};

pub const EXEMPLAR_BETA: f64 = 0.5;
/// 1/(β sinh β), chosen so that (L0, L1) = (1, 1) holds in the two-point form.
pub const EXEMPLAR_ALPHA: f64 = 3.838_069_502_669_887_4;

/// One-dimensional f(w) = α(cosh(βw) − 1). Not uniformly smooth, but
/// |f'(u) − f'(v)| ≤ (1 + |f'(u)|)|u − v| whenever |u − v| ≤ 1. The oracle adds
/// ±σ with equal probability.
#[derive(Debug, Clone)]
pub struct L0L1Exemplar {
    sigma: f64,
    start: f64,
    constants: AssumptionConstants,
}

pub fn make_l0l1_exemplar() -> L0L1Exemplar {
    L0L1Exemplar {
        sigma: 0.0,
        start: 2.0,
        constants: AssumptionConstants {
            l0: Some(1.0),
            l1: Some(1.0),
            d0: Some(0.0),
            d1: Some(1.0),
            f_star: 0.0,
            coordinate_affine_holds: true,
            ..Default::default()
        },
    }
}

impl L0L1Exemplar {
    pub fn with_noise(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
        }
        self.sigma = sigma;
        self.constants.d0 = Some(sigma * sigma);
        Ok(self)
    }

    pub fn with_start(mut self, w: f64) -> Self {
        self.start = w;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// f''(w).
    pub fn curvature(&self, w: f64) -> f64 {
        EXEMPLAR_ALPHA * EXEMPLAR_BETA * EXEMPLAR_BETA * (EXEMPLAR_BETA * w).cosh()
    }

    fn derivative(&self, w: f64) -> f64 {
        EXEMPLAR_ALPHA * EXEMPLAR_BETA * (EXEMPLAR_BETA * w).sinh()
    }
}

impl Problem for L0L1Exemplar {
    fn name(&self) -> &str {
        "l0l1_exemplar"
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_dim(1, w.len())?;
        // cosh(x) − 1 = 2 sinh²(x/2) keeps precision near the minimum.
        let h = (0.5 * EXEMPLAR_BETA * w[0]).sinh();
        Ok(2.0 * EXEMPLAR_ALPHA * h * h)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(1, w.len())?;
        Ok(vec![self.derivative(w[0])])
    }

    fn sample_gradient(&self, w: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mut g = self.gradient(w)?;
        if self.sigma > 0.0 {
            g[0] += if rng.random::<bool>() { self.sigma } else { -self.sigma };
        }
        Ok(g)
    }

    fn support(&self, w: &[f64]) -> Result<Option<Vec<Outcome>>> {
        let d = self.gradient(w)?[0];
        Ok(Some(vec![
            Outcome { prob: 0.5, gradient: vec![d + self.sigma] },
            Outcome { prob: 0.5, gradient: vec![d - self.sigma] },
        ]))
    }

    fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![self.start]
    }
}
