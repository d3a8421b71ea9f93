use rand::{Rng, RngCore};

use super::{AssumptionConstants, Outcome, Problem};
use crate::error::{check_dim, invalid, Result};

/// f(w) = (L/2)‖w‖² with the oracle g = Lw ± σe_j, j uniform over coordinates
/// and the sign uniform: 2·dim equally likely outcomes.
#[derive(Debug, Clone)]
pub struct TwoPointQuadratic {
    l: f64,
    sigma: f64,
    dim: usize,
    start: f64,
    constants: AssumptionConstants,
}

pub fn make_twopoint_quadratic(l: f64, sigma: f64, dim: usize) -> Result<TwoPointQuadratic> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid(format!("L must be positive, got {l}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    if dim == 0 {
        return Err(invalid("dim must be positive"));
    }
    let constants = AssumptionConstants {
        l: Some(l),
        d0: Some(sigma * sigma),
        d1: Some(1.0),
        f_star: 0.0,
        // E[g_l²] = (∂_l f)² + σ²/dim, so the coordinate-wise bound holds too.
        coordinate_affine_holds: true,
        ..Default::default()
    };
    Ok(TwoPointQuadratic { l, sigma, dim, start: 1.0, constants })
}

impl TwoPointQuadratic {
    /// Sets the Euclidean norm of the (all-equal) initial point.
    pub fn with_start(mut self, norm: f64) -> Self {
        self.start = norm;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Problem for TwoPointQuadratic {
    fn name(&self) -> &str {
        "two_point_quadratic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim, w.len())?;
        Ok(0.5 * self.l * crate::linalg::norm_sq(w))
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, w.len())?;
        Ok(w.iter().map(|x| self.l * x).collect())
    }

    fn sample_gradient(&self, w: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mut g = self.gradient(w)?;
        if self.sigma > 0.0 {
            let j = rng.random_range(0..self.dim);
            if rng.random::<bool>() {
                g[j] += self.sigma;
            } else {
                g[j] -= self.sigma;
            }
        }
        Ok(g)
    }

    fn support(&self, w: &[f64]) -> Result<Option<Vec<Outcome>>> {
        let grad = self.gradient(w)?;
        let prob = 1.0 / (2 * self.dim) as f64;
        let mut out = Vec::with_capacity(2 * self.dim);
        for j in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut g = grad.clone();
                g[j] += sign * self.sigma;
                out.push(Outcome { prob, gradient: g });
            }
        }
        Ok(Some(out))
    }

    fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![self.start / (self.dim as f64).sqrt(); self.dim]
    }
}
