use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AssumptionConstants, Outcome, Problem};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{dot, norm_sq};

/// Over-parameterized least squares f(w) = (1/2n) Σ_i (⟨x_i, w⟩ − y_i)² with
/// y = Xw* for a hidden w*, so every summand vanishes at w*. The oracle picks
/// one summand uniformly.
#[derive(Debug, Clone)]
pub struct InterpolationLeastSquares {
    n: usize,
    d: usize,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    w_star: Vec<f64>,
    constants: AssumptionConstants,
}

pub fn make_interpolation_least_squares(
    n: usize,
    d: usize,
    seed: u64,
) -> Result<InterpolationLeastSquares> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if d <= n {
        return Err(invalid(format!(
            "interpolation needs d > n, got n = {n}, d = {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect()
        })
        .collect();
    let w_star: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let targets = rows.iter().map(|x| dot(x, &w_star)).collect();

    let gram = DMatrix::from_fn(n, n, |i, j| dot(&rows[i], &rows[j]));
    let l = SymmetricEigen::new(gram.clone()).eigenvalues.max() / n as f64;
    let d1 = strong_growth_constant(&gram, &rows)?;

    let constants = AssumptionConstants {
        l: Some(l),
        d0: Some(0.0),
        d1: Some(d1),
        f_star: 0.0,
        coordinate_affine_holds: false,
        ..Default::default()
    };
    Ok(InterpolationLeastSquares { n, d, rows, targets, w_star, constants })
}

/// sup over residuals r of E‖g‖²/‖∇f‖² = n·rᵀDr / rᵀGr, with G = XXᵀ and
/// D = diag(‖x_i‖²); equals n·λ_max(L⁻¹DL⁻ᵀ) for the Cholesky factor G = LLᵀ.
fn strong_growth_constant(gram: &DMatrix<f64>, rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("design matrix is rank deficient".into()))?;
    let l = chol.l();
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        rows.iter().map(|x| norm_sq(x)),
    ));
    let left = l
        .solve_lower_triangular(&diag)
        .ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;
    let m = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;
    let sym = (&m + m.transpose()) * 0.5;
    Ok(n as f64 * SymmetricEigen::new(sym).eigenvalues.max())
}

impl InterpolationLeastSquares {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The hidden interpolating point.
    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    fn residual(&self, i: usize, w: &[f64]) -> f64 {
        dot(&self.rows[i], w) - self.targets[i]
    }
}

impl Problem for InterpolationLeastSquares {
    fn name(&self) -> &str {
        "interpolation_least_squares"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.d, w.len())?;
        let sum: f64 = (0..self.n).map(|i| self.residual(i, w).powi(2)).sum();
        Ok(sum / (2 * self.n) as f64)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, w.len())?;
        let mut g = vec![0.0; self.d];
        for i in 0..self.n {
            let r = self.residual(i, w) / self.n as f64;
            for (gj, xj) in g.iter_mut().zip(&self.rows[i]) {
                *gj += r * xj;
            }
        }
        Ok(g)
    }

    fn sample_gradient(&self, w: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let i = rng.random_range(0..self.n);
        self.component_gradient(i, w)
    }

    fn support(&self, w: &[f64]) -> Result<Option<Vec<Outcome>>> {
        let prob = 1.0 / self.n as f64;
        (0..self.n)
            .map(|i| Ok(Outcome { prob, gradient: self.component_gradient(i, w)? }))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn num_components(&self) -> Option<usize> {
        Some(self.n)
    }

    fn component_gradient(&self, i: usize, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, w.len())?;
        if i >= self.n {
            return Err(invalid(format!("component {i} out of range 0..{}", self.n)));
        }
        let r = self.residual(i, w);
        Ok(self.rows[i].iter().map(|x| r * x).collect())
    }

    fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.d]
    }
}
