//! Test problems with analytically known assumption constants.
//!
//! Every generator returns a [`Problem`]: objective value, full gradient, an
//! unbiased stochastic-gradient oracle and (where the noise is discrete) the
//! exact outcome distribution, so conditional expectations can be enumerated
//! instead of estimated.

mod exemplar;
mod least_squares;
mod quadratic;
mod regression;
mod zigzag;

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use exemplar::{make_l0l1_exemplar, L0L1Exemplar, EXEMPLAR_ALPHA, EXEMPLAR_BETA};
pub use least_squares::{make_interpolation_least_squares, InterpolationLeastSquares};
pub use quadratic::{make_twopoint_quadratic, TwoPointQuadratic};
pub use regression::{
    make_truncated_gaussian_regression, truncated_normal_moment, TruncatedGaussianRegression,
};
pub use zigzag::{zigzag_a, zigzag_gradient, zigzag_value, ZigzagGeometry, ZigzagProblem};

/// One outcome of a finite-support stochastic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub gradient: Vec<f64>,
}

/// Known constants of the standard assumptions, as certified by a generator.
///
/// `l` is the uniform smoothness constant, `d0`/`d1` the affine noise
/// constants (E‖g‖² ≤ D0 + D1‖∇f‖²), `l0`/`l1` the relaxed smoothness
/// constants (‖∇f(u)−∇f(v)‖ ≤ (L0 + L1‖∇f(u)‖)‖u−v‖ whenever ‖u−v‖ ≤ 1/L1).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub l: Option<f64>,
    pub d0: Option<f64>,
    pub d1: Option<f64>,
    pub l0: Option<f64>,
    pub l1: Option<f64>,
    pub f_star: f64,
    pub coordinate_affine_holds: bool,
}

impl AssumptionConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("L", self.l),
            ("D0", self.d0),
            ("D1", self.d1),
            ("L0", self.l0),
            ("L1", self.l1),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
                }
            }
        }
        if let (Some(d0), Some(d1)) = (self.d0, self.d1) {
            if d0 + d1 <= 0.0 {
                return Err(invalid("D0 + D1 must be positive"));
            }
        }
        Ok(())
    }

    pub fn require_l(&self) -> Result<f64> {
        self.l
            .ok_or_else(|| Error::Config("problem does not declare a smoothness constant L".into()))
    }

    pub fn require_affine(&self) -> Result<(f64, f64)> {
        match (self.d0, self.d1) {
            (Some(d0), Some(d1)) => Ok((d0, d1)),
            _ => Err(Error::Config(
                "problem does not declare affine noise constants (D0, D1)".into(),
            )),
        }
    }
}

/// An objective with a stochastic first-order oracle.
///
/// Implementations are immutable after construction; randomness is always
/// drawn from the caller's generator.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> Result<f64>;

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>>;

    /// Draws g with E[g | w] = ∇f(w).
    fn sample_gradient(&self, w: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;

    /// The exact outcome distribution of the oracle at `w`, when it is finite.
    fn support(&self, _w: &[f64]) -> Result<Option<Vec<Outcome>>> {
        Ok(None)
    }

    /// Number of summands when the objective is a finite average f = (1/n) Σ f_i.
    fn num_components(&self) -> Option<usize> {
        None
    }

    fn component_gradient(&self, _i: usize, _w: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Config(format!(
            "problem `{}` is not a finite sum",
            self.name()
        )))
    }

    fn constants(&self) -> &AssumptionConstants;

    fn initial_point(&self) -> Vec<f64>;
}

/// A differentiable scalar field. Every [`Problem`] is one; [`FnField`] wraps
/// plain closures.
pub trait Field {
    fn value(&self, w: &[f64]) -> Result<f64>;

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>>;
}

impl<P: Problem + ?Sized> Field for P {
    fn value(&self, w: &[f64]) -> Result<f64> {
        Problem::value(self, w)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        Problem::gradient(self, w)
    }
}

pub struct FnField<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FnField<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(value: V, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<V, G> Field for FnField<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, w: &[f64]) -> Result<f64> {
        Ok((self.value)(w))
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok((self.gradient)(w))
    }
}

/// Settings that depend on the experiment cell rather than the problem table.
#[derive(Debug, Clone, Copy)]
pub struct BuildContext {
    /// Learning rate of the run; the zigzag geometry is tied to it.
    pub eta: f64,
    /// Number of optimizer steps the problem must support.
    pub horizon: usize,
}

/// Names accepted by [`build`].
pub const PROBLEM_NAMES: &[&str] = &[
    "two_point_quadratic",
    "truncated_gaussian_regression",
    "interpolation_least_squares",
    "l0l1_exemplar",
    "zigzag",
];

/// Builds a problem from its registry name and a numeric parameter map.
/// Unknown names and unknown parameter keys are errors.
pub fn build(
    name: &str,
    params: &BTreeMap<String, f64>,
    ctx: &BuildContext,
) -> Result<Box<dyn Problem>> {
    let mut p = Params::new(params);
    let problem: Box<dyn Problem> = match name {
        "two_point_quadratic" => {
            let l = p.real("l", 1.0)?;
            let sigma = p.real("sigma", 1.0)?;
            let dim = p.count("dim", 1)?;
            let start = p.real("start", 1.0)?;
            Box::new(make_twopoint_quadratic(l, sigma, dim)?.with_start(start))
        }
        "truncated_gaussian_regression" => {
            let dim = p.count("dim", 2)?;
            let start = p.real("start", 1.0)?;
            Box::new(make_truncated_gaussian_regression(dim)?.with_start(start))
        }
        "interpolation_least_squares" => {
            let n = p.count("n", 20)?;
            let d = p.count("d", 50)?;
            let seed = p.count("data_seed", 0)? as u64;
            Box::new(make_interpolation_least_squares(n, d, seed)?)
        }
        "l0l1_exemplar" => {
            let sigma = p.real("sigma", 0.0)?;
            let start = p.real("start", 2.0)?;
            Box::new(make_l0l1_exemplar().with_noise(sigma)?.with_start(start))
        }
        "zigzag" => {
            let l1 = p.real("l1", 1.0)?;
            let geom = ZigzagGeometry::new(ctx.eta, l1, ctx.horizon + 2)?;
            Box::new(ZigzagProblem::new(geom))
        }
        other => {
            return Err(Error::Config(format!(
                "unknown problem `{other}` (expected one of {})",
                PROBLEM_NAMES.join(", ")
            )))
        }
    };
    p.finish(name)?;
    Ok(problem)
}

struct Params<'a> {
    map: &'a BTreeMap<String, f64>,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(map: &'a BTreeMap<String, f64>) -> Self {
        Self { map, used: Vec::new() }
    }

    fn real(&mut self, key: &'static str, default: f64) -> Result<f64> {
        self.used.push(key);
        Ok(self.map.get(key).copied().unwrap_or(default))
    }

    fn count(&mut self, key: &'static str, default: usize) -> Result<usize> {
        self.used.push(key);
        match self.map.get(key) {
            None => Ok(default),
            Some(&v) if v >= 0.0 && v.fract() == 0.0 && v < 1e15 => Ok(v as usize),
            Some(&v) => Err(Error::Config(format!(
                "parameter `{key}` must be a nonnegative integer, got {v}"
            ))),
        }
    }

    fn finish(self, name: &str) -> Result<()> {
        if let Some(k) = self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown parameter `{k}` for problem `{name}`"
            )));
        }
        Ok(())
    }
}
