//! Empirical estimators for the noise and smoothness assumptions.
//!
//! Each probe owns a generator derived from (seed, probe index), so results do
//! not depend on evaluation order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{dist, norm, norm_sq};
use crate::optimizers::{run_with_rng, Method, OptimizerConfig, RunOptions};
use crate::problems::{zigzag_gradient, Field, Problem, ZigzagGeometry};

fn probe_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// E‖g(w)‖², exactly over the support when there is one.
fn second_moment(problem: &dyn Problem, w: &[f64], samples: usize, rng: &mut dyn RngCore) -> Result<f64> {
    if let Some(sup) = problem.support(w)? {
        return Ok(sup.iter().map(|o| o.prob * norm_sq(&o.gradient)).sum());
    }
    if samples == 0 {
        return Err(invalid("Monte-Carlo estimate needs at least one sample"));
    }
    let mut acc = 0.0;
    for _ in 0..samples {
        acc += norm_sq(&problem.sample_gradient(w, rng)?);
    }
    Ok(acc / samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineFit {
    pub d0_hat: f64,
    pub d1_hat: f64,
    /// max over probes of E‖g‖² − (D0_hat + D1_hat‖∇f‖²); nonpositive up to
    /// rounding by construction of the fit.
    pub max_violation: f64,
    pub n_probes: usize,
}

/// Smallest (D0, D1) ≥ 0, in the sense of minimising D0 + D1·median‖∇f‖²,
/// with E‖g‖² ≤ D0 + D1‖∇f‖² at every probe.
pub fn estimate_affine_constants(
    problem: &dyn Problem,
    probes: &[Vec<f64>],
    samples_per_probe: usize,
    seed: u64,
) -> Result<AffineFit> {
    if probes.len() < 5 {
        return Err(invalid(format!("need at least 5 probes, got {}", probes.len())));
    }
    for p in probes {
        check_dim(problem.dim(), p.len())?;
    }
    if probes.iter().all(|p| p == &probes[0]) {
        return Err(invalid("all probes are identical"));
    }
    let mut grads = Vec::with_capacity(probes.len());
    let mut moments = Vec::with_capacity(probes.len());
    for (i, w) in probes.iter().enumerate() {
        grads.push(norm_sq(&problem.gradient(w)?));
        moments.push(second_moment(problem, w, samples_per_probe, &mut probe_rng(seed, i))?);
    }
    let (d0_hat, d1_hat) = minimax_affine(&grads, &moments)?;
    let max_violation = grads
        .iter()
        .zip(&moments)
        .map(|(g, e)| e - (d0_hat + d1_hat * g))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AffineFit { d0_hat, d1_hat, max_violation, n_probes: probes.len() })
}

/// Two-variable linear program solved by enumerating the vertices of the
/// feasible region.
fn minimax_affine(grads: &[f64], moments: &[f64]) -> Result<(f64, f64)> {
    let mut sorted = grads.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let scale = moments.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let feasible = |d0: f64, d1: f64| {
        d0 >= 0.0
            && d1 >= 0.0
            && d0.is_finite()
            && d1.is_finite()
            && grads.iter().zip(moments).all(|(g, e)| d0 + d1 * g >= e - 1e-12 * scale)
    };

    let mut candidates = vec![(moments.iter().cloned().fold(0.0, f64::max), 0.0)];
    if grads.iter().zip(moments).all(|(g, e)| *g > 0.0 || *e <= 0.0) {
        let d1 = grads
            .iter()
            .zip(moments)
            .filter(|(g, _)| **g > 0.0)
            .map(|(g, e)| e / g)
            .fold(0.0, f64::max);
        candidates.push((0.0, d1));
    }
    for i in 0..grads.len() {
        for j in i + 1..grads.len() {
            let dg = grads[j] - grads[i];
            if dg.abs() <= 1e-15 * grads[i].abs().max(grads[j].abs()) {
                continue;
            }
            let d1 = (moments[j] - moments[i]) / dg;
            let d0 = moments[i] - d1 * grads[i];
            candidates.push((d0.max(0.0), d1.max(0.0)));
        }
    }
    candidates
        .into_iter()
        .filter(|(d0, d1)| feasible(*d0, *d1))
        .min_by(|a, b| (a.0 + a.1 * median).total_cmp(&(b.0 + b.1 * median)).then(a.0.total_cmp(&b.0)))
        .ok_or_else(|| invalid("no feasible affine bound over the probes"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateReport {
    /// E[g_l²]/(∂_l f)² per probe; +∞ where ∂_l f = 0.
    pub ratios: Vec<f64>,
    pub strictly_increasing: bool,
}

pub fn check_coordinate_affine(
    problem: &dyn Problem,
    coord: usize,
    probe_path: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<CoordinateReport> {
    if coord >= problem.dim() {
        return Err(invalid(format!("coordinate {coord} outside 0..{}", problem.dim())));
    }
    let mut ratios = Vec::with_capacity(probe_path.len());
    for (i, w) in probe_path.iter().enumerate() {
        check_dim(problem.dim(), w.len())?;
        let partial = problem.gradient(w)?[coord];
        let moment = match problem.support(w)? {
            Some(sup) => sup.iter().map(|o| o.prob * o.gradient[coord].powi(2)).sum(),
            None => {
                if samples == 0 {
                    return Err(invalid("Monte-Carlo estimate needs at least one sample"));
                }
                let mut rng = probe_rng(seed, i);
                let mut acc = 0.0;
                for _ in 0..samples {
                    acc += problem.sample_gradient(w, &mut rng)?[coord].powi(2);
                }
                acc / samples as f64
            }
        };
        ratios.push(if partial == 0.0 { f64::INFINITY } else { moment / (partial * partial) });
    }
    let strictly_increasing = ratios.windows(2).all(|p| p[1] > p[0]);
    Ok(CoordinateReport { ratios, strictly_increasing })
}

/// Source of point pairs for smoothness estimation.
pub trait PairSampler {
    fn dim(&self) -> usize;

    /// Two distinct points, at most `max_dist` apart when a bound is given.
    fn sample_pair(&self, max_dist: Option<f64>, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>);
}

/// Axis-aligned box. Bounded pairs start uniformly in the box and step a
/// uniform distance in a uniform direction.
#[derive(Debug, Clone)]
pub struct BoxRegion {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(invalid("box must have positive width in every coordinate"));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    fn point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| rng.random_range(*a..*b)).collect()
    }
}

impl PairSampler for BoxRegion {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn sample_pair(&self, max_dist: Option<f64>, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        let a = self.point(rng);
        loop {
            let b = match max_dist {
                None => self.point(rng),
                Some(r) => {
                    let dir: Vec<f64> = (0..a.len()).map(|_| StandardNormal.sample(rng)).collect();
                    let len = norm(&dir);
                    let step = r * (1.0 - rng.random::<f64>());
                    a.iter().zip(&dir).map(|(x, d)| x + step * d / len).collect()
                }
            };
            if b != a {
                return (a, b);
            }
        }
    }
}

/// Pairs on the zigzag path within the first `segments` segments; the second
/// point lies ahead along the path and may sit on the next segment.
#[derive(Debug, Clone)]
pub struct ZigzagPath {
    geom: ZigzagGeometry,
    segments: usize,
}

impl ZigzagPath {
    pub fn new(geom: ZigzagGeometry, segments: usize) -> Result<Self> {
        if segments == 0 || segments + 1 > geom.segments() {
            return Err(invalid(format!(
                "can sample 1..={} segments, asked for {segments}",
                geom.segments().saturating_sub(1)
            )));
        }
        Ok(Self { geom, segments })
    }

    /// Point at path length `s` past the start of segment j, spilling onto
    /// later segments.
    fn at(&self, mut j: usize, mut s: f64) -> Vec<f64> {
        loop {
            let len = crate::problems::zigzag_a(j, &self.geom).expect("j ≥ 1");
            if s < len || j == self.geom.segments() {
                let mut c = self.geom.corner(j).expect("cached").to_vec();
                c[if j % 2 == 1 { 0 } else { 1 }] += s.min(len);
                return c;
            }
            s -= len;
            j += 1;
        }
    }
}

impl PairSampler for ZigzagPath {
    fn dim(&self) -> usize {
        2
    }

    fn sample_pair(&self, max_dist: Option<f64>, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        let reach = max_dist.unwrap_or(1.0 / self.geom.l1());
        let j = rng.random_range(1..=self.segments);
        let len = crate::problems::zigzag_a(j, &self.geom).expect("j ≥ 1");
        let s = rng.random_range(0.0..len);
        let u = reach * (1.0 - rng.random::<f64>());
        (self.at(j, s), self.at(j, s + u))
    }
}

/// The zigzag field as a [`Field`]; its value is only needed for descent checks.
pub struct ZigzagField<'a>(pub &'a ZigzagGeometry);

impl Field for ZigzagField<'_> {
    fn value(&self, w: &[f64]) -> Result<f64> {
        check_dim(2, w.len())?;
        crate::problems::zigzag_value([w[0], w[1]], self.0)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(2, w.len())?;
        Ok(zigzag_gradient([w[0], w[1]], self.0)?.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothnessEstimate {
    Uniform,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SmoothnessFit {
    Uniform {
        l_hat: f64,
    },
    Relaxed {
        l0_hat: f64,
        l1_hat: f64,
        /// max over pairs of ratio − (L0_hat + L1_hat‖∇f(w1)‖).
        max_residual: f64,
        rounds: usize,
    },
}

/// Uniform mode: max of ‖∇f(w1) − ∇f(w2)‖/‖w1 − w2‖ over sampled pairs.
/// Relaxed mode: nonnegative least-squares fit of that ratio against
/// ‖∇f(w1)‖ over pairs closer than 1/L1_guess, refitting until the guess
/// settles (at most 5 rounds, starting from L1_guess = 1).
pub fn estimate_smoothness(
    field: &(impl Field + ?Sized),
    sampler: &dyn PairSampler,
    pairs: usize,
    mode: SmoothnessEstimate,
    seed: u64,
) -> Result<SmoothnessFit> {
    if pairs < 2 {
        return Err(invalid("need at least two pairs"));
    }
    let collect = |max_dist: Option<f64>, round: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = probe_rng(seed, round);
        let mut ratios = Vec::with_capacity(pairs);
        let mut norms = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let (a, b) = sampler.sample_pair(max_dist, &mut rng);
            let ga = field.gradient(&a)?;
            let gb = field.gradient(&b)?;
            ratios.push(dist(&ga, &gb) / dist(&a, &b));
            norms.push(norm(&ga));
        }
        Ok((ratios, norms))
    };
    match mode {
        SmoothnessEstimate::Uniform => {
            let (ratios, _) = collect(None, 0)?;
            Ok(SmoothnessFit::Uniform { l_hat: ratios.iter().cloned().fold(0.0, f64::max) })
        }
        SmoothnessEstimate::Relaxed => {
            let mut guess = 1.0;
            let mut rounds = 0;
            loop {
                rounds += 1;
                let (ratios, norms) = collect(Some(1.0 / guess), rounds)?;
                let (l0, l1) = nnls_line(&norms, &ratios);
                let max_residual = ratios
                    .iter()
                    .zip(&norms)
                    .map(|(r, x)| r - (l0 + l1 * x))
                    .fold(f64::NEG_INFINITY, f64::max);
                let settled = l1 <= 0.0 || (l1 - guess).abs() <= 1e-3 * guess;
                if settled || rounds == 5 {
                    return Ok(SmoothnessFit::Relaxed { l0_hat: l0, l1_hat: l1, max_residual, rounds });
                }
                guess = l1;
            }
        }
    }
}

/// argmin over a, b ≥ 0 of Σ (y − a − b x)².
fn nnls_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sse = |a: f64, b: f64| x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>();
    let mut best = (my.max(0.0), 0.0);
    let x2: f64 = x.iter().map(|v| v * v).sum();
    if x2 > 0.0 {
        let b = (x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() / x2).max(0.0);
        if sse(0.0, b) < sse(best.0, best.1) {
            best = (0.0, b);
        }
    }
    if sxx > 0.0 {
        let b = sxy / sxx;
        let a = my - b * mx;
        if a >= 0.0 && b >= 0.0 && sse(a, b) <= sse(best.0, best.1) {
            best = (a, b);
        }
    }
    best
}

/// Largest per-component Lipschitz ratio over sampled pairs, for finite sums.
pub fn estimate_component_smoothness(
    problem: &dyn Problem,
    sampler: &dyn PairSampler,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let n = problem.num_components().ok_or_else(|| {
        Error::Config(format!("problem `{}` is not a finite sum", problem.name()))
    })?;
    let mut rng = probe_rng(seed, 0);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let (a, b) = sampler.sample_pair(None, &mut rng);
        for i in 0..n {
            let ga = problem.component_gradient(i, &a)?;
            let gb = problem.component_gradient(i, &b)?;
            best = best.max(dist(&ga, &gb) / dist(&a, &b));
        }
    }
    Ok(best)
}

/// Inner iterates of a reshuffled AdaGrad run, used as probe points for the
/// per-iterate affine condition on finite sums.
pub fn rr_probe_points(
    problem: &dyn Problem,
    config: &OptimizerConfig,
    epochs: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = run_with_rng(problem, Method::Rr, config, epochs, &mut rng, RunOptions { record_inner: true })?;
    Ok(out.inner.into_iter().flatten().map(|r| r.w).collect())
}
