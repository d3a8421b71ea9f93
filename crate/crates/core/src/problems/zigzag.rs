//! Two-dimensional counterexample on which AdaGrad-Norm with a large step size
//! doubles the gradient norm at every iteration.
//!
//! The path C is a staircase of alternating horizontal and vertical segments.
//! Segment j (1-based) has length a_j; its fixed coordinate is S_{j−1} and its
//! moving coordinate sweeps [S_{j−2}, S_j). Odd segments move along x, even
//! segments along y. With B = 2^{j−1} and offset s from the segment start, the
//! descent direction −∇f splits into an along-path part and a cross part:
//!
//! | region            | along           | cross   |
//! |-------------------|-----------------|---------|
//! | s < 4/L1          | 2B − L1·s·B     | L1·s·B  |
//! | 4/L1 ≤ s < 8/L1   | −2B + L1·s'·B/2 | 4B      |
//! | s ≥ 8/L1          | 0               | 4B      |
//!
//! where s' = s − 4/L1. The field is continuous along C and f is only defined
//! on C.

use rand::RngCore;

use super::{AssumptionConstants, Outcome, Problem};
use crate::error::{check_dim, invalid, Error, Result};

/// Absolute tolerance for deciding that a point lies on C.
pub const PATH_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ZigzagGeometry {
    eta: f64,
    l1: f64,
    a: Vec<f64>,
    // s[k + 1] = S_k for k = −1..=segments
    s: Vec<f64>,
}

/// a_t = η·2^t/√((4^{t+1} − 1)/3), written so that large t cannot overflow.
pub fn zigzag_a(t: usize, geom: &ZigzagGeometry) -> Result<f64> {
    if t == 0 {
        return Err(invalid("segment index starts at 1"));
    }
    Ok(segment_length(geom.eta, t))
}

fn segment_length(eta: f64, t: usize) -> f64 {
    let tail = 0.25f64.powi(t.min(2000) as i32);
    eta * 3f64.sqrt() / (4.0 - tail).sqrt()
}

impl ZigzagGeometry {
    /// Caches a_1..a_segments and the partial sums. Every cached segment must
    /// be longer than 8/L1 so that all three regions fit.
    pub fn new(eta: f64, l1: f64, segments: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {eta}")));
        }
        if !(l1 > 0.0 && l1.is_finite()) {
            return Err(invalid(format!("L1 must be positive, got {l1}")));
        }
        if segments == 0 {
            return Err(invalid("need at least one segment"));
        }
        let a: Vec<f64> = (1..=segments).map(|t| segment_length(eta, t)).collect();
        if let Some((i, &len)) = a.iter().enumerate().find(|(_, &len)| len <= 8.0 / l1) {
            return Err(Error::Precondition(format!(
                "segment {} has length {len}, not longer than 8/L1 = {}",
                i + 1,
                8.0 / l1
            )));
        }
        let mut s = vec![0.0; segments + 2];
        for k in 1..=segments {
            s[k + 1] = s[k - 1] + a[k - 1];
        }
        Ok(Self { eta, l1, a, s })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn segments(&self) -> usize {
        self.a.len()
    }

    /// S_k for −1 ≤ k ≤ segments.
    pub fn partial_sum(&self, k: i64) -> f64 {
        assert!(k >= -1 && k <= self.segments() as i64, "S_{k} is not cached");
        self.s[(k + 1) as usize]
    }

    /// Start of segment j, which is where AdaGrad-Norm with ν₀ = 1 sits after
    /// j − 1 steps from the origin.
    pub fn corner(&self, j: usize) -> Result<[f64; 2]> {
        if j == 0 || j > self.segments() {
            return Err(invalid(format!("segment {j} outside 1..={}", self.segments())));
        }
        let moving = self.partial_sum(j as i64 - 2);
        let fixed = self.partial_sum(j as i64 - 1);
        Ok(if j % 2 == 1 { [moving, fixed] } else { [fixed, moving] })
    }

    /// Finds the segment containing `p` and the offset from its start. A
    /// junction belongs to the segment it starts.
    fn locate(&self, p: [f64; 2]) -> Result<(usize, f64)> {
        let off = || Error::OffPath { x: p[0], y: p[1] };
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(off());
        }
        for j in (1..=self.segments()).rev() {
            let (moving, fixed) = if j % 2 == 1 { (p[0], p[1]) } else { (p[1], p[0]) };
            let lo = self.partial_sum(j as i64 - 2);
            let hi = self.partial_sum(j as i64);
            if (fixed - self.partial_sum(j as i64 - 1)).abs() > PATH_TOL {
                continue;
            }
            if moving < lo - PATH_TOL || moving > hi + PATH_TOL {
                continue;
            }
            if moving >= hi - PATH_TOL && j == self.segments() {
                // the far end of the last cached segment starts an uncached one
                return Err(off());
            }
            // Points within tolerance of a junction are identified with it.
            // The corner-to-corner orbit is unstable: an along-path offset s
            // feeds a cross step of about s·ηL1√3/4, so rounding would
            // otherwise compound geometrically.
            let s = moving - lo;
            return Ok((j, if s <= PATH_TOL { 0.0 } else { s.min(self.a[j - 1]) }));
        }
        Err(off())
    }
}

/// (along, cross) components of −∇f on segment j at offset s.
fn descent_parts(l1: f64, j: usize, s: f64) -> (f64, f64) {
    let b = 2f64.powi(j as i32 - 1);
    let knee = 4.0 / l1;
    if s < knee {
        (2.0 * b - l1 * s * b, l1 * s * b)
    } else if s < 2.0 * knee {
        (-2.0 * b + 0.5 * l1 * (s - knee) * b, 4.0 * b)
    } else {
        (0.0, 4.0 * b)
    }
}

pub fn zigzag_gradient(point: [f64; 2], geom: &ZigzagGeometry) -> Result<[f64; 2]> {
    let (j, s) = geom.locate(point)?;
    let (along, cross) = descent_parts(geom.l1, j, s);
    Ok(if j % 2 == 1 { [-along, -cross] } else { [-cross, -along] })
}

pub fn zigzag_value(point: [f64; 2], geom: &ZigzagGeometry) -> Result<f64> {
    let (j, s) = geom.locate(point)?;
    let l1 = geom.l1;
    let b = 2f64.powi(j as i32 - 1);
    // value at the start of segment j
    let start = (4.0 * b - 2.0) / l1;
    let knee = 4.0 / l1;
    Ok(if s < knee {
        start - (2.0 * b * s - 0.5 * l1 * b * s * s)
    } else if s < 2.0 * knee {
        let t = s - knee;
        start + 2.0 * b * t - 0.25 * l1 * b * t * t
    } else {
        start + 4.0 * b / l1
    })
}

/// The zigzag field wrapped as a deterministic [`Problem`] starting at the
/// origin.
#[derive(Debug, Clone)]
pub struct ZigzagProblem {
    geom: ZigzagGeometry,
    constants: AssumptionConstants,
}

impl ZigzagProblem {
    pub fn new(geom: ZigzagGeometry) -> Self {
        let constants = AssumptionConstants {
            l0: Some(0.0),
            l1: Some(geom.l1),
            d0: Some(0.0),
            d1: Some(1.0),
            f_star: 0.0,
            coordinate_affine_holds: true,
            ..Default::default()
        };
        Self { geom, constants }
    }

    pub fn geometry(&self) -> &ZigzagGeometry {
        &self.geom
    }
}

fn pair(w: &[f64]) -> Result<[f64; 2]> {
    check_dim(2, w.len())?;
    Ok([w[0], w[1]])
}

impl Problem for ZigzagProblem {
    fn name(&self) -> &str {
        "zigzag"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        zigzag_value(pair(w)?, &self.geom)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(zigzag_gradient(pair(w)?, &self.geom)?.to_vec())
    }

    fn sample_gradient(&self, w: &[f64], _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.gradient(w)
    }

    fn support(&self, w: &[f64]) -> Result<Option<Vec<Outcome>>> {
        Ok(Some(vec![Outcome { prob: 1.0, gradient: self.gradient(w)? }]))
    }

    fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ZigzagGeometry {
        ZigzagGeometry::new(11.0, 1.0, 30).unwrap()
    }

    fn norm(v: [f64; 2]) -> f64 {
        v[0].hypot(v[1])
    }

    #[test]
    fn segment_lengths() {
        let g = ZigzagGeometry::new(1.0, 100.0, 3).unwrap();
        assert!((zigzag_a(1, &g).unwrap() - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((zigzag_a(2, &g).unwrap() - 4.0 / 21f64.sqrt()).abs() < 1e-15);
        assert!((zigzag_a(1, &geom()).unwrap() - 9.838_699_100_999_074).abs() < 1e-12);
        assert!(zigzag_a(0, &g).is_err());
        // decreasing towards η√3/2
        let mut prev = f64::INFINITY;
        for t in 1..25 {
            let a = zigzag_a(t, &geom()).unwrap();
            assert!(a < prev && a > 11.0 * 3f64.sqrt() / 2.0 - 1e-12);
            prev = a;
        }
    }

    #[test]
    fn closed_form_matches_the_power_sum() {
        let g = geom();
        for t in 1..20 {
            let direct = 11.0 * 2f64.powi(t as i32) / ((4f64.powi(t as i32 + 1) - 1.0) / 3.0).sqrt();
            assert!((zigzag_a(t, &g).unwrap() - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn short_segments_are_rejected() {
        assert!(matches!(ZigzagGeometry::new(1.0, 1.0, 5), Err(Error::Precondition(_))));
        assert!(ZigzagGeometry::new(0.0, 1.0, 5).is_err());
        assert!(ZigzagGeometry::new(11.0, 1.0, 0).is_err());
    }

    #[test]
    fn partial_sums_alternate() {
        let g = geom();
        assert_eq!(g.partial_sum(-1), 0.0);
        assert_eq!(g.partial_sum(0), 0.0);
        let a = |t| zigzag_a(t, &g).unwrap();
        assert!((g.partial_sum(3) - (a(1) + a(3))).abs() < 1e-12);
        assert!((g.partial_sum(4) - (a(2) + a(4))).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_the_first_corners() {
        let g = geom();
        assert_eq!(zigzag_gradient([0.0, 0.0], &g).unwrap(), [-2.0, 0.0]);
        let c2 = [g.partial_sum(1), g.partial_sum(0)];
        assert_eq!(zigzag_gradient(c2, &g).unwrap(), [-0.0, -4.0]);
        assert_eq!(zigzag_gradient([1.0, 0.0], &g).unwrap(), [-1.0, -1.0]);
    }

    #[test]
    fn corner_gradient_norms_double() {
        let g = geom();
        for j in 1..=30 {
            let c = g.corner(j).unwrap();
            let n = norm(zigzag_gradient(c, &g).unwrap());
            assert!((n - 2f64.powi(j as i32)).abs() <= 1e-12 * n);
        }
    }

    #[test]
    fn value_anchor_and_slope() {
        let g = geom();
        assert_eq!(zigzag_value([0.0, 0.0], &g).unwrap(), 2.0);
        let d = 1e-6;
        let df = zigzag_value([d, 0.0], &g).unwrap() - 2.0;
        assert!((df + 2.0 * d).abs() < 1e-10);
    }

    #[test]
    fn value_is_continuous_at_region_and_segment_boundaries() {
        let g = geom();
        for j in 1..=6 {
            let c = g.corner(j).unwrap();
            let axis = if j % 2 == 1 { 0 } else { 1 };
            let at = |s: f64| {
                let mut p = c;
                p[axis] += s;
                zigzag_value(p, &g).unwrap()
            };
            for s in [4.0, 8.0] {
                assert!((at(s - 1e-9) - at(s)).abs() < 1e-6);
            }
            let end = at(zigzag_a(j, &g).unwrap() - 1e-10);
            let next = zigzag_value(g.corner(j + 1).unwrap(), &g).unwrap();
            assert!((end - next).abs() < 1e-6 * next.max(1.0));
        }
    }

    #[test]
    fn off_path_points_are_rejected() {
        let g = geom();
        assert!(matches!(zigzag_gradient([0.0, 1.0], &g), Err(Error::OffPath { .. })));
        assert!(zigzag_value([-1.0, 0.0], &g).is_err());
        assert!(zigzag_value([f64::NAN, 0.0], &g).is_err());
        let last = g.segments();
        let mut end = g.corner(last).unwrap();
        end[if last % 2 == 1 { 0 } else { 1 }] += zigzag_a(last, &g).unwrap();
        assert!(zigzag_gradient(end, &g).is_err());
    }

    #[test]
    fn near_path_points_snap_to_the_segment() {
        let g = geom();
        let v = zigzag_gradient([1.0, 5e-10], &g).unwrap();
        assert_eq!(v, [-1.0, -1.0]);
    }
}
