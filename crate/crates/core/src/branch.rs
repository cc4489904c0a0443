//! Analytic continuation of products `c * prod (t - r_j)^{p_j}` along polylines.
//!
//! Every factor carries a continuous logarithm of `t - r_j`. Along a straight
//! segment that avoids `r_j` the argument of `(t - r_j) / (t0 - r_j)` stays in
//! `(-pi, pi)`, so the principal logarithm of that ratio continues the branch
//! exactly. No stepping or sign guessing is involved.

use num_complex::Complex64 as C64;

use crate::error::{fmt_c, LameError, Result};
use crate::quad::{integrate, QuadOptions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Factor {
    pub root: C64,
    pub power: C64,
}

/// A multivalued product of powers. Which branch is meant is carried by a
/// [`BranchPoint`].
#[derive(Clone, Debug)]
pub struct MultiPower {
    pub factors: Vec<Factor>,
    /// Points closer than this to a root count as sitting on it.
    pub sing_tol: f64,
}

/// A point together with the continued logarithms of all factors there.
#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub z: C64,
    logs: Vec<Option<C64>>,
    /// Constant prefactor; the represented value is `coef * exp(sum p_j log_j)`.
    pub coef: C64,
}

fn real_power(p: C64) -> Option<f64> {
    (p.im == 0.0).then_some(p.re)
}

impl MultiPower {
    pub fn new(factors: Vec<Factor>, sing_tol: f64) -> Self {
        MultiPower { factors, sing_tol }
    }

    /// `prod (t - zeros)^{1/2} / prod (t - poles)^{1/2}`, the square root of a
    /// ratio of monic polynomials.
    pub fn sqrt_ratio(zeros: &[C64], poles: &[C64], sing_tol: f64) -> Self {
        let half = C64::new(0.5, 0.0);
        let factors = zeros
            .iter()
            .map(|&r| Factor { root: r, power: half })
            .chain(poles.iter().map(|&r| Factor { root: r, power: -half }))
            .collect();
        MultiPower::new(factors, sing_tol)
    }

    fn at_root(&self, z: C64) -> Vec<bool> {
        self.factors.iter().map(|f| (z - f.root).norm() <= self.sing_tol).collect()
    }

    pub fn is_singular(&self, z: C64) -> bool {
        self.at_root(z).iter().any(|&b| b)
    }

    /// Distance from `z` to the nearest root.
    pub fn dist_to_roots(&self, z: C64) -> f64 {
        self.factors.iter().map(|f| (z - f.root).norm()).fold(f64::INFINITY, f64::min)
    }

    /// `|value|`, which does not depend on the branch.
    pub fn abs_value(&self, t: C64, coef_abs: f64) -> f64 {
        self.factors
            .iter()
            .map(|f| {
                let d = t - f.root;
                (f.power.re * d.norm().ln() - f.power.im * d.arg()).exp()
            })
            .product::<f64>()
            * coef_abs
    }

    /// Branch at a regular point with principal logarithms and prefactor `coef`.
    pub fn principal_at(&self, z: C64, coef: C64) -> Result<BranchPoint> {
        if self.is_singular(z) {
            return Err(LameError::SingularPoint(fmt_c(z)));
        }
        let logs = self.factors.iter().map(|f| Some((z - f.root).ln())).collect();
        Ok(BranchPoint { z, logs, coef })
    }

    /// Branch at a regular point chosen so that its value equals `anchor`.
    pub fn anchored_at(&self, z: C64, anchor: C64) -> Result<BranchPoint> {
        let mut bp = self.principal_at(z, C64::new(1.0, 0.0))?;
        let v = bp.value(self);
        bp.coef = anchor / v;
        Ok(bp)
    }

    /// Branch leaving a singular point. Along the first segment towards `w`
    /// the factors rooted at `z` use `log(t - r) = ln s + Log(w - r)` with
    /// `t = z + s (w - z)`; everything else takes principal logarithms at `z`.
    pub fn singular_start(&self, z: C64, coef: C64) -> BranchPoint {
        let sing = self.at_root(z);
        let logs = self
            .factors
            .iter()
            .zip(&sing)
            .map(|(f, &s)| if s { None } else { Some((z - f.root).ln()) })
            .collect();
        BranchPoint { z, logs, coef }
    }

    fn check_segment(&self, a: C64, b: C64, sa: &[bool], sb: &[bool]) -> Result<()> {
        let d = b - a;
        let len2 = d.norm_sqr();
        for (j, f) in self.factors.iter().enumerate() {
            if sa[j] || sb[j] {
                continue;
            }
            let s = if len2 > 0.0 { ((f.root - a) * d.conj()).re / len2 } else { 0.0 };
            let s = s.clamp(0.0, 1.0);
            if (a + d * s - f.root).norm() <= self.sing_tol {
                return Err(LameError::PathThroughSingularity(fmt_c(f.root)));
            }
        }
        Ok(())
    }

    /// Continues `start` along the straight segment to `end`.
    pub fn advance(&self, start: &BranchPoint, end: C64) -> Result<BranchPoint> {
        let seg = Segment::new(self, start, end)?;
        let logs = (0..self.factors.len())
            .map(|j| {
                if seg.end_sing[j] {
                    None
                } else {
                    Some(seg.log_at(j, 1.0, 0.0, f64::NEG_INFINITY))
                }
            })
            .collect();
        Ok(BranchPoint { z: end, logs, coef: start.coef })
    }

    /// Value at `t` on the segment from `start` to `end` (`t` must lie on it).
    pub fn value_on_segment(&self, start: &BranchPoint, end: C64, s: f64) -> Result<C64> {
        let seg = Segment::new(self, start, end)?;
        Ok(seg.value(s, s.ln(), (1.0 - s).ln()))
    }

    /// `int_start^end value(t) dt` along the straight segment, with algebraic
    /// endpoint singularities removed by `s = u^q` substitutions. Returns the
    /// integral and the branch at `end`.
    pub fn integrate_segment(&self, start: &BranchPoint, end: C64, opts: &QuadOptions) -> Result<(C64, BranchPoint)> {
        let seg = Segment::new(self, start, end)?;
        let val = seg.integrate(opts, |v| v)?;
        let bp = self.advance(start, end)?;
        Ok((val * (end - start.z), bp))
    }

    /// `int |value(t)| |dt|` along the straight segment.
    pub fn integrate_abs_segment(&self, start: &BranchPoint, end: C64, opts: &QuadOptions) -> Result<f64> {
        let seg = Segment::new(self, start, end)?;
        let val = seg.integrate(opts, |v| C64::new(v.norm(), 0.0))?;
        Ok(val.re * (end - start.z).norm())
    }

    /// Integral along a polyline starting at `start.z`; returns the branch at
    /// the final vertex.
    pub fn integrate_path(&self, start: &BranchPoint, path: &[C64], opts: &QuadOptions) -> Result<(C64, BranchPoint)> {
        let mut bp = start.clone();
        let mut acc = C64::new(0.0, 0.0);
        for &w in path {
            if w == bp.z {
                continue;
            }
            let (v, next) = self.integrate_segment(&bp, w, opts)?;
            acc += v;
            bp = next;
        }
        Ok((acc, bp))
    }

    pub fn advance_path(&self, start: &BranchPoint, path: &[C64]) -> Result<BranchPoint> {
        let mut bp = start.clone();
        for &w in path {
            if w != bp.z {
                bp = self.advance(&bp, w)?;
            }
        }
        Ok(bp)
    }
}

impl BranchPoint {
    /// Value of the branch; errors at a singular point.
    pub fn value(&self, f: &MultiPower) -> C64 {
        let mut sum = C64::new(0.0, 0.0);
        for (fac, l) in f.factors.iter().zip(&self.logs) {
            match l {
                Some(l) => sum += fac.power * l,
                None => return C64::new(f64::NAN, f64::NAN),
            }
        }
        self.coef * sum.exp()
    }

    /// Continued `log(z - r_j)`; `None` at a singular point of factor `j`.
    pub fn log_of(&self, j: usize) -> Option<C64> {
        self.logs[j]
    }

    pub fn is_regular(&self) -> bool {
        self.logs.iter().all(|l| l.is_some())
    }
}

struct Segment<'a> {
    f: &'a MultiPower,
    start: &'a BranchPoint,
    d: C64,
    start_sing: Vec<bool>,
    end_sing: Vec<bool>,
    dir_logs: Vec<C64>,
}

impl<'a> Segment<'a> {
    fn new(f: &'a MultiPower, start: &'a BranchPoint, end: C64) -> Result<Self> {
        let start_sing: Vec<bool> = start.logs.iter().map(|l| l.is_none()).collect();
        let end_sing = f.at_root(end);
        f.check_segment(start.z, end, &start_sing, &end_sing)?;
        for j in 0..f.factors.len() {
            if start_sing[j] && end_sing[j] {
                return Err(LameError::PathThroughSingularity(fmt_c(end)));
            }
        }
        let d = end - start.z;
        let dir_logs = f.factors.iter().map(|fac| (end - fac.root).ln()).collect();
        Ok(Segment { f, start, d, start_sing, end_sing, dir_logs })
    }

    /// Continued log of factor `j` at parameter `s`, given accurate `ln s`
    /// and `ln (1 - s)`.
    fn log_at(&self, j: usize, s: f64, ln_s: f64, ln_1ms: f64) -> C64 {
        if self.start_sing[j] {
            return self.dir_logs[j] + ln_s;
        }
        let l0 = self.start.logs[j].unwrap();
        if self.end_sing[j] {
            return l0 + ln_1ms;
        }
        let r = self.f.factors[j].root;
        let ratio = C64::new(1.0, 0.0) + self.d * s / (self.start.z - r);
        l0 + ratio.ln()
    }

    fn value(&self, s: f64, ln_s: f64, ln_1ms: f64) -> C64 {
        let mut sum = C64::new(0.0, 0.0);
        for (j, fac) in self.f.factors.iter().enumerate() {
            sum += fac.power * self.log_at(j, s, ln_s, ln_1ms);
        }
        self.start.coef * sum.exp()
    }

    fn exponent(&self, which: &[bool]) -> Result<f64> {
        let mut e = C64::new(0.0, 0.0);
        for (j, fac) in self.f.factors.iter().enumerate() {
            if which[j] {
                e += fac.power;
            }
        }
        let e = real_power(e).ok_or_else(|| LameError::InvalidInput("complex endpoint exponent".into()))?;
        if e <= -1.0 {
            return Err(LameError::PathThroughSingularity("non-integrable endpoint".into()));
        }
        Ok(e)
    }

    fn integrate<M: Fn(C64) -> C64>(&self, opts: &QuadOptions, map: M) -> Result<C64> {
        let ea = self.exponent(&self.start_sing)?;
        let eb = self.exponent(&self.end_sing)?;
        let order = |e: f64| -> i32 {
            if e == 0.0 {
                1
            } else if (2.0 * e).fract() == 0.0 {
                2
            } else {
                4
            }
        };
        let (qa, qb) = (order(ea), order(eb));
        let ua = 0.5f64.powf(1.0 / qa as f64);
        let ub = 0.5f64.powf(1.0 / qb as f64);
        let left = integrate(
            |u| {
                let s = u.powi(qa);
                let ln_s = qa as f64 * u.ln();
                let jac = qa as f64 * u.powi(qa - 1);
                map(self.value(s, ln_s, (-s).ln_1p())) * jac
            },
            0.0,
            ua,
            opts,
        );
        let right = integrate(
            |u| {
                let r = u.powi(qb);
                let s = 1.0 - r;
                let ln_1ms = qb as f64 * u.ln();
                let jac = qb as f64 * u.powi(qb - 1);
                map(self.value(s, (-r).ln_1p(), ln_1ms)) * jac
            },
            0.0,
            ub,
            opts,
        );
        if !(left.value.is_finite() && right.value.is_finite()) {
            return Err(LameError::PathThroughSingularity(fmt_c(self.start.z + self.d)));
        }
        Ok(left.value + right.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn continuation_around_a_branch_point_flips_sign() {
        let f = MultiPower::sqrt_ratio(&[c(0.0, 0.0)], &[], 1e-12);
        let bp = f.anchored_at(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let loop_path = [c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0)];
        let end = f.advance_path(&bp, &loop_path).unwrap();
        assert!((end.value(&f) - c(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn arcsine_integral_with_singular_ends() {
        // int_{-1}^{1} |1 - t^2|^{-1/2} dt = pi
        let f = MultiPower::sqrt_ratio(&[], &[c(-1.0, 0.0), c(1.0, 0.0)], 1e-12);
        let start = f.singular_start(c(-1.0, 0.0), c(1.0, 0.0));
        let l = f.integrate_abs_segment(&start, c(1.0, 0.0), &QuadOptions::default()).unwrap();
        assert!((l - PI).abs() < 1e-12);
    }

    #[test]
    fn segment_through_root_is_rejected() {
        let f = MultiPower::sqrt_ratio(&[c(0.0, 0.0)], &[], 1e-12);
        let bp = f.anchored_at(c(-1.0, 0.0), c(0.0, 1.0)).unwrap();
        assert!(matches!(
            f.integrate_segment(&bp, c(1.0, 0.0), &QuadOptions::default()),
            Err(LameError::PathThroughSingularity(_))
        ));
    }

    #[test]
    fn quarter_powers_integrate() {
        // int_0^1 t^{-1/4} dt = 4/3
        let f = MultiPower::new(vec![Factor { root: c(0.0, 0.0), power: c(-0.25, 0.0) }], 1e-12);
        let start = f.singular_start(c(0.0, 0.0), c(1.0, 0.0));
        let (v, _) = f.integrate_segment(&start, c(1.0, 0.0), &QuadOptions::default()).unwrap();
        assert!((v - c(4.0 / 3.0, 0.0)).norm() < 1e-13);
    }
}
