//! Dense complex polynomials in the monomial basis.
//!
//! Coefficients are stored in ascending degree order. The zero polynomial is
//! the empty coefficient vector, so `coeffs().last()` is nonzero whenever it
//! exists.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{LameError, Result};

/// Controls for [`Poly::roots_with`].
#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    /// Relative size of the last Aberth correction at which a root is accepted.
    pub tol: f64,
    pub max_iter: usize,
    /// Converged roots closer than `cluster_factor * tol` are merged into one
    /// repeated root.
    pub cluster_factor: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { tol: 1e-12, max_iter: 2000, cluster_factor: 10.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<C64>", into = "Vec<C64>")]
pub struct Poly {
    coeffs: Vec<C64>,
}

impl From<Vec<C64>> for Poly {
    fn from(coeffs: Vec<C64>) -> Self {
        Poly::new(coeffs)
    }
}

impl From<Poly> for Vec<C64> {
    fn from(p: Poly) -> Self {
        p.coeffs
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Poly::new(vec![c])
    }

    pub fn one() -> Self {
        Poly::constant(C64::new(1.0, 0.0))
    }

    /// `z - c`.
    pub fn linear(c: C64) -> Self {
        Poly::new(vec![-c, C64::new(1.0, 0.0)])
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    /// Coefficient of `z^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == C64::new(1.0, 0.0)
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let lead = self.leading();
        let mut coeffs: Vec<C64> = self.coeffs.iter().map(|c| c / lead).collect();
        *coeffs.last_mut().unwrap() = C64::new(1.0, 0.0);
        Poly { coeffs }
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `sum |c_k| r^k`, the natural scale for rounding errors of `eval` at `|z| = r`.
    pub fn eval_abs(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    /// Monic polynomial with exactly the given roots; the empty product is 1.
    pub fn from_roots(roots: &[C64]) -> Poly {
        let mut coeffs = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            coeffs.push(C64::new(0.0, 0.0));
            for k in (1..coeffs.len()).rev() {
                let lower = coeffs[k - 1];
                coeffs[k] = lower - r * coeffs[k];
            }
            coeffs[0] = -r * coeffs[0];
        }
        Poly::new(coeffs)
    }

    /// Euclidean division `self = q * d + r` with `deg r < deg d`.
    pub fn div_rem(&self, d: &Poly) -> Result<(Poly, Poly)> {
        if d.is_zero() {
            return Err(LameError::InvalidInput("division by the zero polynomial".into()));
        }
        if self.degree() < d.degree() || self.is_zero() {
            return Ok((Poly::zero(), self.clone()));
        }
        let dd = d.degree();
        let lead = d.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![C64::new(0.0, 0.0); self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[k + j] -= q * dc;
            }
            rem[k + dd] = C64::new(0.0, 0.0);
        }
        rem.truncate(dd);
        Ok((Poly::new(quot), Poly::new(rem)))
    }

    /// All roots with multiplicity, using [`RootOptions::default`].
    pub fn roots(&self, tol: f64) -> Result<Vec<C64>> {
        self.roots_with(&RootOptions { tol, ..RootOptions::default() })
    }

    /// Simultaneous (Aberth-Ehrlich) iteration for all roots.
    ///
    /// A root is accepted once its correction drops below `tol * (1 + |z|)`
    /// or its residual reaches the rounding floor of Horner evaluation.
    /// Roots closer than `cluster_factor * tol` are merged into their mean,
    /// which is what multiple roots converge to. The result is sorted by real
    /// then imaginary part.
    pub fn roots_with(&self, opts: &RootOptions) -> Result<Vec<C64>> {
        if self.is_zero() || self.degree() == 0 {
            return Err(LameError::DegreeError("roots need degree >= 1".into()));
        }
        if !(opts.tol > 0.0) {
            return Err(LameError::InvalidInput("root tolerance must be positive".into()));
        }
        let p = self.monic();
        let n = p.degree();
        if n == 1 {
            return Ok(vec![-p.coeffs[0]]);
        }
        let dp = p.derivative();
        let center = -p.coeffs[n - 1] / n as f64;
        let radius = {
            let r = p.eval(center).norm().powf(1.0 / n as f64);
            if r.is_finite() && r > 0.0 {
                r
            } else {
                1.0
            }
        };
        let mut z: Vec<C64> = (0..n)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n as f64 + 0.4;
                center + C64::from_polar(radius, th)
            })
            .collect();
        let mut done = vec![false; n];
        let floor = 16.0 * f64::EPSILON;
        let mut converged = false;
        for _ in 0..opts.max_iter {
            for k in 0..n {
                if done[k] {
                    continue;
                }
                let zk = z[k];
                let pk = p.eval(zk);
                if pk.norm() <= floor * p.eval_abs(zk.norm()) {
                    done[k] = true;
                    continue;
                }
                let w = pk / dp.eval(zk);
                let s: C64 = (0..n)
                    .filter(|&j| j != k)
                    .map(|j| C64::new(1.0, 0.0) / (zk - z[j]))
                    .sum();
                let corr = w / (C64::new(1.0, 0.0) - w * s);
                if corr.is_finite() {
                    z[k] = zk - corr;
                    if corr.norm() <= opts.tol * (1.0 + z[k].norm()) {
                        done[k] = true;
                    }
                } else {
                    // coincident iterates; nudge apart
                    z[k] = zk + C64::new(opts.tol.sqrt(), opts.tol.sqrt()) * (1.0 + zk.norm());
                }
            }
            if done.iter().all(|&d| d) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LameError::NonConvergence { what: "Aberth root iteration", iterations: opts.max_iter });
        }
        sort_complex(&mut z);
        Ok(cluster(z, opts.cluster_factor * opts.tol))
    }
}

/// Replaces groups of roots within `radius` of each other by their mean.
fn cluster(z: Vec<C64>, radius: f64) -> Vec<C64> {
    let n = z.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        l[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (z[i] - z[j]).norm() <= radius * (1.0 + z[i].norm()) {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut label, i)).collect();
    let mut out = z.clone();
    for i in 0..n {
        let members: Vec<usize> = (0..n).filter(|&j| roots[j] == roots[i]).collect();
        if members.len() > 1 {
            out[i] = members.iter().map(|&j| z[j]).sum::<C64>() / members.len() as f64;
        }
    }
    sort_complex(&mut out);
    out
}

/// Deterministic ordering: real part, then imaginary part.
pub fn sort_complex(z: &mut [C64]) {
    z.sort_by(|a, b| match a.re.total_cmp(&b.re) {
        Ordering::Equal => a.im.total_cmp(&b.im),
        o => o,
    });
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Poly::from_real(&[-1.0, 0.0, 1.0]).eval(c(0.0, 0.0)), c(-1.0, 0.0));
        assert_eq!(Poly::from_real(&[0.0, -1.0, 0.0, 1.0]).eval(c(2.0, 0.0)), c(6.0, 0.0));
        assert_eq!(Poly::from_real(&[1.0, 0.0, 1.0]).eval(c(0.0, 1.0)), c(0.0, 0.0));
    }

    #[test]
    fn derivative_examples() {
        let p = Poly::from_real(&[0.0, -1.0, 0.0, 1.0]);
        assert_eq!(p.derivative(), Poly::from_real(&[-1.0, 0.0, 3.0]));
        assert!(Poly::from_real(&[5.0]).derivative().is_zero());
        let q = Poly::from_real(&[1.0, 0.0, 1.0]).derivative().derivative();
        assert_eq!(q, Poly::from_real(&[2.0]));
    }

    #[test]
    fn roots_examples() {
        let r = Poly::from_real(&[1.0, 0.0, 1.0]).roots(1e-12).unwrap();
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-12 && (r[1] - c(0.0, 1.0)).norm() < 1e-12);
        let r = Poly::from_real(&[0.0, -1.0, 0.0, 1.0]).roots(1e-12).unwrap();
        for (got, want) in r.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - c(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn double_root_is_clustered() {
        // (z - 1/2)^2 (z + 1) = z^3 - 3/4 z + 1/4
        let p = Poly::from_real(&[0.25, -0.75, 0.0, 1.0]);
        let r = p.roots_with(&RootOptions { tol: 1e-7, ..Default::default() }).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-10);
        assert_eq!(r[1], r[2]);
        assert!((r[1] - c(0.5, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn from_roots_examples() {
        assert_eq!(Poly::from_roots(&[c(-1.0, 0.0), c(1.0, 0.0)]), Poly::from_real(&[-1.0, 0.0, 1.0]));
        assert_eq!(Poly::from_roots(&[]), Poly::one());
        assert_eq!(Poly::from_roots(&[c(0.0, 1.0), c(0.0, -1.0)]), Poly::from_real(&[1.0, 0.0, 1.0]));
    }

    #[test]
    fn roots_need_positive_degree() {
        assert!(matches!(Poly::from_real(&[3.0]).roots(1e-12), Err(LameError::DegreeError(_))));
    }

    #[test]
    fn division_reconstructs() {
        let a = Poly::from_real(&[1.0, 2.0, -3.0, 0.5, 4.0]);
        let d = Poly::from_real(&[-1.0, 1.0, 2.0]);
        let (q, r) = a.div_rem(&d).unwrap();
        assert!(r.degree() < d.degree());
        let back = &(&q * &d) + &r;
        for k in 0..5 {
            assert!((back.coeff(k) - a.coeff(k)).norm() < 1e-14);
        }
    }
}
