//! The generalized Lame operator `A y'' + B y' - n(n + alpha - 1) V y` and
//! its elementary derived quantities.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{fmt_c, LameError, Result};
use crate::poly::Poly;

/// Pole separation, relative to `diameter + max |a_k|`, below which an
/// instance is rejected.
pub const POLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LameOperator {
    pub a: Poly,
    pub b: Poly,
    pub poles: Vec<C64>,
    pub p: usize,
    pub alpha: C64,
    pub n: usize,
    pub lambda_n: C64,
    pub rho: Vec<C64>,
    pub rho_half: C64,
}

/// Pointwise data of the Liouville transformation `u = y exp(int B/2A)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvilleData {
    pub f_value: C64,
    pub g_value: C64,
    pub t_value: C64,
    pub u_factor: C64,
}

/// Number of Van Vleck polynomials, `binom(n + p - 1, n)`.
pub fn sigma(n: usize, p: usize) -> u64 {
    assert!(p >= 1, "sigma needs p >= 1");
    let k = n.min(p - 1) as u128;
    let top = (n + p - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (top - i) / (i + 1);
    }
    acc as u64
}

pub fn diameter(points: &[C64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

impl LameOperator {
    pub fn new(poles: &[C64], b: Poly, n: usize) -> Result<Self> {
        if poles.len() < 2 {
            return Err(LameError::DegreeError("need at least two poles (p >= 1)".into()));
        }
        if poles.iter().any(|z| !z.is_finite()) || b.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(LameError::InvalidInput("non-finite input".into()));
        }
        let p = poles.len() - 1;
        let max_abs = poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = POLE_TOL * (diameter(poles) + max_abs).max(f64::MIN_POSITIVE);
        for i in 0..poles.len() {
            for j in i + 1..poles.len() {
                if (poles[i] - poles[j]).norm() <= tol {
                    return Err(LameError::DegeneratePoles(i, j));
                }
            }
        }
        if !b.is_zero() && b.degree() > p {
            return Err(LameError::DegreeError(format!("deg B = {} exceeds p = {}", b.degree(), p)));
        }
        if n == 0 {
            return Err(LameError::DegreeError("n must be at least 1".into()));
        }
        let a = Poly::from_roots(poles);
        let alpha = b.coeff(p);
        let lambda_n = C64::new(n as f64, 0.0) + (alpha - 1.0) / 2.0;
        let mut op = LameOperator {
            a,
            b,
            poles: poles.to_vec(),
            p,
            alpha,
            n,
            lambda_n,
            rho: Vec::new(),
            rho_half: (alpha - 1.0) / 2.0,
        };
        op.rho = op.residues();
        Ok(op)
    }

    /// `rho_k = B(a_k) / A'(a_k)`, the residues of `B/A`.
    pub fn residues(&self) -> Vec<C64> {
        let da = self.a.derivative();
        self.poles.iter().map(|&ak| self.b.eval(ak) / da.eval(ak)).collect()
    }

    /// `n (n + alpha - 1)`.
    pub fn spectral_constant(&self) -> C64 {
        let n = self.n as f64;
        (self.alpha + n - 1.0) * n
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.poles)
    }

    pub fn centroid(&self) -> C64 {
        self.poles.iter().sum::<C64>() / self.poles.len() as f64
    }

    /// Same operator with a different degree `n`.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        LameOperator::new(&self.poles, self.b.clone(), n)
    }

    /// Whether all poles are real and all residues real and positive.
    pub fn is_stieltjes(&self) -> bool {
        self.poles.iter().all(|z| z.im == 0.0) && self.rho.iter().all(|r| r.im.abs() <= 1e-14 * r.norm() && r.re > 0.0)
    }

    /// The three polynomial summands `A Q''`, `B Q'`, `n(n+alpha-1) V Q`.
    fn summands(&self, v: &Poly, q: &Poly) -> (Poly, Poly, Poly) {
        let dq = q.derivative();
        let ddq = dq.derivative();
        (&self.a * &ddq, &self.b * &dq, (v * q).scale(self.spectral_constant()))
    }

    /// Relative coefficient residual of the ODE for the pair `(V, Q)`.
    pub fn ode_residual(&self, v: &Poly, q: &Poly) -> Result<f64> {
        if v.is_zero() || v.degree() != self.p - 1 {
            return Err(LameError::DegreeError(format!("deg V = {} but p - 1 = {}", v.degree(), self.p - 1)));
        }
        if q.is_zero() || q.degree() != self.n {
            return Err(LameError::DegreeError(format!("deg Q = {} but n = {}", q.degree(), self.n)));
        }
        let (s1, s2, s3) = self.summands(v, q);
        let r = &(&s1 + &s2) - &s3;
        let scale = s1.max_abs_coeff().max(s2.max_abs_coeff()).max(s3.max_abs_coeff());
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok(r.max_abs_coeff() / scale)
    }

    /// `F_n`, `G_n`, `T_n` and the gauge factor `exp(int B/2A)` at `z`; the
    /// gauge uses principal logarithms of `z - a_k`.
    pub fn liouville_terms(&self, v: &Poly, z: C64) -> Result<LiouvilleData> {
        let scale = 1.0 + self.diameter();
        let near_pole = self.poles.iter().any(|&a| (z - a).norm() <= POLE_TOL * scale);
        let (vz, dvz) = v.eval_with_derivative(z);
        if near_pole || vz.norm() <= POLE_TOL * v.eval_abs(z.norm()) {
            return Err(LameError::SingularPoint(fmt_c(z)));
        }
        let da = self.a.derivative();
        let dda = da.derivative();
        let ddv = v.derivative().derivative().eval(z);
        let az = self.a.eval(z);
        let daz = da.eval(z);
        let bz = self.b.eval(z);
        let dbz = self.b.derivative().eval(z);
        let b2a = bz / (2.0 * az);
        let db2a = (dbz * az - bz * daz) / (2.0 * az * az);
        let t = 0.25 * (daz / az - dvz / vz);
        let dt = 0.25 * ((dda.eval(z) * az - daz * daz) / (az * az) - (ddv * vz - dvz * dvz) / (vz * vz));
        let lam = self.lambda_n;
        let rho = self.rho_half;
        let f_value = (lam * lam - rho * rho) * vz / az + b2a * b2a + db2a;
        let g_value = az / vz * (b2a * b2a + db2a - t * t - dt) - rho * rho;
        let log_u: C64 = self.poles.iter().zip(&self.rho).map(|(&a, r)| r * 0.5 * (z - a).ln()).sum();
        Ok(LiouvilleData { f_value, g_value, t_value: t, u_factor: log_u.exp() })
    }
}
