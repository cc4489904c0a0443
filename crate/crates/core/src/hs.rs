//! Heine-Stieltjes pairs `(V, Q)`: the matrix pencil for `p = 2`, Newton
//! for general `p`, and the electrostatic and occupancy diagnostics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::homotopy;
use crate::error::{fmt_c, LameError, Result};
use crate::lame::{sigma, LameOperator};
use crate::poly::{sort_complex, Poly};

const ROOT_TOL: f64 = 1e-12;
/// Relative distance to a pole (or another zero) below which zeros are
/// considered to collide.
const ZERO_SEPARATION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSPair {
    pub v: Poly,
    pub q: Poly,
    pub vv_zeros: Vec<C64>,
    pub q_zeros: Vec<C64>,
    pub ode_res: f64,
    pub electro_res: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub pairs: Vec<HSPair>,
    pub expected_count: u64,
    pub found_count: usize,
    pub degenerate_flags: Vec<bool>,
}

/// Zero counts of `Q` in the open intervals between consecutive real poles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub counts: Vec<usize>,
    pub all_real_interior: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct MultiStartOptions {
    pub seeds: usize,
    pub rng_seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MultiStartOptions {
    fn default() -> Self {
        MultiStartOptions { seeds: 400, rng_seed: 0, tol: 1e-10, max_iter: 60 }
    }
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn spectral_constant_checked(op: &LameOperator) -> Result<C64> {
    let lam = op.spectral_constant();
    if lam.norm() <= 1e-12 * (op.n * op.n) as f64 {
        return Err(LameError::DegenerateInstance("n(n + alpha - 1) vanishes".into()));
    }
    Ok(lam)
}

/// `max_k |sum_{j != k} 2/(z_k - z_j) + B(z_k)/A(z_k)|`.
pub fn electro_residual(op: &LameOperator, q_zeros: &[C64]) -> Result<f64> {
    let scale = 1.0 + op.diameter() + q_zeros.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..q_zeros.len() {
        for j in i + 1..q_zeros.len() {
            if (q_zeros[i] - q_zeros[j]).norm() <= ZERO_SEPARATION * scale {
                return Err(LameError::CoincidentZeros(i, j));
            }
        }
        if let Some(a) = op.poles.iter().find(|&&a| (q_zeros[i] - a).norm() <= ZERO_SEPARATION * scale) {
            return Err(LameError::SingularPoint(fmt_c(*a)));
        }
    }
    Ok(electro_field(op, q_zeros).iter().map(|f| f.norm()).fold(0.0, f64::max))
}

fn electro_field(op: &LameOperator, z: &[C64]) -> Vec<C64> {
    (0..z.len())
        .map(|k| {
            let s: C64 = (0..z.len()).filter(|&j| j != k).map(|j| 2.0 / (z[k] - z[j])).sum();
            s + op.b.eval(z[k]) / op.a.eval(z[k])
        })
        .collect()
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Damped Newton on the equilibrium equations of the zeros of `Q`. Simple
/// zeros off the poles satisfy them exactly when `Q` solves the ODE for some
/// `V`, for every `p`.
pub fn polish_zeros(op: &LameOperator, zeros: &[C64], max_iter: usize) -> Result<Vec<C64>> {
    let n = zeros.len();
    let mut z = zeros.to_vec();
    let mut f = electro_field(op, &z);
    let mut fnorm = max_norm(&f);
    if !fnorm.is_finite() {
        return Err(LameError::SingularJacobian("zero-space Newton"));
    }
    let da = op.a.derivative();
    let db = op.b.derivative();
    for _ in 0..max_iter {
        let jac = DMatrix::from_fn(n, n, |k, j| {
            if k == j {
                let s: C64 = (0..n).filter(|&i| i != k).map(|i| -2.0 / ((z[k] - z[i]) * (z[k] - z[i]))).sum();
                let (a, b) = (op.a.eval(z[k]), op.b.eval(z[k]));
                s + (db.eval(z[k]) * a - b * da.eval(z[k])) / (a * a)
            } else {
                2.0 / ((z[k] - z[j]) * (z[k] - z[j]))
            }
        });
        let rhs = DVector::from_iterator(n, f.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(LameError::SingularJacobian("zero-space Newton"))?;
        let step_norm = step.iter().map(|s| s.norm()).fold(0.0, f64::max);
        let scale = 1.0 + max_norm(&z);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<C64> = z.iter().zip(step.iter()).map(|(a, s)| a + s * t).collect();
            let ft = electro_field(op, &trial);
            let fn_t = max_norm(&ft);
            if fn_t.is_finite() && fn_t < fnorm {
                z = trial;
                f = ft;
                fnorm = fn_t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || step_norm <= 1e-15 * scale {
            break;
        }
    }
    sort_complex(&mut z);
    Ok(z)
}

/// Builds the certified pair from the zeros of `Q`: `V` is the quotient of
/// `A Q'' + B Q'` by `n(n + alpha - 1) Q`.
pub fn pair_from_zeros(op: &LameOperator, zeros: &[C64]) -> Result<HSPair> {
    if zeros.len() != op.n {
        return Err(LameError::DegreeError(format!("{} zeros for n = {}", zeros.len(), op.n)));
    }
    let lam = spectral_constant_checked(op)?;
    let q = Poly::from_roots(zeros);
    let dq = q.derivative();
    let num = &(&op.a * &dq.derivative()) + &(&op.b * &dq);
    let (quot, _) = num.div_rem(&q)?;
    let v = quot.scale(one() / lam).monic();
    if v.degree() != op.p - 1 {
        return Err(LameError::DegreeError(format!("recovered V has degree {}", v.degree())));
    }
    let vv_zeros = if op.p >= 2 { v.roots(ROOT_TOL)? } else { Vec::new() };
    let ode_res = op.ode_residual(&v, &q)?;
    let electro_res = electro_residual(op, zeros)?;
    let mut q_zeros = zeros.to_vec();
    sort_complex(&mut q_zeros);
    Ok(HSPair { v, q, vv_zeros, q_zeros, ode_res, electro_res })
}

fn finish_from_q(op: &LameOperator, q: &Poly) -> Result<HSPair> {
    let zeros = q.roots(ROOT_TOL)?;
    let zeros = polish_zeros(op, &zeros, 50)?;
    pair_from_zeros(op, &zeros)
}

/// `p = 1`: `V = 1` and `Q` follows from a triangular system.
pub fn solve_p1(op: &LameOperator) -> Result<HSPair> {
    if op.p != 1 {
        return Err(LameError::DegreeError(format!("solve_p1 needs p = 1, got {}", op.p)));
    }
    let lam = spectral_constant_checked(op)?;
    let n = op.n;
    let mut c = vec![zero(); n + 1];
    c[n] = one();
    // the image of z^j has degree j, with diagonal coefficient j(j-1) + j alpha - lam
    for i in (0..n).rev() {
        let mut s = zero();
        for (j, cj) in c.iter().enumerate().skip(i + 1) {
            s += image_coeff(op, j, i, lam, 0) * cj;
        }
        let d = image_coeff(op, i, i, lam, 0);
        if d.norm() <= 1e-14 * lam.norm() {
            return Err(LameError::DegenerateInstance(format!("resonant degree {i}")));
        }
        c[i] = -s / d;
    }
    match finish_from_q(op, &Poly::new(c)) {
        Ok(pair) if certified(op, &pair, 1e-10) => Ok(pair),
        _ => continued_pairs(op, 0)?
            .into_iter()
            .next()
            .ok_or(LameError::NonConvergence { what: "p = 1 continuation", iterations: 1 }),
    }
}

/// Coefficient of `z^i` in `j(j-1) A z^{j-2} + j B z^{j-1} - lam z^{j+d}`,
/// where `d = 1` for the pencil and `d = 0` for `p = 1`.
fn image_coeff(op: &LameOperator, j: usize, i: usize, lam: C64, d: usize) -> C64 {
    let jf = j as f64;
    let mut s = zero();
    if j >= 2 && i + 2 >= j {
        s += op.a.coeff(i + 2 - j) * (jf * (jf - 1.0));
    }
    if j >= 1 && i + 1 >= j {
        s += op.b.coeff(i + 1 - j) * jf;
    }
    if i == j + d {
        s -= lam;
    }
    s
}

/// The standard eigenproblem `M c = v c` equivalent to the `p = 2` pencil:
/// `M = -L / lam` with `L[z^j] = j(j-1) A z^{j-2} + j B z^{j-1} - lam z^{j+1}`.
/// `M` is upper Hessenberg.
pub fn pencil_matrix(op: &LameOperator) -> Result<DMatrix<C64>> {
    if op.p != 2 {
        return Err(LameError::DegreeError(format!("pencil needs p = 2, got {}", op.p)));
    }
    let lam = spectral_constant_checked(op)?;
    let n = op.n;
    Ok(DMatrix::from_fn(n + 1, n + 1, |i, j| -image_coeff(op, j, i, lam, 1) / lam))
}

/// Diagonal similarity `D^{-1} M D` with power-of-two entries equalizing row
/// and column norms; returns the scaled matrix and `D`.
fn balance(mut m: DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>) {
    let n = m.nrows();
    let mut d = vec![1.0; n];
    let l1 = |z: &C64| z.re.abs() + z.im.abs();
    for _ in 0..100 {
        let mut done = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| l1(&m[(j, i)])).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| l1(&m[(i, j)])).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let (mut cc, mut rr, mut f) = (c, r, 1.0);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if cc + rr < 0.95 * (c + r) {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    m[(j, i)] *= f;
                    m[(i, j)] /= f;
                }
            }
        }
        if done {
            break;
        }
    }
    (m, d)
}

/// Eigenvalues of an upper Hessenberg matrix by the shifted complex QR
/// iteration (Wilkinson shifts, Givens rotations, deflation from the bottom).
fn hessenberg_eigenvalues(mut h: DMatrix<C64>) -> Result<Vec<C64>> {
    let n = h.nrows();
    let mut eig = vec![zero(); n];
    if n == 0 {
        return Ok(eig);
    }
    let mut hi = n - 1;
    let mut its = 0;
    let mut total = 0;
    let max_total = 100 * n.max(10);
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let off = h[(l, l - 1)].norm();
            if off <= f64::EPSILON * (h[(l - 1, l - 1)].norm() + h[(l, l)].norm()) || off < f64::MIN_POSITIVE {
                h[(l, l - 1)] = zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > max_total {
            return Err(LameError::NonConvergence { what: "Hessenberg QR iteration", iterations: total });
        }
        let (a, b, c, d) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
        let mu = if its % 11 == 0 {
            d + C64::new(0.75, 0.43) * c.norm()
        } else {
            let half = (a + d) / 2.0;
            let disc = (half * half - (a * d - b * c)).sqrt();
            let (m1, m2) = (half + disc, half - disc);
            if (m1 - d).norm() < (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };
        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (x, y) = (h[(k, k)], h[(k + 1, k)]);
            let r = x.norm().hypot(y.norm());
            let (cs, sn) = if r == 0.0 {
                (1.0, zero())
            } else if x.norm() == 0.0 {
                (0.0, y.conj() / r)
            } else {
                (x.norm() / r, (x / x.norm()) * y.conj() / r)
            };
            for j in k..=hi {
                let (u, w) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = u * cs + sn * w;
                h[(k + 1, j)] = -sn.conj() * u + w * cs;
            }
            rots.push((cs, sn));
        }
        for (idx, &(cs, sn)) in rots.iter().enumerate() {
            let k = l + idx;
            for i in l..=(k + 1).min(hi) {
                let (u, w) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = u * cs + w * sn.conj();
                h[(i, k + 1)] = -u * sn + w * cs;
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    eig[0] = h[(0, 0)];
    Ok(eig)
}

/// Eigenvalues of the `p = 2` pencil, sorted.
pub fn pencil_eigenvalues(op: &LameOperator) -> Result<Vec<C64>> {
    let (bal, _) = balance(pencil_matrix(op)?);
    let mut v = hessenberg_eigenvalues(bal)?;
    sort_complex(&mut v);
    Ok(v)
}

/// Eigenvector of `m` for the approximate eigenvalue `v`.
fn inverse_iteration(m: &DMatrix<C64>, v: C64) -> Result<DVector<C64>> {
    let n = m.nrows();
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let shift = v + C64::new(1e-13, 1e-13) * scale;
    let lu = (m - DMatrix::from_diagonal_element(n, n, shift)).lu();
    let mut x = DVector::from_element(n, one());
    for _ in 0..3 {
        let y = match lu.solve(&x) {
            Some(y) if y.iter().all(|c| c.is_finite()) => y,
            _ => return Err(LameError::SingularJacobian("inverse iteration")),
        };
        let nrm = y.iter().map(|c| c.norm()).fold(0.0, f64::max);
        x = y / C64::new(nrm, 0.0);
    }
    Ok(x)
}

/// Pair for the eigenvalue `v` via the pencil eigenvector, if it certifies.
fn pair_from_eigenvector(op: &LameOperator, bal: &DMatrix<C64>, d: &[f64], v: C64, tol: f64) -> Option<HSPair> {
    let x = inverse_iteration(bal, v).ok()?;
    let q = Poly::new(x.iter().zip(d).map(|(c, s)| c * s).collect());
    if q.degree() != op.n {
        return None;
    }
    let pair = finish_from_q(op, &q.monic()).ok()?;
    certified(op, &pair, tol).then_some(pair)
}

/// Both residual certificates, plus all zeros within a generous disk around
/// the poles (configurations escaping to infinity have vanishing relative
/// residuals without being solutions).
fn certified(op: &LameOperator, pair: &HSPair, tol: f64) -> bool {
    let c = op.centroid();
    let far = 1e3 * (1.0 + op.diameter());
    pair.ode_res <= tol
        && pair.electro_res <= ELECTRO_TOL
        && pair.q_zeros.iter().chain(&pair.vv_zeros).all(|z| (z - c).norm() <= far)
}

/// Certificate threshold on the electrostatic residual.
pub const ELECTRO_TOL: f64 = 1e-7;

/// All `n + 1` pairs for `p = 2`. The pencil eigenvectors supply `Q` where
/// they certify; for larger `n` the monomial coefficients no longer determine
/// the zeros, and the missing pairs come from zero-space continuation. The
/// certified Van Vleck values are exact to working precision, unlike the
/// pencil eigenvalues, whose error grows with `n`.
pub fn solve_all_p2(op: &LameOperator, tol: f64) -> Result<SolveReport> {
    let (bal, d) = balance(pencil_matrix(op)?);
    let eig = pencil_eigenvalues(op)?;
    let direct: Vec<HSPair> = eig.par_iter().filter_map(|&v| pair_from_eigenvector(op, &bal, &d, v, tol)).collect();
    let mut pairs = dedup(direct, op.diameter());
    if pairs.len() < eig.len() {
        pairs.extend(continued_pairs(op, 0)?.into_iter().filter(|p| certified(op, p, tol)));
        pairs = dedup(pairs, op.diameter());
    }
    if pairs.len() < eig.len() {
        return Err(LameError::NonConvergence { what: "pencil pair recovery", iterations: 1 });
    }
    sort_pairs(&mut pairs);
    let degenerate_flags = duplicate_flags(&pairs, op.diameter());
    Ok(SolveReport { expected_count: sigma(op.n, op.p), found_count: pairs.len(), pairs, degenerate_flags })
}

/// Certified, deduplicated pairs reached by continuation from the real
/// start system.
pub fn continued_pairs(op: &LameOperator, rng_seed: u64) -> Result<Vec<HSPair>> {
    let sets = homotopy::continue_all(op, rng_seed)?;
    let pairs: Vec<HSPair> = sets
        .par_iter()
        .filter_map(|z| {
            let z = polish_zeros(op, z, 20).ok()?;
            pair_from_zeros(op, &z).ok()
        })
        .collect();
    let mut pairs = dedup(pairs, op.diameter());
    sort_pairs(&mut pairs);
    Ok(pairs)
}

/// Newton on the coefficient-matching system in the non-leading coefficients
/// of `V` and `Q`; returns the converged `(V, Q)` and the iteration count.
pub fn newton_coefficients(
    op: &LameOperator,
    v_seed: &Poly,
    q_seed: &Poly,
    tol: f64,
    max_iter: usize,
) -> Result<(Poly, Poly, usize)> {
    let (n, p) = (op.n, op.p);
    if v_seed.degree() != p - 1 || !v_seed.is_monic() || (p == 1 && v_seed.is_zero()) {
        return Err(LameError::DegreeError(format!("V seed must be monic of degree {}", p - 1)));
    }
    if q_seed.degree() != n || !q_seed.is_monic() {
        return Err(LameError::DegreeError(format!("Q seed must be monic of degree {n}")));
    }
    let lam = spectral_constant_checked(op)?;
    let m = n + p - 1;
    let mut qc: Vec<C64> = q_seed.coeffs().to_vec();
    let mut vc: Vec<C64> = v_seed.coeffs().to_vec();
    let mut last_step = f64::INFINITY;
    for it in 0..=max_iter {
        let (v, q) = (Poly::new(vc.clone()), Poly::new(qc.clone()));
        if op.ode_residual(&v, &q)? <= tol {
            return Ok((v, q, it));
        }
        if it == max_iter {
            break;
        }
        let dq = q.derivative();
        let res = &(&(&op.a * &dq.derivative()) + &(&op.b * &dq)) - &(&v * &q).scale(lam);
        let mut jac = DMatrix::from_element(m, m, zero());
        for j in 0..n {
            let jf = j as f64;
            let mut col = (&v * &monomial(j)).scale(-lam);
            if j >= 1 {
                col = &col + &(&op.b * &monomial(j - 1)).scale(C64::new(jf, 0.0));
            }
            if j >= 2 {
                col = &col + &(&op.a * &monomial(j - 2)).scale(C64::new(jf * (jf - 1.0), 0.0));
            }
            for i in 0..m {
                jac[(i, j)] = col.coeff(i);
            }
        }
        for k in 0..p - 1 {
            let col = (&q * &monomial(k)).scale(-lam);
            for i in 0..m {
                jac[(i, n + k)] = col.coeff(i);
            }
        }
        let rhs = DVector::from_iterator(m, (0..m).map(|i| -res.coeff(i)));
        let step = jac.lu().solve(&rhs).ok_or(LameError::SingularJacobian("coefficient Newton"))?;
        if step.iter().any(|s| !s.is_finite()) {
            return Err(LameError::SingularJacobian("coefficient Newton"));
        }
        let step_norm = step.iter().map(|s| s.norm()).fold(0.0, f64::max);
        for j in 0..n {
            qc[j] += step[j];
        }
        for k in 0..p - 1 {
            vc[k] += step[n + k];
        }
        // after the initial phase, a growing update means no local convergence
        if it >= 8 && step_norm > last_step {
            break;
        }
        last_step = step_norm;
    }
    Err(LameError::NonConvergence { what: "coefficient Newton", iterations: max_iter })
}

fn monomial(k: usize) -> Poly {
    let mut c = vec![zero(); k + 1];
    c[k] = one();
    Poly::new(c)
}

/// Newton from seeds `(V, Q)`, followed by the zero-space polish.
pub fn solve_newton(op: &LameOperator, v_seed: &Poly, q_seed: &Poly, tol: f64, max_iter: usize) -> Result<HSPair> {
    let (v, q, _) = newton_coefficients(op, v_seed, q_seed, tol, max_iter)?;
    let pair = finish_from_q(op, &q)?;
    if pair.ode_res <= tol && pair.electro_res.is_finite() {
        Ok(pair)
    } else {
        // keep the unpolished solution if the polish did not improve on it
        let q_zeros = q.roots(ROOT_TOL)?;
        let vv_zeros = if op.p >= 2 { v.roots(ROOT_TOL)? } else { Vec::new() };
        let ode_res = op.ode_residual(&v, &q)?;
        let electro_res = electro_residual(op, &q_zeros)?;
        Ok(HSPair { v, q, vv_zeros, q_zeros, ode_res, electro_res })
    }
}

fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one_sided = |x: &[C64], y: &[C64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    one_sided(a, b).max(one_sided(b, a))
}

/// Distance used to identify pairs: max of the Hausdorff distances of the
/// Van Vleck zeros and of the Heine-Stieltjes zeros.
pub fn pair_distance(x: &HSPair, y: &HSPair) -> f64 {
    hausdorff(&x.vv_zeros, &y.vv_zeros).max(hausdorff(&x.q_zeros, &y.q_zeros))
}

fn duplicate_flags(pairs: &[HSPair], diam: f64) -> Vec<bool> {
    let mut flags = vec![false; pairs.len()];
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            if hausdorff(&pairs[i].vv_zeros, &pairs[j].vv_zeros) <= 1e-7 * diam {
                flags[i] = true;
                flags[j] = true;
            }
        }
    }
    flags
}

/// Removes pairs within `1e-7 * diam` of an earlier one.
pub fn dedup(pairs: Vec<HSPair>, diam: f64) -> Vec<HSPair> {
    let mut out: Vec<HSPair> = Vec::new();
    for p in pairs {
        if !out.iter().any(|q| pair_distance(q, &p) <= 1e-7 * diam) {
            out.push(p);
        }
    }
    out
}

fn cmp_zeros(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

fn sort_pairs(pairs: &mut [HSPair]) {
    pairs.sort_by(|a, b| cmp_zeros(&a.vv_zeros, &b.vv_zeros).then(cmp_zeros(&a.q_zeros, &b.q_zeros)));
}

/// Best-effort enumeration for any `p` by Newton from random seeds in a box
/// around the poles; deterministic for a given `rng_seed`.
pub fn solve_multistart(op: &LameOperator, opts: &MultiStartOptions) -> Result<SolveReport> {
    let c = op.centroid();
    let r = 0.75 * op.diameter();
    let found: Vec<HSPair> = (0..opts.seeds)
        .into_par_iter()
        .filter_map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(s as u64));
            let mut draw = |k: usize| -> Vec<C64> {
                (0..k).map(|_| c + C64::new(rng.gen_range(-r..r), rng.gen_range(-r..r))).collect()
            };
            let vz = draw(op.p - 1);
            let qz = draw(op.n);
            // alternate between the two formulations for more diverse basins
            if s % 2 == 0 {
                solve_newton(op, &Poly::from_roots(&vz), &Poly::from_roots(&qz), opts.tol, opts.max_iter).ok()
            } else {
                let z = polish_zeros(op, &qz, opts.max_iter).ok()?;
                pair_from_zeros(op, &z).ok()
            }
        })
        .filter(|p| certified(op, p, opts.tol))
        .collect();
    let mut pairs = dedup(found, op.diameter());
    sort_pairs(&mut pairs);
    let flags = vec![false; pairs.len()];
    Ok(SolveReport { expected_count: sigma(op.n, op.p), found_count: pairs.len(), pairs, degenerate_flags: flags })
}

/// Dispatches on `p`: triangular solve, pencil, or continuation completed
/// by multi-start.
pub fn solve_all(op: &LameOperator, tol: f64, ms: &MultiStartOptions) -> Result<SolveReport> {
    match op.p {
        1 => {
            let pair = solve_p1(op)?;
            Ok(SolveReport { expected_count: 1, found_count: 1, pairs: vec![pair], degenerate_flags: vec![false] })
        }
        2 => solve_all_p2(op, tol),
        _ => {
            let mut pairs = continued_pairs(op, ms.rng_seed)?;
            pairs.retain(|p| certified(op, p, tol));
            if (pairs.len() as u64) < sigma(op.n, op.p) {
                pairs.extend(solve_multistart(op, &MultiStartOptions { tol, ..*ms })?.pairs);
                pairs = dedup(pairs, op.diameter());
            }
            sort_pairs(&mut pairs);
            let flags = vec![false; pairs.len()];
            Ok(SolveReport { expected_count: sigma(op.n, op.p), found_count: pairs.len(), pairs, degenerate_flags: flags })
        }
    }
}

/// Counts zeros per open interval between consecutive real poles.
pub fn classify_occupancy(op: &LameOperator, q_zeros: &[C64], vv_zeros: &[C64]) -> Result<Occupancy> {
    if !op.is_stieltjes() {
        return Err(LameError::NotStieltjesCase("poles must be real and residues real positive".into()));
    }
    let mut poles: Vec<f64> = op.poles.iter().map(|z| z.re).collect();
    poles.sort_by(f64::total_cmp);
    let tol = 1e-8 * (1.0 + op.diameter());
    let mut counts = vec![0; poles.len() - 1];
    let mut ok = true;
    for z in q_zeros {
        if z.im.abs() > tol {
            ok = false;
            continue;
        }
        match poles.windows(2).position(|w| z.re > w[0] + tol && z.re < w[1] - tol) {
            Some(k) => counts[k] += 1,
            None => ok = false,
        }
    }
    let (lo, hi) = (poles[0], poles[poles.len() - 1]);
    if vv_zeros.iter().any(|v| v.im.abs() > tol || v.re < lo - tol || v.re > hi + tol) {
        ok = false;
    }
    Ok(Occupancy { counts, all_real_interior: ok })
}

/// Pairs seeded from predicted Van Vleck zeros (`p = 2`): each prediction
/// is sharpened by the pencil's inverse iteration and then by Newton.
pub fn solve_from_predictions(op: &LameOperator, predictions: &[C64], tol: f64) -> Result<Vec<HSPair>> {
    let (bal, d) = balance(pencil_matrix(op)?);
    let pairs: Vec<HSPair> = predictions
        .par_iter()
        .filter_map(|&v| {
            let x = inverse_iteration(&bal, v).ok()?;
            let q = Poly::new(x.iter().zip(&d).map(|(c, s)| c * s).collect());
            if q.degree() != op.n {
                return None;
            }
            solve_newton(op, &Poly::linear(v), &q.monic(), tol, 40).ok()
        })
        .filter(|p| certified(op, p, tol))
        .collect();
    let mut pairs = dedup(pairs, op.diameter());
    sort_pairs(&mut pairs);
    Ok(pairs)
}
