//! Zero-space continuation of electrostatic equilibria.
//!
//! With `B/A = sum_m rho_m / (z - a_m)`, the zeros of `Q` solve
//! `sum_{j != k} 2/(z_k - z_j) + sum_m rho_m/(z_k - a_m) = 0`. On a real
//! configuration with positive residues each way of distributing the zeros
//! over the gaps between poles has exactly one solution; continuing those
//! along a generic complex path of poles and residues reaches every solution
//! of the target.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{LameError, Result};
use crate::lame::LameOperator;

/// Poles and residues of the rational field `B/A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Charges {
    pub poles: Vec<C64>,
    pub residues: Vec<C64>,
}

impl Charges {
    pub fn of(op: &LameOperator) -> Charges {
        Charges { poles: op.poles.clone(), residues: op.rho.clone() }
    }

    pub fn field(&self, z: &[C64]) -> Vec<C64> {
        (0..z.len())
            .map(|k| {
                let s: C64 = (0..z.len()).filter(|&j| j != k).map(|j| 2.0 / (z[k] - z[j])).sum();
                s + self.poles.iter().zip(&self.residues).map(|(a, r)| r / (z[k] - a)).sum::<C64>()
            })
            .collect()
    }

    fn jacobian(&self, z: &[C64]) -> DMatrix<C64> {
        let n = z.len();
        DMatrix::from_fn(n, n, |k, j| {
            if k == j {
                let s: C64 = (0..n).filter(|&i| i != k).map(|i| -2.0 / ((z[k] - z[i]) * (z[k] - z[i]))).sum();
                s - self.poles.iter().zip(&self.residues).map(|(a, r)| r / ((z[k] - a) * (z[k] - a))).sum::<C64>()
            } else {
                2.0 / ((z[k] - z[j]) * (z[k] - z[j]))
            }
        })
    }

    /// Distance from each zero to its nearest other zero or pole.
    fn clearance(&self, z: &[C64]) -> Vec<f64> {
        (0..z.len())
            .map(|k| {
                let d = (0..z.len()).filter(|&j| j != k).map(|j| (z[k] - z[j]).norm()).fold(f64::INFINITY, f64::min);
                self.poles.iter().map(|a| (z[k] - a).norm()).fold(d, f64::min)
            })
            .collect()
    }
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Newton with every step shortened so that no zero moves by more than
/// `frac` of its clearance; returns `None` without convergence.
fn guarded_newton(ch: &Charges, z0: &[C64], frac: f64, max_iter: usize) -> Option<Vec<C64>> {
    let mut z = z0.to_vec();
    let scale = 1.0 + max_norm(&ch.poles);
    for _ in 0..max_iter {
        let f = ch.field(&z);
        let rhs = DVector::from_iterator(z.len(), f.iter().map(|x| -x));
        let step = ch.jacobian(&z).lu().solve(&rhs)?;
        let clear = ch.clearance(&z);
        let mut t: f64 = 1.0;
        for (s, c) in step.iter().zip(&clear) {
            if s.norm() > frac * c {
                t = t.min(frac * c / s.norm());
            }
        }
        let mut moved: f64 = 0.0;
        for (zk, s) in z.iter_mut().zip(step.iter()) {
            *zk += s * t;
            moved = moved.max((s * t).norm());
        }
        if !moved.is_finite() {
            return None;
        }
        if t == 1.0 && moved <= 1e-13 * scale {
            return Some(z);
        }
    }
    None
}

/// The equilibrium on real poles (sorted ascending) with positive residues
/// and `counts[i]` zeros in the `i`-th gap.
pub fn stieltjes_equilibrium(poles: &[f64], residues: &[f64], counts: &[usize]) -> Result<Vec<C64>> {
    if counts.len() + 1 != poles.len() || residues.len() != poles.len() {
        return Err(LameError::InvalidInput("counts must have one entry per gap".into()));
    }
    let mut z = Vec::new();
    for (i, &m) in counts.iter().enumerate() {
        let (lo, hi) = (poles[i], poles[i + 1]);
        for j in 0..m {
            let x = 0.5 * (1.0 - (PI * (j as f64 + 0.5) / m as f64).cos());
            z.push(C64::new(lo + (hi - lo) * x, 0.0));
        }
    }
    let ch = Charges {
        poles: poles.iter().map(|&x| C64::new(x, 0.0)).collect(),
        residues: residues.iter().map(|&r| C64::new(r, 0.0)).collect(),
    };
    guarded_newton(&ch, &z, 0.45, 200).ok_or(LameError::NonConvergence { what: "Stieltjes equilibrium", iterations: 200 })
}

/// All ways of writing `n` as an ordered sum of `parts` nonnegative integers.
pub fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// A path `t -> charges(t)`, linear from `start` to `end` plus a random
/// complex bulge `t (1 - t) gamma` that keeps it generic.
#[derive(Clone, Debug)]
pub struct ChargePath {
    pub start: Charges,
    pub end: Charges,
    pub bulge: Charges,
}

impl ChargePath {
    fn at(&self, t: f64) -> (Charges, Charges) {
        let w = t * (1.0 - t);
        let dw = 1.0 - 2.0 * t;
        let mix = |a: &[C64], b: &[C64], g: &[C64]| -> (Vec<C64>, Vec<C64>) {
            let val = a.iter().zip(b).zip(g).map(|((a, b), g)| a * (1.0 - t) + b * t + g * w).collect();
            let der = a.iter().zip(b).zip(g).map(|((a, b), g)| b - a + g * dw).collect();
            (val, der)
        };
        let (p, dp) = mix(&self.start.poles, &self.end.poles, &self.bulge.poles);
        let (r, dr) = mix(&self.start.residues, &self.end.residues, &self.bulge.residues);
        (Charges { poles: p, residues: r }, Charges { poles: dp, residues: dr })
    }
}

/// Tangent `dz/dt` of the solution curve.
fn tangent(ch: &Charges, dch: &Charges, z: &[C64]) -> Option<DVector<C64>> {
    let ft = DVector::from_iterator(
        z.len(),
        z.iter().map(|&zk| {
            ch.poles
                .iter()
                .zip(&ch.residues)
                .zip(dch.poles.iter().zip(&dch.residues))
                .map(|((a, r), (da, dr))| dr / (zk - a) + r * da / ((zk - a) * (zk - a)))
                .sum::<C64>()
        }),
    );
    ch.jacobian(z).lu().solve(&(-ft))
}

/// Plain Newton corrector for path tracking: fails instead of damping when
/// a zero would move by more than half its clearance, and stops once every
/// update is below `rel` of the respective clearance.
fn correct(ch: &Charges, z0: &[C64], rel: f64, max_iter: usize) -> Option<Vec<C64>> {
    let mut z = z0.to_vec();
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let f = ch.field(&z);
        let rhs = DVector::from_iterator(z.len(), f.iter().map(|x| -x));
        let step = ch.jacobian(&z).lu().solve(&rhs)?;
        let clear = ch.clearance(&z);
        let ratio = step.iter().zip(&clear).map(|(s, c)| s.norm() / c).fold(0.0, f64::max);
        if !(ratio < 0.5) || ratio > 0.5 * last {
            return None;
        }
        for (zk, s) in z.iter_mut().zip(step.iter()) {
            *zk += s;
        }
        if ratio <= rel {
            return Some(z);
        }
        last = ratio;
    }
    None
}

/// Largest rate of change of `log |z_k - z_j|` or `log |z_k - a_m|`; bounds
/// how far the configuration deforms per unit of `t`.
fn relative_speed(ch: &Charges, dch: &Charges, z: &[C64], dz: &[C64]) -> f64 {
    let mut s: f64 = 0.0;
    for k in 0..z.len() {
        for j in k + 1..z.len() {
            s = s.max((dz[k] - dz[j]).norm() / (z[k] - z[j]).norm());
        }
        for (a, da) in ch.poles.iter().zip(&dch.poles) {
            s = s.max((dz[k] - da).norm() / (z[k] - a).norm());
        }
    }
    s
}

/// Continues one solution from `t = 0` to `t = 1`.
pub fn track(path: &ChargePath, z0: &[C64]) -> Result<Vec<C64>> {
    let lost = || LameError::ContinuationLost("equilibrium path".into());
    let mut z = z0.to_vec();
    let mut t = 0.0;
    let mut h: f64 = 0.05;
    let mut steps = 0;
    while t < 1.0 {
        steps += 1;
        if steps > 20_000 || h < 1e-10 {
            return Err(lost());
        }
        let h_eff = h.min(1.0 - t);
        let (ch, dch) = path.at(t);
        let dz = tangent(&ch, &dch, &z).ok_or_else(lost)?;
        let clear = ch.clearance(&z);
        let reach = h_eff * relative_speed(&ch, &dch, &z, dz.as_slice());
        if reach > 0.3 {
            h = h_eff * 0.3 / reach;
            continue;
        }
        let pred: Vec<C64> = z.iter().zip(dz.iter()).map(|(a, d)| a + d * h_eff).collect();
        let (ch1, _) = path.at(t + h_eff);
        let last = t + h_eff >= 1.0;
        match correct(&ch1, &pred, if last { 1e-13 } else { 1e-7 }, if last { 30 } else { 6 }) {
            Some(zn) if zn.iter().zip(&pred).zip(&clear).all(|((a, b), c)| (a - b).norm() <= 0.15 * c) => {
                z = zn;
                t += h_eff;
                h = (h_eff * 2.0).min(0.2);
            }
            _ => h = h_eff * 0.5,
        }
    }
    Ok(z)
}

/// Every equilibrium of `op` reachable by continuation from the real start
/// system, one per occupancy class; paths that are lost are skipped.
pub fn continue_all(op: &LameOperator, rng_seed: u64) -> Result<Vec<Vec<C64>>> {
    let p = op.p;
    let c = op.centroid();
    let half = 0.5 * op.diameter();
    let start_poles: Vec<f64> = (0..=p).map(|m| -1.0 + 2.0 * m as f64 / p as f64).collect();
    let start = Charges {
        poles: start_poles.iter().map(|&x| c + half * x).collect(),
        residues: vec![C64::new(1.0, 0.0); p + 1],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut gauss = |s: f64| C64::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
    let bulge = Charges {
        poles: (0..=p).map(|_| gauss(half)).collect(),
        residues: (0..=p).map(|_| gauss(1.0)).collect(),
    };
    let path = ChargePath { start, end: Charges::of(op), bulge };
    let classes = compositions(op.n, p);
    let real_start: Vec<f64> = start_poles.iter().map(|&x| c.re + half * x).collect();
    let ones = vec![1.0; p + 1];
    let shift = C64::new(0.0, c.im);
    Ok(classes
        .par_iter()
        .filter_map(|counts| {
            let z0: Vec<C64> = stieltjes_equilibrium(&real_start, &ones, counts).ok()?.into_iter().map(|z| z + shift).collect();
            track(&path, &z0).ok()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_count_sigma() {
        assert_eq!(compositions(4, 2).len(), 5);
        assert_eq!(compositions(12, 3).len(), 91);
        assert_eq!(compositions(0, 3), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn legendre_equilibrium() {
        // unit residues at +-1 give the Legendre zeros
        let z = stieltjes_equilibrium(&[-1.0, 1.0], &[1.0, 1.0], &[2]).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((z[0].re + r).abs() < 1e-13 && (z[1].re - r).abs() < 1e-13);
    }
}
