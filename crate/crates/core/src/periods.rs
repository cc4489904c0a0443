//! Periods `w_k = (1/pi i) int_{gamma_k} sqrt(V/A) dz` of the normalized
//! differential, the Chebotarev center of three points, the arcs `l_k` and
//! the cell equations `w_j(v) = m_j`.
//!
//! A cycle is stored as an oriented arc between two endpoints together with
//! the route along which the sheet fixed at infinity is brought to it. The
//! integral is taken on the right-hand bank of the arc, which makes it half
//! of the counterclockwise loop integral around the arc.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch::BranchPoint;
use crate::error::{fmt_c, LameError, Result};
use crate::lame::diameter;
use crate::quad_diff::{trajectories_from, QuadDiffChart, Termination, TraceControls, Trajectory, TrajectoryKind};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum Endpoint {
    Pole(usize),
    Zero(usize),
    Point(C64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub from: Endpoint,
    pub to: Endpoint,
    /// Interior vertices of the arc.
    pub waypoints: Vec<C64>,
    /// Vertices of the route from the chart's base point to the right bank of
    /// the arc's last leg. Empty means: come in from far away along a ray out
    /// of the arc's final endpoint.
    pub connector: Vec<C64>,
}

impl CycleSpec {
    pub fn arc(from: Endpoint, to: Endpoint) -> Self {
        CycleSpec { from, to, waypoints: Vec::new(), connector: Vec::new() }
    }

    /// The straight arm from pole `k` to the zero of `V` (p = 2).
    pub fn arm(k: usize) -> Self {
        Self::arc(Endpoint::Pole(k), Endpoint::Zero(0))
    }
}

/// The three arms of a star centered at the zero of `V`.
pub fn star_cycles(p: usize) -> Vec<CycleSpec> {
    (0..=p).map(CycleSpec::arm).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodVector {
    pub w: Vec<C64>,
    pub cycle_spec: Vec<CycleSpec>,
    /// `|sum w - 1|`.
    pub sum_error: f64,
}

fn resolve(chart: &QuadDiffChart, e: Endpoint) -> Result<C64> {
    let get = |v: &[C64], i: usize| v.get(i).copied().ok_or_else(|| LameError::InvalidInput(format!("endpoint index {i} out of range")));
    match e {
        Endpoint::Pole(k) => get(&chart.poles, k),
        Endpoint::Zero(j) => get(&chart.v_zeros, j),
        Endpoint::Point(z) => Ok(z),
    }
}

fn cycle_error(e: LameError) -> LameError {
    match e {
        LameError::PathThroughSingularity(s) | LameError::SingularPoint(s) => LameError::CycleThroughSingularity(s),
        other => other,
    }
}

struct Bank {
    /// Arc vertices from the last leg's start back to the arc's start.
    back: Vec<C64>,
    end: C64,
    bp: BranchPoint,
}

/// Brings the chart's sheet to the midpoint of the arc's last leg, approached
/// from its right bank.
fn right_bank(chart: &QuadDiffChart, cycle: &CycleSpec) -> Result<Option<Bank>> {
    let mut pts = vec![resolve(chart, cycle.from)?];
    pts.extend(&cycle.waypoints);
    pts.push(resolve(chart, cycle.to)?);
    pts.dedup();
    if pts.len() < 2 {
        return Ok(None);
    }
    let f = chart.multipower();
    let (a, b) = (pts[pts.len() - 2], pts[pts.len() - 1]);
    let mid = (a + b) * 0.5;
    let dist = f.dist_to_roots(mid);
    if dist <= f.sing_tol {
        return Err(LameError::CycleThroughSingularity(fmt_c(mid)));
    }
    let d = (b - a) / (b - a).norm();
    let near = mid - I * d * (0.1 * dist.min((b - a).norm()));
    let mut route = if !cycle.connector.is_empty() {
        cycle.connector.clone()
    } else {
        let radial = far_route(chart, b, near);
        if !crosses(&pts, near, radial.last().copied().unwrap()) {
            radial
        } else {
            let normal = far_route(chart, mid, near);
            if crosses(&pts, near, normal.last().copied().unwrap()) {
                return Err(LameError::InvalidInput("no straight approach to the arc's right bank; give a connector".into()));
            }
            normal
        }
    };
    route.push(near);
    route.push(mid);
    let bp = f.advance_path(chart.base_branch(), &route).map_err(cycle_error)?;
    let back = pts[..pts.len() - 1].iter().rev().copied().collect();
    Ok(Some(Bank { back, end: b, bp }))
}

/// Whether the segment `[p, q]` meets the polyline `pts`.
fn crosses(pts: &[C64], p: C64, q: C64) -> bool {
    let cross = |u: C64, v: C64| u.re * v.im - u.im * v.re;
    pts.windows(2).any(|w| {
        let (a, b) = (w[0], w[1]);
        let d1 = cross(q - p, a - p);
        let d2 = cross(q - p, b - p);
        let d3 = cross(b - a, p - a);
        let d4 = cross(b - a, q - a);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    })
}

/// Route from the base point around a far circle and then straight in along
/// the ray from `hub` through `near` (excluding `near`).
fn far_route(chart: &QuadDiffChart, hub: C64, near: C64) -> Vec<C64> {
    let c = chart.center();
    let r = (chart.z0 - c).norm();
    let u = (near - hub) / (near - hub).norm();
    // |near + t u - c| = r, t > 0
    let w = near - c;
    let bq = (w * u.conj()).re;
    let t = -bq + (bq * bq - w.norm_sqr() + r * r).max(0.0).sqrt();
    let out = near + u * t;
    let th0 = (chart.z0 - c).arg();
    let th1 = (out - c).arg();
    let mut dth = th1 - th0;
    if dth > PI {
        dth -= 2.0 * PI;
    } else if dth < -PI {
        dth += 2.0 * PI;
    }
    let steps = 24;
    let mut route: Vec<C64> = (1..steps).map(|j| c + C64::from_polar(r, th0 + dth * j as f64 / steps as f64)).collect();
    route.push(out);
    route
}

/// `w` for one cycle and its derivatives with respect to the zeros of `V`
/// (each zero moving together with any endpoint attached to it).
pub fn period_with_gradient(chart: &QuadDiffChart, cycle: &CycleSpec) -> Result<(C64, Vec<C64>)> {
    let nz = chart.v_zeros.len();
    let Some(bank) = right_bank(chart, cycle)? else {
        return Ok((C64::new(0.0, 0.0), vec![C64::new(0.0, 0.0); nz]));
    };
    let f = chart.multipower();
    let opts = chart.quad_options();
    let integral = |g: &crate::branch::MultiPower, bp: &BranchPoint| -> Result<C64> {
        let (fwd, _) = g.integrate_segment(bp, bank.end, &opts)?;
        let (back, _) = g.integrate_path(bp, &bank.back, &opts)?;
        Ok(fwd - back)
    };
    let w = integral(f, &bank.bp).map_err(cycle_error)? / (PI * I);
    let mut grad = Vec::with_capacity(nz);
    for j in 0..nz {
        let mut g = f.clone();
        g.factors[j].power = C64::new(-0.5, 0.0);
        let mut bp = bank.bp.clone();
        bp.coef *= -0.5;
        grad.push(integral(&g, &bp).map_err(cycle_error)? / (PI * I));
    }
    Ok((w, grad))
}

pub fn period(chart: &QuadDiffChart, cycle: &CycleSpec) -> Result<C64> {
    let Some(bank) = right_bank(chart, cycle)? else {
        return Ok(C64::new(0.0, 0.0));
    };
    let f = chart.multipower();
    let opts = chart.quad_options();
    let (fwd, _) = f.integrate_segment(&bank.bp, bank.end, &opts).map_err(cycle_error)?;
    let (back, _) = f.integrate_path(&bank.bp, &bank.back, &opts).map_err(cycle_error)?;
    Ok((fwd - back) / (PI * I))
}

/// Periods over the given cycles. For cycles that together encircle every
/// branch point once, `sum w = 1`.
pub fn periods(chart: &QuadDiffChart, cycles: &[CycleSpec]) -> Result<PeriodVector> {
    if !chart.normalized {
        return Err(LameError::InvalidInput("periods need the branch normalized at infinity".into()));
    }
    let w = cycles.iter().map(|c| period(chart, c)).collect::<Result<Vec<_>>>()?;
    let sum_error = (w.iter().sum::<C64>() - 1.0).norm();
    Ok(PeriodVector { w, cycle_spec: cycles.to_vec(), sum_error })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Closedness {
    pub closed: bool,
    /// Periods `w_1 .. w_{p-1}` used as witnesses.
    pub witnesses: Vec<C64>,
}

/// Closed iff `Im w_j = 0` for the first `p - 1` cycles (the last one follows
/// from `sum w = 1`). With `V` constant there is nothing to check.
pub fn is_closed(chart: &QuadDiffChart, cycles: &[CycleSpec], tol: f64) -> Result<Closedness> {
    let p = chart.poles.len() - 1;
    if p <= 1 {
        return Ok(Closedness { closed: true, witnesses: Vec::new() });
    }
    if cycles.len() < p - 1 {
        return Err(LameError::InvalidInput(format!("closedness needs {} cycles", p - 1)));
    }
    let witnesses = cycles[..p - 1].iter().map(|c| period(chart, c)).collect::<Result<Vec<_>>>()?;
    Ok(Closedness { closed: witnesses.iter().all(|w| w.im.abs() <= tol), witnesses })
}

/// The chart of `(z - v)/A(z)`.
pub fn germ_chart(poles: &[C64], v: C64) -> Result<QuadDiffChart> {
    QuadDiffChart::from_zeros(&[v], poles)
}

fn germ_setup(poles: &[C64], k: usize, v: C64, waypoints: &[C64]) -> Result<Option<(QuadDiffChart, CycleSpec)>> {
    if k >= poles.len() {
        return Err(LameError::InvalidInput(format!("pole index {k} out of range")));
    }
    if v == poles[k] && waypoints.is_empty() {
        return Ok(None);
    }
    let chart = germ_chart(poles, v).map_err(path_error)?;
    Ok(Some((chart, CycleSpec { waypoints: waypoints.to_vec(), ..CycleSpec::arm(k) })))
}

fn path_error(e: LameError) -> LameError {
    match e {
        LameError::SingularPoint(s) | LameError::CycleThroughSingularity(s) => LameError::PathThroughSingularity(s),
        other => other,
    }
}

/// `w_k(v) = (1/pi i) int_{a_k}^{v} sqrt((t - v)/A(t)) dt` along
/// `a_k -> waypoints -> v`.
pub fn w_germ(poles: &[C64], k: usize, v: C64, waypoints: &[C64]) -> Result<C64> {
    match germ_setup(poles, k, v, waypoints)? {
        None => Ok(C64::new(0.0, 0.0)),
        Some((chart, cycle)) => period(&chart, &cycle).map_err(path_error),
    }
}

/// `w_k(v)` and `dw_k/dv`; `v` must not sit on a pole other than `a_k`.
pub fn w_germ_with_derivative(poles: &[C64], k: usize, v: C64, waypoints: &[C64]) -> Result<(C64, C64)> {
    match germ_setup(poles, k, v, waypoints)? {
        None => Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0))),
        Some((chart, cycle)) => {
            let (w, g) = period_with_gradient(&chart, &cycle).map_err(path_error)?;
            Ok((w, g[0]))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebotarevData {
    pub v_star: C64,
    #[serde(rename = "M")]
    pub m: [f64; 3],
    pub star_arcs: Vec<Trajectory>,
    /// Collinear poles: the center sits on the middle pole.
    pub degenerate: bool,
    /// Largest `|Im w_k(v_star)|`.
    pub residual: f64,
    /// Largest gap between a star arc's metric length and its mass.
    pub length_mismatch: f64,
}

fn newton_center(poles: &[C64], seed: C64, tol: f64) -> Result<C64> {
    let scale = 1.0 + diameter(poles);
    let mut v = seed;
    for _ in 0..80 {
        let (w1, d1) = w_germ_with_derivative(poles, 1, v, &[])?;
        let (w2, d2) = w_germ_with_derivative(poles, 2, v, &[])?;
        let res = w1.im.abs().max(w2.im.abs());
        if res <= tol {
            return Ok(v);
        }
        // d Im w / dx = Im w', d Im w / dy = Re w'
        let (a11, a12, a21, a22) = (d1.im, d1.re, d2.im, d2.re);
        let det = a11 * a22 - a12 * a21;
        if det.abs() < 1e-300 {
            return Err(LameError::SingularJacobian("chebotarev center"));
        }
        let dx = (-w1.im * a22 + w2.im * a12) / det;
        let dy = (-a11 * w2.im + a21 * w1.im) / det;
        let mut step = C64::new(dx, dy);
        let room = 0.5 * poles.iter().map(|a| (a - v).norm()).fold(f64::INFINITY, f64::min);
        if step.norm() > room {
            step *= room / step.norm();
        }
        v += step;
        if !(v.norm() < 1e6 * scale) {
            break;
        }
    }
    Err(LameError::NonConvergence { what: "chebotarev center", iterations: 80 })
}

fn collinear_middle(poles: &[C64]) -> Option<usize> {
    let scale = diameter(poles);
    let (a, b, c) = (poles[0], poles[1], poles[2]);
    if ((b - a) * (c - a).conj()).im.abs() > 1e-12 * scale * scale {
        return None;
    }
    let d = (c - a) + (b - a);
    let t: Vec<f64> = poles.iter().map(|p| ((p - a) * d.conj()).re).collect();
    (0..3).find(|&i| (0..3).filter(|&j| j != i).map(|j| t[j] - t[i]).fold(1.0, |acc, x| acc * x.signum()) < 0.0)
}

fn reversed(t: &Trajectory) -> Trajectory {
    let mut r = t.clone();
    r.samples.reverse();
    let last = *t.xi_values.last().unwrap();
    r.xi_values = t.xi_values.iter().rev().map(|x| x - last).collect();
    r
}

/// The center of the three-arm star of minimal capacity joining three
/// points: the point where every period of `(z - v)/A` is real with positive
/// masses. Star arcs are traced from the center.
pub fn chebotarev_center(poles: &[C64], tol: f64) -> Result<ChebotarevData> {
    if poles.len() != 3 {
        return Err(LameError::InvalidInput("the Chebotarev center is implemented for three points".into()));
    }
    let ctl = TraceControls::default();
    if let Some(mid) = collinear_middle(poles) {
        let v = poles[mid];
        let mut m = [0.0; 3];
        let mut arcs = vec![None, None, None];
        let others: Vec<usize> = (0..3).filter(|&k| k != mid).collect();
        for &k in &others {
            m[k] = w_germ(poles, k, v, &[])?.re;
        }
        // V cancels the middle pole, so the arcs from the outer poles run
        // straight into it.
        let chart = germ_chart(poles, v)?;
        for &k in &others {
            let t = trajectories_from(&chart, 1 + k, TrajectoryKind::Horizontal, &ctl)?.remove(0);
            match t.termination {
                Termination::CriticalPoint { point, .. } if (point - v).norm() <= 1e-9 * (1.0 + v.norm()) => {}
                _ => return Err(LameError::NonConvergence { what: "chebotarev star arcs", iterations: 0 }),
            }
            arcs[k] = Some(reversed(&t));
        }
        arcs[mid] = Some(Trajectory {
            kind: TrajectoryKind::Horizontal,
            samples: vec![v],
            xi_values: vec![C64::new(0.0, 0.0)],
            termination: Termination::CriticalPoint { index: 0, point: v },
            omega_length: 0.0,
        });
        let star_arcs: Vec<Trajectory> = arcs.into_iter().map(Option::unwrap).collect();
        let length_mismatch = (0..3).map(|k| (star_arcs[k].omega_length - m[k]).abs()).fold(0.0, f64::max);
        return Ok(ChebotarevData { v_star: v, m, star_arcs, degenerate: true, residual: 0.0, length_mismatch });
    }

    let centroid = poles.iter().sum::<C64>() / 3.0;
    let mut seeds = vec![centroid];
    for k in 0..3 {
        seeds.push(centroid * 0.7 + poles[k] * 0.3);
    }
    let mut found = None;
    for s in seeds {
        let Ok(v) = newton_center(poles, s, tol) else { continue };
        let w: Vec<C64> = (0..3).map(|k| w_germ(poles, k, v, &[])).collect::<Result<_>>()?;
        if w.iter().all(|x| x.re > 0.0) {
            found = Some((v, w));
            break;
        }
    }
    let (v, w) = found.ok_or(LameError::NonConvergence { what: "chebotarev center", iterations: 80 })?;
    let m = [w[0].re, w[1].re, w[2].re];
    let residual = w.iter().map(|x| x.im.abs()).fold(0.0, f64::max);

    let chart = germ_chart(poles, v)?;
    let traced = trajectories_from(&chart, 0, TrajectoryKind::Horizontal, &ctl)?;
    let mut arcs: Vec<Option<Trajectory>> = vec![None, None, None];
    for t in traced {
        if let Termination::CriticalPoint { index, .. } = t.termination {
            if (1..=3).contains(&index) && arcs[index - 1].is_none() {
                arcs[index - 1] = Some(t);
                continue;
            }
        }
        return Err(LameError::NonConvergence { what: "chebotarev star arcs", iterations: 0 });
    }
    let star_arcs: Vec<Trajectory> = arcs.into_iter().collect::<Option<Vec<_>>>().ok_or(LameError::NonConvergence { what: "chebotarev star arcs", iterations: 0 })?;
    let length_mismatch = (0..3).map(|k| (star_arcs[k].omega_length - m[k]).abs()).fold(0.0, f64::max);
    Ok(ChebotarevData { v_star: v, m, star_arcs, degenerate: false, residual, length_mismatch })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSample {
    /// `w_k` at the sample.
    pub w: f64,
    pub v: C64,
}

/// Newton for `w_k(v) = target` from `seed`.
pub fn solve_germ(poles: &[C64], k: usize, target: C64, seed: C64, tol: f64) -> Result<C64> {
    let scale = 1.0 + diameter(poles);
    let mut v = seed;
    for _ in 0..60 {
        let (w, dw) = w_germ_with_derivative(poles, k, v, &[])?;
        let res = w - target;
        if res.norm() <= tol {
            return Ok(v);
        }
        if dw.norm() == 0.0 {
            return Err(LameError::SingularJacobian("w germ"));
        }
        let mut step = res / dw;
        let room = 0.5
            * poles
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, a)| (a - v).norm())
                .fold(f64::INFINITY, f64::min);
        if step.norm() > room {
            step *= room / step.norm();
        }
        v -= step;
        if !(v.norm() < 1e6 * scale) {
            break;
        }
    }
    Err(LameError::NonConvergence { what: "cell equation", iterations: 60 })
}

/// Samples of the arc `l_k = {v : w_k(v) in [0, M_k]}` from `a_k` to the
/// center, uniformly spaced in `w_k`.
pub fn ell_arc(poles: &[C64], cheb: &ChebotarevData, k: usize, num_samples: usize) -> Result<Vec<ArcSample>> {
    let n = num_samples.max(2);
    let mk = cheb.m[k];
    if mk <= 0.0 {
        return Ok(vec![ArcSample { w: 0.0, v: poles[k] }; n]);
    }
    let mut out = vec![ArcSample { w: mk, v: cheb.v_star }];
    let mut v = cheb.v_star;
    let mut dv = if cheb.degenerate { None } else { Some(w_germ_with_derivative(poles, k, v, &[])?.1) };
    for j in 1..n {
        let t = mk * (1.0 - j as f64 / (n - 1) as f64);
        if j == n - 1 {
            out.push(ArcSample { w: 0.0, v: poles[k] });
            break;
        }
        let dt = t - out.last().unwrap().w;
        let seed = match dv {
            Some(d) if d.norm() > 0.0 => v + dt / d,
            _ => v + (poles[k] - v) * (-dt / out.last().unwrap().w),
        };
        let next = solve_germ(poles, k, C64::new(t, 0.0), seed, 1e-13).map_err(|_| LameError::ContinuationLost(fmt_c(seed)))?;
        dv = Some(w_germ_with_derivative(poles, k, next, &[])?.1);
        v = next;
        out.push(ArcSample { w: t, v });
    }
    out.reverse();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellPoint {
    pub v: Vec<C64>,
    pub m: Vec<f64>,
    pub cell_id: String,
}

/// Solves `w_k(v) = m` on the arc `l_k` (p = 2).
pub fn solve_cell_p2(poles: &[C64], cheb: &ChebotarevData, k: usize, m: f64, seed: Option<C64>) -> Result<CellPoint> {
    let mk = cheb.m[k];
    if !(m >= -1e-12 && m <= mk + 1e-12) {
        return Err(LameError::OutOfCell(format!("mass {m} outside [0, {mk}] on arc {k}")));
    }
    let cell_id = format!("l{k}");
    let v = if m <= 0.0 {
        poles[k]
    } else if (m - mk).abs() <= 1e-15 {
        cheb.v_star
    } else {
        let seed = seed.unwrap_or(poles[k] + (cheb.v_star - poles[k]) * (m / mk));
        solve_germ(poles, k, C64::new(m, 0.0), seed, 1e-13)?
    };
    Ok(CellPoint { v: vec![v], m: vec![m], cell_id })
}

fn period_map(poles: &[C64], cycles: &[CycleSpec], v: &[C64]) -> Result<(Vec<C64>, Vec<Vec<C64>>)> {
    let chart = QuadDiffChart::from_zeros(v, poles)?;
    let mut w = Vec::with_capacity(cycles.len());
    let mut jac = Vec::with_capacity(cycles.len());
    for c in cycles {
        let (x, g) = period_with_gradient(&chart, c)?;
        w.push(x);
        jac.push(g);
    }
    Ok((w, jac))
}

/// Solves `w_j(v) = m_j` over `p - 1` cycles for the `p - 1` zeros of `V`,
/// by Newton from `seed`.
pub fn solve_cell_system(poles: &[C64], cycles: &[CycleSpec], m: &[f64], seed: &[C64], tol: f64) -> Result<CellPoint> {
    let q = poles.len() - 2;
    if cycles.len() != q || m.len() != q || seed.len() != q {
        return Err(LameError::InvalidInput(format!("cell system needs {q} cycles, masses and seeds")));
    }
    let mut v = seed.to_vec();
    for _ in 0..60 {
        let (w, jac) = period_map(poles, cycles, &v)?;
        let res: Vec<C64> = w.iter().zip(m).map(|(x, t)| x - t).collect();
        if res.iter().all(|r| r.norm() <= tol) {
            let masses: Vec<f64> = w.iter().map(|x| x.re).collect();
            if masses.iter().any(|&x| x < -tol) {
                return Err(LameError::OutOfCell(format!("negative mass in {masses:?}")));
            }
            let cell_id = cycles.iter().map(|c| format!("{:?}->{:?}", c.from, c.to)).collect::<Vec<_>>().join(";");
            return Ok(CellPoint { v, m: m.to_vec(), cell_id });
        }
        let jm = DMatrix::from_fn(q, q, |i, j| jac[i][j]);
        let step = jm.lu().solve(&DVector::from_vec(res)).ok_or(LameError::SingularJacobian("cell system"))?;
        for (vi, s) in v.iter_mut().zip(step.iter()) {
            *vi -= *s;
        }
    }
    Err(LameError::NonConvergence { what: "cell system", iterations: 60 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    pub distance_to_poles: f64,
    /// Set near a pole or when the condition number exceeds `1e8`.
    pub ill_conditioned: bool,
}

/// Finite-difference Jacobian of the period map in real coordinates.
pub fn jacobian_check(poles: &[C64], cycles: &[CycleSpec], v: &[C64]) -> Result<JacobianReport> {
    let q = v.len();
    let scale = 1.0 + diameter(poles);
    let h = 1e-6 * scale;
    let mut jm = DMatrix::<f64>::zeros(2 * cycles.len(), 2 * q);
    let cols: Vec<(usize, C64)> = (0..q).flat_map(|i| [(i, C64::new(h, 0.0)), (i, C64::new(0.0, h))]).collect();
    let diffs: Vec<Vec<C64>> = cols
        .par_iter()
        .map(|&(i, dh)| {
            let mut vp = v.to_vec();
            let mut vm = v.to_vec();
            vp[i] += dh;
            vm[i] -= dh;
            let wp = period_map(poles, cycles, &vp)?.0;
            let wm = period_map(poles, cycles, &vm)?.0;
            Ok(wp.iter().zip(&wm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    for (c, d) in diffs.iter().enumerate() {
        for (r, x) in d.iter().enumerate() {
            jm[(2 * r, c)] = x.re;
            jm[(2 * r + 1, c)] = x.im;
        }
    }
    let sv = jm.singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let dist = v
        .iter()
        .flat_map(|x| poles.iter().map(move |a| (a - x).norm()))
        .fold(f64::INFINITY, f64::min);
    Ok(JacobianReport {
        smallest_singular_value: smin,
        largest_singular_value: smax,
        distance_to_poles: dist,
        ill_conditioned: dist < 1e-2 * scale || smax > 1e8 * smin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cube_roots() -> Vec<C64> {
        (0..3).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0)).collect()
    }

    #[test]
    fn sums_to_one_and_symmetry() {
        let poles = cube_roots();
        let chart = germ_chart(&poles, c(0.0, 0.0)).unwrap();
        let pv = periods(&chart, &star_cycles(2)).unwrap();
        assert!(pv.sum_error < 1e-12);
        for w in &pv.w {
            assert!((w - 1.0 / 3.0).norm() < 1e-12);
        }
        let chart = germ_chart(&[c(0.3, 1.0), c(-1.2, 0.1), c(0.9, -0.7)], c(0.4, 0.2)).unwrap();
        let pv = periods(&chart, &star_cycles(2)).unwrap();
        assert!(pv.sum_error < 1e-12, "{pv:?}");
    }

    #[test]
    fn collinear_arcsine_value() {
        let poles = [c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!((w_germ(&poles, 0, c(0.0, 0.0), &[]).unwrap() - 0.5).norm() < 1e-12);
        assert!((w_germ(&poles, 2, c(0.0, 0.0), &[]).unwrap() - 0.5).norm() < 1e-12);
        let cheb = chebotarev_center(&poles, 1e-13).unwrap();
        assert!(cheb.degenerate);
        assert_eq!(cheb.v_star, c(0.0, 0.0));
        assert!((cheb.m[0] - 0.5).abs() < 1e-7 && cheb.m[1] == 0.0 && (cheb.m[2] - 0.5).abs() < 1e-7);
        assert!(cheb.length_mismatch < 1e-7, "{}", cheb.length_mismatch);
    }

    #[test]
    fn homotopic_arms_agree() {
        let poles = [c(0.3, 1.0), c(-1.2, 0.1), c(0.9, -0.7)];
        let v = c(0.1, 0.1);
        let straight = w_germ(&poles, 0, v, &[]).unwrap();
        let bent = w_germ(&poles, 0, v, &[c(0.5, 0.5)]).unwrap();
        assert!((straight - bent).norm() < 1e-9);
        let (w, d) = w_germ_with_derivative(&poles, 1, v, &[]).unwrap();
        let h = 1e-6;
        let fd = (w_germ(&poles, 1, v + h, &[]).unwrap() - w_germ(&poles, 1, v - h, &[]).unwrap()) / (2.0 * h);
        assert!((fd - d).norm() < 1e-6 * (1.0 + d.norm()), "{fd} {d} {w}");
    }

    #[test]
    fn equilateral_center() {
        let poles = cube_roots();
        let cheb = chebotarev_center(&poles, 1e-13).unwrap();
        assert!(cheb.v_star.norm() < 1e-8);
        for k in 0..3 {
            assert!((cheb.m[k] - 1.0 / 3.0).abs() < 1e-8);
            assert!((cheb.star_arcs[k].end() - poles[k]).norm() < 1e-6);
        }
        assert!(cheb.length_mismatch < 1e-7);
        let arc = ell_arc(&poles, &cheb, 1, 9).unwrap();
        assert_eq!(arc[0].v, poles[1]);
        assert!((arc[8].v - cheb.v_star).norm() < 1e-6);
        for s in &arc {
            // on the ray through a_1
            assert!((s.v * poles[1].conj()).im.abs() < 1e-8);
        }
        let half = solve_cell_p2(&poles, &cheb, 1, cheb.m[1] / 2.0, None).unwrap();
        assert!((w_germ(&poles, 1, half.v[0], &[]).unwrap() - cheb.m[1] / 2.0).norm() < 1e-9);
        assert!(matches!(solve_cell_p2(&poles, &cheb, 1, 0.5, None), Err(LameError::OutOfCell(_))));
    }

    #[test]
    fn isoceles_center_on_axis() {
        let poles = [c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)];
        let cheb = chebotarev_center(&poles, 1e-13).unwrap();
        assert!(cheb.v_star.re.abs() < 1e-9);
        assert!(cheb.v_star.im > 0.0 && cheb.v_star.im < 1.0);
        assert!((cheb.m.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(cheb.length_mismatch < 1e-7);
        let closed = is_closed(&germ_chart(&poles, cheb.v_star).unwrap(), &star_cycles(2), 1e-8).unwrap();
        assert!(closed.closed);
        let open = is_closed(&germ_chart(&poles, c(0.3, 0.2)).unwrap(), &star_cycles(2), 1e-8).unwrap();
        assert!(!open.closed);
    }

    #[test]
    fn general_cell_solver_matches_germ() {
        let poles = [c(0.3, 1.0), c(-1.2, 0.1), c(0.9, -0.7)];
        let cheb = chebotarev_center(&poles, 1e-13).unwrap();
        let m = 0.4 * cheb.m[2];
        let a = solve_cell_p2(&poles, &cheb, 2, m, None).unwrap();
        let b = solve_cell_system(&poles, &[CycleSpec::arm(2)], &[m], &[cheb.v_star], 1e-12).unwrap();
        assert!((a.v[0] - b.v[0]).norm() < 1e-9);
        let rep = jacobian_check(&poles, &[CycleSpec::arm(2)], &a.v).unwrap();
        assert!(rep.smallest_singular_value > 1e-3 && !rep.ill_conditioned);
        let near = jacobian_check(&poles, &[CycleSpec::arm(0)], &[poles[1] + 1e-4]).unwrap();
        assert!(near.ill_conditioned);
    }
}
