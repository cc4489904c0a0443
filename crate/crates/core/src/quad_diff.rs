//! The quadratic differential `-(V/A) dz^2`: its natural parameter
//! `xi = int sqrt(V/A) dz`, metric lengths and trajectories.
//!
//! Horizontal trajectories are the curves along which `(V/A) dz^2 < 0`, so
//! `Re xi` is constant on them and `Im xi` parametrizes them; vertical
//! trajectories swap the two roles.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch::{BranchPoint, MultiPower};
use crate::error::{fmt_c, LameError, Result};
use crate::lame::diameter;
use crate::poly::Poly;
use crate::quad::QuadOptions;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Horizontal,
    Vertical,
}

impl TrajectoryKind {
    /// `dxi/ds` along a trajectory traversed in the positive direction.
    fn xi_direction(self) -> C64 {
        match self {
            TrajectoryKind::Horizontal => I,
            TrajectoryKind::Vertical => C64::new(1.0, 0.0),
        }
    }

    /// The component of `xi` that stays constant.
    fn level(self, xi: C64) -> f64 {
        match self {
            TrajectoryKind::Horizontal => xi.re,
            TrajectoryKind::Vertical => xi.im,
        }
    }

    /// The component of `xi` that parametrizes the trajectory.
    fn param(self, xi: C64) -> f64 {
        match self {
            TrajectoryKind::Horizontal => xi.im,
            TrajectoryKind::Vertical => xi.re,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Termination {
    /// Ran into a zero of `V` or of `A`; `index` refers to
    /// [`QuadDiffChart::critical_points`].
    CriticalPoint { index: usize, point: C64 },
    Closed,
    Unbounded,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub samples: Vec<C64>,
    /// `xi` at the samples, measured from the first sample.
    pub xi_values: Vec<C64>,
    pub termination: Termination,
    pub omega_length: f64,
}

impl Trajectory {
    /// Largest deviation of the conserved component of `xi` from its start.
    pub fn level_deviation(&self) -> f64 {
        let l0 = self.kind.level(self.xi_values[0]);
        self.xi_values.iter().map(|&x| (self.kind.level(x) - l0).abs()).fold(0.0, f64::max)
    }

    /// Cumulative `|dxi|` at each sample.
    pub fn xi_arclength(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.xi_values.len()];
        for i in 1..s.len() {
            s[i] = s[i - 1] + (self.xi_values[i] - self.xi_values[i - 1]).norm();
        }
        s
    }

    pub fn end(&self) -> C64 {
        *self.samples.last().unwrap()
    }

    /// Distance from `z` to the sampled polyline.
    pub fn distance_to(&self, z: C64) -> f64 {
        if self.samples.len() == 1 {
            return (z - self.samples[0]).norm();
        }
        self.samples
            .windows(2)
            .map(|w| segment_distance(z, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn segment_distance(z: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    let s = if len2 > 0.0 { (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * s - z).norm()
}

/// Knobs of the trajectory tracer. Lengths are relative to the chart scale
/// `1 + diameter(poles)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceControls {
    /// Largest step in `xi`.
    pub max_xi_step: f64,
    /// Largest step in `z`, relative to the scale.
    pub max_z_step: f64,
    /// Steps never exceed this fraction of the distance to the nearest
    /// critical point.
    pub safety: f64,
    /// Critical points closer than this (relative) are tested for capture.
    pub capture_radius: f64,
    /// Allowed mismatch of the conserved `xi` component at a captured point.
    pub capture_tol: f64,
    /// A trajectory heading into a critical point ends there once this
    /// close (relative), whatever its level mismatch. Non-closed
    /// differentials have trajectories that pass a pole at a distance of
    /// the order of the squared mismatch.
    pub snap_radius: f64,
    /// Return distance (relative) that counts as closing the loop.
    pub close_tol: f64,
    /// Absolute tolerance of the level-set Newton correction.
    pub newton_tol: f64,
    /// Escape radius; `None` means `10 diameter + 10` around the centroid.
    pub escape_radius: Option<f64>,
    pub max_steps: usize,
    /// Trajectories longer than this metric length stop with `StepLimit`.
    pub max_omega_length: f64,
}

impl Default for TraceControls {
    fn default() -> Self {
        TraceControls {
            max_xi_step: 0.05,
            max_z_step: 0.02,
            safety: 0.25,
            capture_radius: 0.05,
            capture_tol: 1e-6,
            snap_radius: 1e-6,
            close_tol: 1e-4,
            newton_tol: 1e-13,
            escape_radius: None,
            max_steps: 1_000_000,
            max_omega_length: 100.0,
        }
    }
}

/// A sheet of `sqrt(V/A)` fixed at a base point.
#[derive(Clone, Debug)]
pub struct QuadDiffChart {
    pub v: Poly,
    pub a: Poly,
    pub z0: C64,
    pub branch_anchor: C64,
    /// Whether the anchor was chosen so that `z sqrt(V/A) -> 1` at infinity.
    pub normalized: bool,
    pub poles: Vec<C64>,
    pub v_zeros: Vec<C64>,
    f: MultiPower,
    base: BranchPoint,
    scale: f64,
    center: C64,
}

impl QuadDiffChart {
    /// Chart with the sheet fixed by `sqrt(V/A)(z0) = anchor`.
    pub fn new(v: &Poly, a: &Poly, z0: C64, anchor: C64) -> Result<Self> {
        let mut chart = Self::skeleton(v, a, z0)?;
        let val = chart.ratio(z0);
        if (anchor * anchor - val).norm() > 1e-12 * val.norm().max(1e-300) {
            return Err(LameError::InvalidInput(format!(
                "branch anchor {} does not square to V/A at {}",
                fmt_c(anchor),
                fmt_c(z0)
            )));
        }
        chart.set_anchor(anchor)?;
        Ok(chart)
    }

    /// Chart whose branch behaves like `1/z` at infinity, based at a point
    /// far to the right of the poles. Requires `deg A = deg V + 2`.
    pub fn normalized(v: &Poly, a: &Poly) -> Result<Self> {
        if v.is_zero() || a.degree() != v.degree() + 2 {
            return Err(LameError::DegreeError("normalization at infinity needs deg A = deg V + 2".into()));
        }
        let v_zeros = if v.degree() >= 1 { v.roots(1e-14)? } else { Vec::new() };
        let poles = a.roots(1e-14)?;
        Self::normalized_with(v, a, v_zeros, poles)
    }

    /// Normalized chart for `V = prod (z - v_j)`, `A = prod (z - a_k)`, keeping
    /// the given order of zeros and poles.
    pub fn from_zeros(v_zeros: &[C64], poles: &[C64]) -> Result<Self> {
        if poles.len() != v_zeros.len() + 2 {
            return Err(LameError::DegreeError("normalization at infinity needs deg A = deg V + 2".into()));
        }
        Self::normalized_with(&Poly::from_roots(v_zeros), &Poly::from_roots(poles), v_zeros.to_vec(), poles.to_vec())
    }

    /// [`Self::from_zeros`] after cancelling zeros of `V` that sit on poles.
    pub fn reduced(v_zeros: &[C64], poles: &[C64]) -> Result<Self> {
        let tol = 1e-10 * (1.0 + diameter(poles));
        let hits = |z: &C64, pts: &[C64]| pts.iter().any(|p| (p - z).norm() <= tol);
        let zeros: Vec<C64> = v_zeros.iter().copied().filter(|z| !hits(z, poles)).collect();
        let kept: Vec<C64> = poles.iter().copied().filter(|a| !hits(a, v_zeros)).collect();
        Self::from_zeros(&zeros, &kept)
    }

    fn normalized_with(v: &Poly, a: &Poly, v_zeros: Vec<C64>, poles: Vec<C64>) -> Result<Self> {
        let center = centroid(&poles);
        let reach = poles.iter().chain(&v_zeros).map(|p| (p - center).norm()).fold(0.0, f64::max);
        let z0 = center + C64::new(20.0 * (1.0 + diameter(&poles) + reach), 0.0);
        let mut chart = Self::skeleton_with(v, a, v_zeros, poles, z0)?;
        let mut anchor = chart.ratio(z0).sqrt();
        if (z0 * anchor).re < 0.0 {
            anchor = -anchor;
        }
        chart.set_anchor(anchor)?;
        chart.normalized = true;
        Ok(chart)
    }

    fn skeleton(v: &Poly, a: &Poly, z0: C64) -> Result<Self> {
        if a.degree() < 1 || v.is_zero() {
            return Err(LameError::DegreeError("chart needs nonconstant A and nonzero V".into()));
        }
        let poles = a.roots(1e-14)?;
        let v_zeros = if v.degree() >= 1 { v.roots(1e-14)? } else { Vec::new() };
        Self::skeleton_with(v, a, v_zeros, poles, z0)
    }

    fn skeleton_with(v: &Poly, a: &Poly, v_zeros: Vec<C64>, poles: Vec<C64>, z0: C64) -> Result<Self> {
        let center = centroid(&poles);
        let scale = 1.0 + diameter(&poles);
        let reach = poles.iter().chain(&v_zeros).map(|p| p.norm()).fold(1.0, f64::max);
        let f = MultiPower::sqrt_ratio(&v_zeros, &poles, 1e-13 * reach);
        if f.is_singular(z0) {
            return Err(LameError::SingularPoint(fmt_c(z0)));
        }
        let base = f.principal_at(z0, C64::new(1.0, 0.0))?;
        Ok(QuadDiffChart {
            v: v.clone(),
            a: a.clone(),
            z0,
            branch_anchor: C64::new(0.0, 0.0),
            normalized: false,
            poles,
            v_zeros,
            f,
            base,
            scale,
            center,
        })
    }

    fn set_anchor(&mut self, anchor: C64) -> Result<()> {
        self.base = self.f.anchored_at(self.z0, anchor)?;
        self.branch_anchor = anchor;
        Ok(())
    }

    /// `(V/A)(z)`.
    pub fn ratio(&self, z: C64) -> C64 {
        self.v.eval(z) / self.a.eval(z)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn multipower(&self) -> &MultiPower {
        &self.f
    }

    /// The branch at the base point.
    pub fn base_branch(&self) -> &BranchPoint {
        &self.base
    }

    /// Zeros of `V` followed by the poles.
    pub fn critical_points(&self) -> Vec<C64> {
        let mut pts = self.v_zeros.clone();
        pts.extend(&self.poles);
        pts
    }

    pub fn is_singular(&self, z: C64) -> bool {
        self.f.is_singular(z)
    }

    pub fn quad_options(&self) -> QuadOptions {
        QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 4000 }
    }

    /// Branch point at `z` on the chart's sheet, reached along `path`
    /// (waypoints after `z0`, ending at `z`).
    pub fn branch_along(&self, path: &[C64]) -> Result<BranchPoint> {
        self.f.advance_path(&self.base, path)
    }

    /// `xi(z) = int_{z0}^{z} sqrt(V/A) dt` along `z0 -> via... -> z`.
    pub fn xi(&self, z: C64, via: &[C64]) -> Result<C64> {
        Ok(self.xi_with_branch(z, via)?.0)
    }

    pub fn xi_with_branch(&self, z: C64, via: &[C64]) -> Result<(C64, BranchPoint)> {
        let mut path: Vec<C64> = via.to_vec();
        path.push(z);
        self.f.integrate_path(&self.base, &path, &self.quad_options())
    }

    /// `xi(z)` along [`Self::default_path`].
    pub fn xi_default(&self, z: C64) -> Result<C64> {
        let via = self.default_path(z);
        self.xi(z, &via)
    }

    /// Waypoints for a path from `z0` to `z`: the straight segment when it
    /// keeps clear of the critical points, otherwise a single bend sideways.
    pub fn default_path(&self, z: C64) -> Vec<C64> {
        let pts = self.critical_points();
        let clear = |a: C64, b: C64| {
            pts.iter().all(|&p| (p - a).norm() <= self.f.sing_tol || (p - b).norm() <= self.f.sing_tol || segment_distance(p, a, b) > 1e-3 * self.scale)
        };
        if clear(self.z0, z) {
            return Vec::new();
        }
        let d = z - self.z0;
        let mid = self.z0 + d * 0.5;
        let normal = I * d / d.norm().max(1e-300);
        for k in 1..40 {
            for sgn in [1.0, -1.0] {
                let w = mid + normal * (sgn * 0.05 * k as f64 * self.scale);
                if clear(self.z0, w) && clear(w, z) {
                    return vec![w];
                }
            }
        }
        Vec::new()
    }

    /// `(1/pi) int |sqrt(V/A)| |dz|` along a polyline.
    pub fn omega_length(&self, curve: &[C64]) -> Result<f64> {
        let mut total = 0.0;
        for w in curve.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let start = if self.f.is_singular(w[0]) {
                self.f.singular_start(w[0], self.base.coef)
            } else {
                self.f.principal_at(w[0], self.base.coef)?
            };
            total += self.f.integrate_abs_segment(&start, w[1], &self.quad_options())?;
        }
        Ok(total / PI)
    }

    fn escape_radius(&self, ctl: &TraceControls) -> f64 {
        ctl.escape_radius.unwrap_or(10.0 * (self.scale - 1.0) + 10.0)
    }

    /// `sqrt(V/A)(z)` on the sheet closest to `reference`.
    fn sqrt_near(&self, z: C64, reference: C64) -> C64 {
        let s = self.ratio(z).sqrt();
        if (s * reference.conj()).re < 0.0 {
            -s
        } else {
            s
        }
    }
}

fn centroid(pts: &[C64]) -> C64 {
    pts.iter().sum::<C64>() / pts.len() as f64
}

/// Traces the trajectory of `kind` through the regular point `z_start`, in the
/// direction where the parametrizing component of `xi` increases (`direction
/// = 1`) or decreases (`-1`) on the chart's sheet.
pub fn trace_trajectory(
    chart: &QuadDiffChart,
    z_start: C64,
    kind: TrajectoryKind,
    direction: i32,
    ctl: &TraceControls,
) -> Result<Trajectory> {
    if chart.is_singular(z_start) {
        return Err(LameError::StartAtSingularity(fmt_c(z_start)));
    }
    let via = chart.default_path(z_start);
    let mut path = via;
    path.push(z_start);
    let bp = chart.branch_along(&path)?;
    let dir = if direction >= 0 { 1.0 } else { -1.0 };
    trace_from(chart, bp, C64::new(0.0, 0.0), vec![], kind, dir, None, ctl)
}

/// Continues a trajectory from the branch point `bp` where `xi = xi_start`
/// (relative to the trajectory's origin). `prefix` holds earlier samples.
#[allow(clippy::too_many_arguments)]
fn trace_from(
    chart: &QuadDiffChart,
    mut bp: BranchPoint,
    xi_start: C64,
    prefix: Vec<(C64, C64)>,
    kind: TrajectoryKind,
    dir: f64,
    origin: Option<usize>,
    ctl: &TraceControls,
) -> Result<Trajectory> {
    let f = chart.multipower();
    let crit = chart.critical_points();
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-13, max_intervals: 200 };
    let e = kind.xi_direction() * dir;
    let level0 = kind.level(prefix.first().map(|p| p.1).unwrap_or(xi_start));
    let escape = chart.escape_radius(ctl);
    let z_first = prefix.first().map(|p| p.0).unwrap_or(bp.z);

    let mut samples: Vec<C64> = prefix.iter().map(|p| p.0).collect();
    let mut xis: Vec<C64> = prefix.iter().map(|p| p.1).collect();
    samples.push(bp.z);
    xis.push(xi_start);
    let mut xi = xi_start;
    let mut length = 0.0;
    for w in xis.windows(2) {
        length += (w[1] - w[0]).norm();
    }
    let mut left_start = false;

    let finish = |samples: Vec<C64>, xis: Vec<C64>, termination: Termination| {
        let omega: f64 = xis.windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>() / PI;
        Trajectory { kind, samples, xi_values: xis, termination, omega_length: omega }
    };

    for _ in 0..ctl.max_steps {
        let z = bp.z;
        if (z - chart.center).norm() > escape {
            return Ok(finish(samples, xis, Termination::Unbounded));
        }
        if length / PI > ctl.max_omega_length {
            return Ok(finish(samples, xis, Termination::StepLimit));
        }
        let d = f.dist_to_roots(z);
        let fz = bp.value(f);
        if d < ctl.capture_radius * chart.scale {
            // only the nearest critical point, and only when heading at it
            let (idx, r) = crit
                .iter()
                .copied()
                .enumerate()
                .min_by(|x, y| (x.1 - z).norm().total_cmp(&(y.1 - z).norm()))
                .unwrap();
            let heading = e / fz;
            let aim = (r - z) * heading.conj();
            if Some(idx) != origin && aim.re > 0.8 * aim.norm() {
                if let Ok((dxi, _)) = f.integrate_segment(&bp, r, &opts) {
                    let xr = xi + dxi;
                    let ahead = dir * (kind.param(xr) - kind.param(xi));
                    let on_level = (kind.level(xr) - level0).abs() <= ctl.capture_tol;
                    if ahead > 0.0 && (on_level || (r - z).norm() <= ctl.snap_radius * chart.scale) {
                        samples.push(r);
                        xis.push(xr);
                        return Ok(finish(samples, xis, Termination::CriticalPoint { index: idx, point: r }));
                    }
                }
            }
        }

        let hz = (ctl.max_z_step * chart.scale).min(ctl.safety * d);
        let mut h = ctl.max_xi_step.min(hz * fz.norm());
        let (z1, bp1, xi1) = loop {
            if h < 1e-15 * (1.0 + xi.norm()) {
                return Err(LameError::ContinuationLost(fmt_c(z)));
            }
            let target = xi + e * h;
            let g = |w: C64, r: C64| -> (C64, C64) {
                let s = chart.sqrt_near(w, r);
                (e / s, s)
            };
            let (k1, s1) = (e / fz, fz);
            let (k2, s2) = g(z + k1 * (h / 2.0), s1);
            let (k3, s3) = g(z + k2 * (h / 2.0), s2);
            let (k4, _) = g(z + k3 * h, s3);
            let mut zn = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let mut done = None;
            for _ in 0..8 {
                if (zn - z).norm() > 0.5 * d {
                    break;
                }
                let Ok((dxi, bpn)) = f.integrate_segment(&bp, zn, &opts) else { break };
                let res = xi + dxi - target;
                let fzn = bpn.value(f);
                if res.norm() <= ctl.newton_tol * (1.0 + target.norm()) {
                    done = Some((zn, bpn, xi + dxi));
                    break;
                }
                zn -= res / fzn;
            }
            match done {
                Some(v) => break v,
                None => h *= 0.5,
            }
        };

        left_start |= (z - z_first).norm() > 10.0 * ctl.close_tol * chart.scale;
        if left_start {
            let back = segment_distance(z_first, z, z1);
            let heading = (z1 - z) * (samples[1] - samples[0]).conj();
            if back < ctl.close_tol * chart.scale && heading.re > 0.0 {
                samples.push(z_first);
                xis.push(xi1);
                return Ok(finish(samples, xis, Termination::Closed));
            }
        }
        length += (xi1 - xi).norm();
        xi = xi1;
        bp = bp1;
        samples.push(z1);
        xis.push(xi1);
    }
    Ok(finish(samples, xis, Termination::StepLimit))
}

/// Starts a trajectory at the critical point `crit[index]` heading initially
/// along `angle`.
fn trace_from_critical(
    chart: &QuadDiffChart,
    index: usize,
    angle: f64,
    kind: TrajectoryKind,
    ctl: &TraceControls,
) -> Result<Trajectory> {
    let f = chart.multipower();
    let crit = chart.critical_points();
    let c = crit[index];
    let others = crit
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != index)
        .map(|(_, p)| (p - c).norm())
        .fold(f64::INFINITY, f64::min);
    let r0 = (0.02 * others).min(0.01 * chart.scale);
    let start = f.singular_start(c, chart.base_branch().coef);
    let opts = chart.quad_options();
    let z = c + C64::from_polar(r0, angle);
    let (mut xi, mut bp) = f.integrate_segment(&start, z, &opts)?;
    let t = kind.param(xi);
    let target = kind.xi_direction() * t;
    // corrections continue the branch locally, so they never jump sheets
    let mut found = None;
    for _ in 0..50 {
        let res = xi - target;
        if res.norm() <= 1e-14 * (1.0 + t.abs()) {
            found = Some((xi, bp.clone()));
            break;
        }
        let zn = bp.z - res / bp.value(f);
        if (zn - c).norm() > 5.0 * r0 || (zn - c).norm() < 0.05 * r0 {
            break;
        }
        let (dxi, next) = f.integrate_segment(&bp, zn, &opts)?;
        xi += dxi;
        bp = next;
    }
    let (xi1, bp1) = found.ok_or(LameError::NonConvergence { what: "critical trajectory start", iterations: 50 })?;
    let dir = kind.param(xi1).signum();
    trace_from(chart, bp1, xi1, vec![(c, C64::new(0.0, 0.0))], kind, dir, Some(index), ctl)
}

/// Initial angles of the trajectories of `kind` leaving the critical point
/// `crit[index]`: three at a simple zero of `V`, one at a simple pole.
pub fn critical_directions(chart: &QuadDiffChart, index: usize, kind: TrajectoryKind) -> Vec<f64> {
    let nv = chart.v_zeros.len();
    let crit = chart.critical_points();
    let c = crit[index];
    let shift = match kind {
        TrajectoryKind::Horizontal => PI / 2.0,
        TrajectoryKind::Vertical => 0.0,
    };
    if index < nv {
        let arg_c = (chart.v.derivative().eval(c) / chart.a.eval(c)).sqrt().arg();
        (0..3).map(|k| (2.0 / 3.0) * (shift - arg_c) + 2.0 * PI * k as f64 / 3.0).collect()
    } else {
        let arg_c = (chart.v.eval(c) / chart.a.derivative().eval(c)).sqrt().arg();
        vec![2.0 * (shift - arg_c)]
    }
}

/// All horizontal trajectories leaving the zeros of `V` and the poles.
pub fn critical_graph(chart: &QuadDiffChart, ctl: &TraceControls) -> Result<Vec<Trajectory>> {
    let crit = chart.critical_points();
    let tol = 1e-9 * chart.scale;
    for (i, a) in crit.iter().enumerate() {
        for b in &crit[i + 1..] {
            if (a - b).norm() < tol {
                return Err(LameError::DegenerateInstance(format!("critical points coincide near {}", fmt_c(*a))));
            }
        }
    }
    let jobs: Vec<(usize, f64)> = (0..crit.len())
        .flat_map(|i| critical_directions(chart, i, TrajectoryKind::Horizontal).into_iter().map(move |t| (i, t)))
        .collect();
    jobs.par_iter()
        .map(|&(i, t)| trace_from_critical(chart, i, t, TrajectoryKind::Horizontal, ctl))
        .collect()
}

/// Trajectories of `kind` leaving one critical point.
pub fn trajectories_from(chart: &QuadDiffChart, index: usize, kind: TrajectoryKind, ctl: &TraceControls) -> Result<Vec<Trajectory>> {
    critical_directions(chart, index, kind)
        .into_iter()
        .map(|t| trace_from_critical(chart, index, t, kind, ctl))
        .collect()
}

/// Critical arcs joining two critical points, each geometric arc once.
pub fn support_arcs(chart: &QuadDiffChart, graph: &[Trajectory]) -> Vec<Trajectory> {
    let crit = chart.critical_points();
    let tol = 1e-9 * chart.scale;
    let starts_critical = |t: &Trajectory| crit.iter().any(|&c| (c - t.samples[0]).norm() <= tol);
    let mut out: Vec<Trajectory> = Vec::new();
    for t in graph {
        if !matches!(t.termination, Termination::CriticalPoint { .. }) || !starts_critical(t) {
            continue;
        }
        let mid = t.samples[t.samples.len() / 2];
        let dup = out.iter().any(|u| {
            (u.end() - t.samples[0]).norm() <= tol && (u.samples[0] - t.end()).norm() <= tol && u.distance_to(mid) <= 1e-6 * chart.scale
        });
        if !dup {
            out.push(t.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn legendre() -> QuadDiffChart {
        QuadDiffChart::normalized(&Poly::from_real(&[1.0]), &Poly::from_real(&[-1.0, 0.0, 1.0])).unwrap()
    }

    #[test]
    fn arcsine_lengths() {
        let ch = legendre();
        assert!((ch.omega_length(&[c(-1.0, 0.0), c(1.0, 0.0)]).unwrap() - 1.0).abs() < 1e-12);
        assert!((ch.omega_length(&[c(-1.0, 0.0), c(0.0, 0.0)]).unwrap() - 0.5).abs() < 1e-12);
        for x in [-0.5f64, 0.0, 0.5] {
            let l = ch.omega_length(&[c(-1.0, 0.0), c(x, 0.0)]).unwrap();
            assert!((l - (PI - x.acos()) / PI).abs() < 1e-11);
        }
        assert_eq!(ch.omega_length(&[c(0.3, 0.1)]).unwrap(), 0.0);
    }

    #[test]
    fn normalization_and_additivity() {
        let ch = legendre();
        let z = c(1e4, 3.0);
        let s = ch.base_branch().value(ch.multipower());
        assert!((ch.z0 * s - 1.0).norm() < 1e-2);
        let far = ch.branch_along(&[z]).unwrap().value(ch.multipower());
        assert!((z * far - 1.0).norm() < 1e-6);
        assert_eq!(ch.xi(ch.z0, &[]).unwrap(), c(0.0, 0.0));
        let p = c(0.4, 2.0);
        let q = c(-2.0, -0.5);
        let direct = ch.xi(q, &[p]).unwrap();
        let (x1, b1) = ch.xi_with_branch(p, &[]).unwrap();
        let (x2, _) = ch.multipower().integrate_segment(&b1, q, &ch.quad_options()).unwrap();
        assert!((direct - x1 - x2).norm() < 1e-12);
        // homotopic detours agree
        let alt = ch.xi(q, &[p, c(-1.0, 3.0)]).unwrap();
        assert!((alt - direct).norm() < 1e-10);
    }

    #[test]
    fn legendre_trajectories() {
        let ch = legendre();
        let ctl = TraceControls::default();
        let mut ends = vec![];
        for dir in [1, -1] {
            let t = trace_trajectory(&ch, c(0.0, 0.0), TrajectoryKind::Horizontal, dir, &ctl).unwrap();
            assert!(matches!(t.termination, Termination::CriticalPoint { .. }));
            assert!(t.samples.iter().all(|z| z.im.abs() < 1e-9));
            assert!(t.level_deviation() < 1e-9);
            assert!((t.omega_length - 0.5).abs() < 1e-9);
            ends.push(t.end().re);
        }
        ends.sort_by(f64::total_cmp);
        assert_eq!(ends, vec![-1.0, 1.0]);
        let t = trace_trajectory(&ch, c(0.0, 0.0), TrajectoryKind::Vertical, 1, &ctl).unwrap();
        assert_eq!(t.termination, Termination::Unbounded);
        assert!(t.samples.iter().all(|z| z.re.abs() < 1e-9));
    }

    #[test]
    fn equilateral_star() {
        let a = Poly::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        let v = Poly::from_real(&[0.0, 1.0]);
        let ch = QuadDiffChart::normalized(&v, &a).unwrap();
        let ctl = TraceControls::default();
        let star = trajectories_from(&ch, 0, TrajectoryKind::Horizontal, &ctl).unwrap();
        assert_eq!(star.len(), 3);
        let mut hit = vec![];
        for t in &star {
            match t.termination {
                Termination::CriticalPoint { point, .. } => {
                    assert!((point.powi(3) - 1.0).norm() < 1e-6);
                    hit.push(point);
                }
                other => panic!("unexpected {other:?}"),
            }
            assert!((t.omega_length - 1.0 / 3.0).abs() < 1e-8);
            assert!(t.level_deviation() < 1e-9);
        }
        hit.sort_by(|x, y| x.arg().total_cmp(&y.arg()));
        assert!((hit[0] - hit[1]).norm() > 1.0 && (hit[1] - hit[2]).norm() > 1.0);
        let graph = critical_graph(&ch, &ctl).unwrap();
        assert_eq!(graph.len(), 6);
    }

    #[test]
    fn start_at_singularity_rejected() {
        let ch = legendre();
        assert!(matches!(
            trace_trajectory(&ch, c(1.0, 0.0), TrajectoryKind::Horizontal, 1, &TraceControls::default()),
            Err(LameError::StartAtSingularity(_))
        ));
    }
}
