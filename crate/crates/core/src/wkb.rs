//! Strong asymptotics `Q ~ kappa H zeta^lambda`, the Van Vleck lattice for
//! three poles, zero spacing along the carrying arcs, and the limit measure
//! `dmu = (1/pi) |sqrt(V/A)| |dz|` with its logarithmic potential.
//!
//! Throughout, `H = prod (z - a_k)^{1/4 - rho_k/2} prod (z - v_j)^{-1/4}`,
//! which is `(A/V)^{1/4} exp(-int B/2A)` for the antiderivative
//! `sum (rho_k/2) log(z - a_k)`. Both `V` and `Q` are monic.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch::{BranchPoint, Factor, MultiPower};
use crate::error::{fmt_c, LameError, Result};
use crate::hs::SolveReport;
use crate::lame::{diameter, LameOperator};
use crate::periods::{ell_arc, is_closed, solve_germ, star_cycles, w_germ, ChebotarevData, CycleSpec};
use crate::poly::Poly;
use crate::quad_diff::{critical_graph, support_arcs, QuadDiffChart, TraceControls, Trajectory};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Controls used to find the zero-carrying arcs of a finite-`n` differential.
pub fn support_controls() -> TraceControls {
    TraceControls { max_omega_length: 3.0, ..TraceControls::default() }
}

/// Evaluates `H` and `zeta = exp(xi)` for one operator and one `V`.
#[derive(Clone, Debug)]
pub struct WkbEvaluator {
    pub op: LameOperator,
    pub v: Poly,
    pub chart: QuadDiffChart,
    /// Where the branches of `H` and `xi` are principal; the chart's base point.
    pub gauge_base: C64,
    /// Critical arcs of the chart joining two critical points.
    pub support: Vec<Trajectory>,
    h: MultiPower,
    h_base: BranchPoint,
    xi_shift: C64,
}

impl WkbEvaluator {
    pub fn new(op: &LameOperator, v: &Poly) -> Result<Self> {
        Self::with_controls(op, v, &support_controls())
    }

    pub fn with_controls(op: &LameOperator, v: &Poly, ctl: &TraceControls) -> Result<Self> {
        if v.is_zero() || v.degree() + 1 != op.p {
            return Err(LameError::DegreeError(format!("V must have degree {}", op.p.saturating_sub(1))));
        }
        let v = v.monic();
        let v_zeros = if v.degree() >= 1 { v.roots(1e-14)? } else { Vec::new() };
        let chart = QuadDiffChart::reduced(&v_zeros, &op.poles)?;
        let gauge_base = chart.z0;

        let quarter = C64::new(0.25, 0.0);
        let factors = op
            .poles
            .iter()
            .zip(&op.rho)
            .map(|(&a, &r)| Factor { root: a, power: quarter - r * 0.5 })
            .chain(v_zeros.iter().map(|&z| Factor { root: z, power: -quarter }))
            .collect();
        let h = MultiPower::new(factors, chart.multipower().sing_tol);
        let h_base = h.principal_at(gauge_base, C64::new(1.0, 0.0))?;

        // xi + shift - log z -> 0 along the ray through z0.
        let far: Vec<C64> = (1..=16).map(|k| chart.z0 * 4f64.powi(k)).collect();
        let xi_far = chart.xi(*far.last().unwrap(), &far[..far.len() - 1])?;
        let xi_shift = far.last().unwrap().ln() - xi_far;

        let graph = critical_graph(&chart, ctl)?;
        let support = support_arcs(&chart, &graph);
        Ok(WkbEvaluator { op: op.clone(), v, chart, gauge_base, support, h, h_base, xi_shift })
    }

    fn route(&self, z: C64, via: Option<&[C64]>) -> Vec<C64> {
        let mut path = match via {
            Some(v) => v.to_vec(),
            None => self.chart.default_path(z),
        };
        path.push(z);
        path
    }

    /// `log H(z)` continued along `gauge_base -> via -> z` (default route if `None`).
    pub fn log_h(&self, z: C64, via: Option<&[C64]>) -> Result<C64> {
        let bp = self.h.advance_path(&self.h_base, &self.route(z, via))?;
        if !bp.is_regular() {
            return Err(LameError::SingularPoint(fmt_c(z)));
        }
        Ok((0..self.h.factors.len()).map(|j| self.h.factors[j].power * bp.log_of(j).unwrap()).sum())
    }

    pub fn h(&self, z: C64, via: Option<&[C64]>) -> Result<C64> {
        Ok(self.log_h(z, via)?.exp())
    }

    /// `xi` normalized so that `xi(z) - log z -> 0` at infinity.
    pub fn xi(&self, z: C64, via: Option<&[C64]>) -> Result<C64> {
        let route = self.route(z, via);
        Ok(self.chart.xi(z, &route[..route.len() - 1])? + self.xi_shift)
    }

    /// `log (H zeta^lambda)` along the default route.
    pub fn log_wkb(&self, z: C64) -> Result<C64> {
        Ok(self.log_h(z, None)? + self.op.lambda_n * self.xi(z, None)?)
    }

    /// Distance to the support arcs, the critical points and `extra` points.
    pub fn support_distance(&self, z: C64, extra: &[C64]) -> f64 {
        let arcs = self.support.iter().map(|t| t.distance_to(z));
        let pts = self.chart.critical_points().into_iter().chain(extra.iter().copied()).map(|p| (p - z).norm());
        arcs.chain(pts).fold(f64::INFINITY, f64::min)
    }

    fn check_points(&self, q_zeros: &[C64], points: &[C64], min_dist: f64) -> Result<()> {
        for &z in points {
            let d = self.support_distance(z, q_zeros);
            if d < min_dist {
                return Err(LameError::TestPointTooClose(format!("{} is {d:.3e} from the support", fmt_c(z))));
            }
        }
        Ok(())
    }
}

fn log_monic(zeros: &[C64], z: C64) -> C64 {
    zeros.iter().map(|&r| (z - r).ln()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongReport {
    /// `max |Q / (kappa H zeta^lambda) - 1|` at the fitted `kappa`.
    pub error: f64,
    pub log_kappa: C64,
    pub points: Vec<C64>,
}

/// Minimizes a function of two variables by Nelder-Mead.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64, iters: usize) -> [f64; 2] {
    let mut s = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut fs = s.map(|x| f(x));
    for _ in 0..iters {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        let c = [(s[b][0] + s[m][0]) / 2.0, (s[b][1] + s[m][1]) / 2.0];
        let at = |t: f64| [c[0] + t * (s[w][0] - c[0]), c[1] + t * (s[w][1] - c[1])];
        let r = at(-1.0);
        let fr = f(r);
        if fr < fs[b] {
            let e = at(-2.0);
            let fe = f(e);
            (s[w], fs[w]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < fs[m] {
            (s[w], fs[w]) = (r, fr);
        } else {
            let k = at(0.5);
            let fk = f(k);
            if fk < fs[w] {
                (s[w], fs[w]) = (k, fk);
            } else {
                for j in [m, w] {
                    s[j] = [(s[j][0] + s[b][0]) / 2.0, (s[j][1] + s[b][1]) / 2.0];
                    fs[j] = f(s[j]);
                }
            }
        }
    }
    let b = (0..3).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
    s[b]
}

/// Fits `u` minimizing `max |u r_i - 1|`, a convex problem in `u = 1/kappa`.
fn fit_inverse_kappa(r: &[C64]) -> (C64, f64) {
    let g = |u: [f64; 2]| r.iter().map(|&x| (C64::new(u[0], u[1]) * x - 1.0).norm()).fold(0.0, f64::max);
    let mean = r.iter().sum::<C64>() / r.len() as f64;
    let u0 = 1.0 / mean;
    let mut u = [u0.re, u0.im];
    for step in [0.1, 0.01, 1e-3, 1e-4] {
        u = nelder_mead(g, u, step * C64::new(u[0], u[1]).norm().max(1e-300), 400);
    }
    (C64::new(u[0], u[1]), g(u))
}

/// Fitted deviation of the monic `Q` with zeros `q_zeros` from the strong
/// formula at `points`, each at least `min_dist` away from the support.
pub fn strong_error(ev: &WkbEvaluator, q_zeros: &[C64], points: &[C64], min_dist: f64) -> Result<StrongReport> {
    if points.is_empty() {
        return Err(LameError::InvalidInput("no test points".into()));
    }
    ev.check_points(q_zeros, points, min_dist)?;
    let logs: Vec<C64> = points.iter().map(|&z| Ok(log_monic(q_zeros, z) - ev.log_wkb(z)?)).collect::<Result<_>>()?;
    let shift = logs.iter().sum::<C64>() / logs.len() as f64;
    let r: Vec<C64> = logs.iter().map(|l| (l - shift).exp()).collect();
    let (u, error) = fit_inverse_kappa(&r);
    Ok(StrongReport { error, log_kappa: shift - u.ln(), points: points.to_vec() })
}

/// `max | |Q(z)|^{1/n} - exp(Re xi(z)) |` over `points`.
pub fn nth_root_check(ev: &WkbEvaluator, q_zeros: &[C64], points: &[C64], min_dist: f64) -> Result<f64> {
    if q_zeros.is_empty() {
        return Err(LameError::InvalidInput("Q must have positive degree".into()));
    }
    ev.check_points(q_zeros, points, min_dist)?;
    let n = q_zeros.len() as f64;
    let mut worst: f64 = 0.0;
    for &z in points {
        let lhs = (log_monic(q_zeros, z).re / n).exp();
        let rhs = ev.xi(z, None)?.re.exp();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcZeroCount {
    pub arc: usize,
    pub count: usize,
    pub omega_length: f64,
    /// `|lambda| * omega_length`.
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    /// Consecutive phase gaps `|Im(lambda (xi_{j+1} - xi_j))|` along each arc.
    pub gaps: Vec<f64>,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    /// Fraction of gaps in `[0.9 pi, 1.1 pi]`.
    pub fraction_within_10pct: f64,
    pub arcs: Vec<ArcZeroCount>,
}

/// `xi` along a support arc, rebuilt from its first (critical) sample.
struct ArcChart {
    xi: Vec<C64>,
    bps: Vec<BranchPoint>,
}

fn arc_chart(chart: &QuadDiffChart, arc: &Trajectory) -> Result<ArcChart> {
    let f = chart.multipower();
    let opts = chart.quad_options();
    let mut bp = f.singular_start(arc.samples[0], chart.base_branch().coef);
    let mut xi = vec![C64::new(0.0, 0.0)];
    let mut bps = vec![bp.clone()];
    let last = arc.samples.len() - 1;
    for (i, &z) in arc.samples.iter().enumerate().skip(1) {
        if i == last {
            break;
        }
        let (d, next) = f.integrate_segment(&bp, z, &opts)?;
        xi.push(xi.last().unwrap() + d);
        bp = next;
        bps.push(bp.clone());
    }
    Ok(ArcChart { xi, bps })
}

fn xi_on_arc(chart: &QuadDiffChart, arc: &Trajectory, ac: &ArcChart, z: C64) -> Result<C64> {
    let mut order: Vec<usize> = (1..ac.bps.len()).collect();
    order.sort_by(|&a, &b| (arc.samples[a] - z).norm().total_cmp(&(arc.samples[b] - z).norm()));
    let opts = chart.quad_options();
    for &i in order.iter().take(4) {
        if let Ok((d, _)) = chart.multipower().integrate_segment(&ac.bps[i], z, &opts) {
            return Ok(ac.xi[i] + d);
        }
    }
    Err(LameError::ArcAssignmentFailed(format!("no clear segment from the arc to {}", fmt_c(z))))
}

/// Orders the zeros along the support arcs of the evaluator's chart and
/// measures consecutive phase gaps `lambda Delta xi`, which should be `pi`.
pub fn zero_phase_check(ev: &WkbEvaluator, q_zeros: &[C64]) -> Result<PhaseReport> {
    let chart = &ev.chart;
    let lam = ev.op.lambda_n;
    let arcs: Vec<&Trajectory> = ev.support.iter().filter(|t| t.samples.len() >= 3).collect();
    let mut assigned: Vec<Vec<C64>> = vec![Vec::new(); arcs.len()];
    for &z in q_zeros {
        let best = arcs
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t.distance_to(z)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, d)) if d <= 0.1 * chart.scale() => assigned[i].push(z),
            _ => return Err(LameError::ArcAssignmentFailed(format!("zero {} is far from every support arc", fmt_c(z)))),
        }
    }

    let per_arc: Vec<Result<(Vec<f64>, ArcZeroCount)>> = arcs
        .par_iter()
        .enumerate()
        .map(|(i, arc)| {
            let count = ArcZeroCount { arc: i, count: assigned[i].len(), omega_length: arc.omega_length, expected: lam.norm() * arc.omega_length };
            if assigned[i].len() < 2 {
                return Ok((Vec::new(), count));
            }
            let ac = arc_chart(chart, arc)?;
            let mut xs: Vec<C64> = assigned[i].iter().map(|&z| xi_on_arc(chart, arc, &ac, z)).collect::<Result<_>>()?;
            xs.sort_by(|a, b| a.im.total_cmp(&b.im));
            let gaps = xs.windows(2).map(|w| (lam * (w[1] - w[0])).im.abs()).collect();
            Ok((gaps, count))
        })
        .collect();
    let mut gaps = Vec::new();
    let mut counts = Vec::new();
    for r in per_arc {
        let (g, c) = r?;
        gaps.extend(g);
        counts.push(c);
    }
    let devs: Vec<f64> = gaps.iter().map(|g| (g - PI).abs()).collect();
    let (mean_deviation, max_deviation, fraction_within_10pct) = if gaps.is_empty() {
        (0.0, 0.0, 1.0)
    } else {
        let n = gaps.len() as f64;
        (
            devs.iter().sum::<f64>() / n,
            devs.iter().copied().fold(0.0, f64::max),
            devs.iter().filter(|&&d| d <= 0.1 * PI).count() as f64 / n,
        )
    };
    Ok(PhaseReport { gaps, mean_deviation, max_deviation, fraction_within_10pct, arcs: counts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeEntry {
    pub k: usize,
    pub m: usize,
    pub v_pred: C64,
    /// `|lambda w_k(v_pred) - m - B(a_k)/(2 A'(a_k))|`.
    pub w_residual: f64,
    pub excluded: bool,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedLattice {
    pub entries: Vec<LatticeEntry>,
    pub epsilon: f64,
    pub n: usize,
    pub exclusion_radius: f64,
    pub v_star: C64,
}

/// Default exclusion radius around the center: a tenth of the pole diameter.
pub fn default_exclusion(poles: &[C64]) -> f64 {
    0.1 * diameter(poles)
}

fn rho_offset(op: &LameOperator, k: usize) -> C64 {
    op.rho[k] * 0.5
}

/// Solves `w_k(v) = (m + B(a_k)/(2A'(a_k)))/lambda_n` for every arc `k` and
/// `m = 0 ..= floor(M_k n (1 - epsilon))`, seeding Newton from the arc `l_k`.
pub fn predict_lattice_p2(op: &LameOperator, cheb: &ChebotarevData, epsilon: f64, exclusion_radius: Option<f64>) -> Result<PredictedLattice> {
    if op.p != 2 {
        return Err(LameError::InvalidInput("the lattice is implemented for three poles".into()));
    }
    let n = op.n;
    let lam = op.lambda_n;
    let radius = exclusion_radius.unwrap_or_else(|| default_exclusion(&op.poles));
    let mut jobs = Vec::new();
    let mut arcs = Vec::new();
    for k in 0..3 {
        let mk = cheb.m[k];
        if mk <= 1e-12 {
            arcs.push(Vec::new());
            continue;
        }
        let samples = (4.0 * mk * n as f64) as usize + 16;
        arcs.push(ell_arc(&op.poles, cheb, k, samples)?);
        let top = (mk * n as f64 * (1.0 - epsilon)).floor() as usize;
        jobs.extend((0..=top).map(|m| (k, m)));
    }
    let entries = jobs
        .par_iter()
        .map(|&(k, m)| {
            let target = (C64::new(m as f64, 0.0) + rho_offset(op, k)) / lam;
            let seed = arcs[k].iter().min_by(|a, b| (a.w - target).norm().total_cmp(&(b.w - target).norm())).unwrap().v;
            let solved = solve_germ(&op.poles, k, target, seed, 1e-13 / lam.norm().max(1.0));
            let (v_pred, converged) = match solved {
                Ok(v) => (v, true),
                Err(_) => (seed, false),
            };
            let w_residual = match w_germ(&op.poles, k, v_pred, &[]) {
                Ok(w) => (lam * w - m as f64 - rho_offset(op, k)).norm(),
                Err(_) => f64::INFINITY,
            };
            LatticeEntry { k, m, v_pred, w_residual, excluded: (v_pred - cheb.v_star).norm() <= radius, converged }
        })
        .collect();
    Ok(PredictedLattice { entries, epsilon, n, exclusion_radius: radius, v_star: cheb.v_star })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeMatch {
    pub exact_v: C64,
    pub entry: usize,
    pub dv: f64,
    /// `lambda w_k(v_exact) - m - B(a_k)/(2A'(a_k))`.
    pub delta: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub matches: Vec<LatticeMatch>,
    pub unmatched_exact: Vec<C64>,
    /// Indices of lattice entries without an exact partner.
    pub unmatched_pred: Vec<usize>,
    /// `max n |delta|` over matches farther than the exclusion radius from the center.
    pub c_estimate: f64,
    /// Matched share of the lattice entries outside the exclusion radius.
    pub matched_fraction: f64,
}

/// Matches exact Van Vleck zeros to lattice entries. Each entry owns a disk of
/// half its nearest-neighbour distance; the disks are disjoint, so taking the
/// closest exact zero inside each disk is an optimal matching.
pub fn compare(op: &LameOperator, exact: &SolveReport, lattice: &PredictedLattice) -> ComparisonReport {
    let lam = op.lambda_n;
    let exact_v: Vec<C64> = exact.pairs.iter().filter_map(|p| p.vv_zeros.first().copied()).collect();
    let pts: Vec<C64> = lattice.entries.iter().map(|e| e.v_pred).collect();
    let cutoff: Vec<f64> = (0..pts.len())
        .map(|i| {
            let nn = (0..pts.len()).filter(|&j| j != i).map(|j| (pts[i] - pts[j]).norm()).fold(f64::INFINITY, f64::min);
            if nn.is_finite() {
                0.5 * nn
            } else {
                0.5 * diameter(&op.poles)
            }
        })
        .collect();
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; exact_v.len()];
    let mut taken = vec![false; pts.len()];
    for (e, &p) in pts.iter().enumerate() {
        let best = exact_v
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, (v - p).norm()))
            .filter(|&(i, d)| d < cutoff[e] && owner[i].map_or(true, |(_, od)| d < od))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, d)) = best {
            if let Some((old, _)) = owner[i] {
                taken[old] = false;
            }
            owner[i] = Some((e, d));
            taken[e] = true;
        }
    }
    let mut matches = Vec::new();
    let mut unmatched_exact = Vec::new();
    let mut c_estimate: f64 = 0.0;
    for (i, &v) in exact_v.iter().enumerate() {
        match owner[i] {
            Some((e, dv)) => {
                let entry = &lattice.entries[e];
                let delta = match w_germ(&op.poles, entry.k, v, &[]) {
                    Ok(w) => lam * w - entry.m as f64 - rho_offset(op, entry.k),
                    Err(_) => C64::new(f64::NAN, f64::NAN),
                };
                if (v - lattice.v_star).norm() > lattice.exclusion_radius && delta.norm().is_finite() {
                    c_estimate = c_estimate.max(lattice.n as f64 * delta.norm());
                }
                matches.push(LatticeMatch { exact_v: v, entry: e, dv, delta });
            }
            None => unmatched_exact.push(v),
        }
    }
    matches.sort_by_key(|m| m.entry);
    let unmatched_pred: Vec<usize> = (0..pts.len()).filter(|&e| !taken[e]).collect();
    let outside: Vec<usize> = (0..pts.len()).filter(|&e| !lattice.entries[e].excluded).collect();
    let matched_fraction = if outside.is_empty() { 1.0 } else { outside.iter().filter(|&&e| taken[e]).count() as f64 / outside.len() as f64 };
    ComparisonReport { matches, unmatched_exact, unmatched_pred, c_estimate, matched_fraction }
}

/// A piece of the measure: uniform mass on the segment `a -> b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chord {
    pub a: C64,
    pub b: C64,
    pub mass: f64,
    pub arc: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSample {
    pub support: Vec<Trajectory>,
    /// `(1/pi)|sqrt(V/A)|` averaged over each chord of each arc.
    pub density: Vec<Vec<f64>>,
    pub total_mass: f64,
    pub chords: Vec<Chord>,
    /// Index of the connected component containing each arc.
    pub component: Vec<usize>,
}

fn components(arcs: &[Trajectory], tol: f64) -> Vec<usize> {
    let n = arcs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let ends = |t: &Trajectory| [t.samples[0], t.end()];
    for i in 0..n {
        for j in i + 1..n {
            if ends(&arcs[i]).iter().any(|x| ends(&arcs[j]).iter().any(|y| (x - y).norm() <= tol)) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut labels: Vec<usize> = Vec::new();
    roots
        .iter()
        .map(|r| match labels.iter().position(|x| x == r) {
            Some(k) => k,
            None => {
                labels.push(*r);
                labels.len() - 1
            }
        })
        .collect()
}

const MAX_CHORD_MASS: f64 = 2e-3;

/// Splits `a -> b` into `k` pieces of nearly equal mass. Next to a pole the
/// mass grows like `r^{1/2}`, next to a simple zero of `V` like `r^{3/2}`.
fn graded_split(chart: &QuadDiffChart, a: C64, b: C64, k: usize) -> Vec<(C64, C64)> {
    let near = |z: C64, pts: &[C64]| pts.iter().any(|&p| (p - z).norm() <= chart.multipower().sing_tol);
    let grade = |z: C64| {
        if near(z, &chart.poles) {
            Some(2.0)
        } else if near(z, &chart.v_zeros) {
            Some(2.0 / 3.0)
        } else {
            None
        }
    };
    let (from, to, power, flip) = match (grade(a), grade(b)) {
        (Some(g), _) => (a, b, g, false),
        (None, Some(g)) => (b, a, g, true),
        _ => (a, b, 1.0, false),
    };
    let nodes: Vec<C64> = (0..=k).map(|j| from + (to - from) * (j as f64 / k as f64).powf(power)).collect();
    let mut pieces: Vec<(C64, C64)> = nodes.windows(2).map(|w| (w[0], w[1])).collect();
    if flip {
        pieces = pieces.into_iter().rev().map(|(x, y)| (y, x)).collect();
    }
    pieces
}

/// The measure `(1/pi)|sqrt(V/A)||dz|` on the critical arcs of a closed
/// chart. `cycles` defaults to the star arms for up to three poles.
pub fn measure_from_qd(chart: &QuadDiffChart, graph: &[Trajectory], cycles: Option<&[CycleSpec]>) -> Result<MeasureSample> {
    let p = chart.poles.len() - 1;
    let default_cycles;
    let cycles = match cycles {
        Some(c) => c,
        None if p <= 2 => {
            default_cycles = if p == 2 { star_cycles(2) } else { Vec::new() };
            &default_cycles[..]
        }
        None => return Err(LameError::InvalidInput("closedness cycles are required for more than three poles".into())),
    };
    let closed = is_closed(chart, cycles, 1e-6)?;
    if !closed.closed {
        return Err(LameError::NotClosed(format!("periods with imaginary parts {:?}", closed.witnesses)));
    }
    let support = support_arcs(chart, graph);
    let mut chords = Vec::new();
    let mut density = Vec::new();
    for (i, t) in support.iter().enumerate() {
        let mut dens = Vec::with_capacity(t.samples.len() - 1);
        for j in 1..t.samples.len() {
            let (a, b) = (t.samples[j - 1], t.samples[j]);
            let mass = (t.xi_values[j] - t.xi_values[j - 1]).norm() / PI;
            let len = (b - a).norm();
            dens.push(if len > 0.0 { mass / len } else { 0.0 });
            if mass <= MAX_CHORD_MASS {
                chords.push(Chord { a, b, mass, arc: i });
                continue;
            }
            for (x, y) in graded_split(chart, a, b, (mass / MAX_CHORD_MASS).ceil() as usize) {
                chords.push(Chord { a: x, b: y, mass: chart.omega_length(&[x, y])?, arc: i });
            }
        }
        density.push(dens);
    }
    let total_mass = support.iter().map(|t| t.omega_length).sum();
    let component = components(&support, 1e-9 * chart.scale());
    Ok(MeasureSample { support, density, total_mass, chords, component })
}

fn entropy_term(w: C64, lw: C64) -> C64 {
    if w.norm() == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        w * lw - w
    }
}

/// `int_0^1 ln|z - a - d u| du` in closed form.
fn chord_log_integral(z: C64, c: &Chord) -> f64 {
    let d = c.b - c.a;
    let w0 = z - c.a;
    let w1 = z - c.b;
    if d.norm() == 0.0 {
        return w0.norm().ln();
    }
    if w0.norm() == 0.0 || w1.norm() == 0.0 {
        return d.norm().ln() - 1.0;
    }
    let l0 = w0.ln();
    let l1 = l0 + (w1 / w0).ln();
    ((entropy_term(w0, l0) - entropy_term(w1, l1)) / d).re
}

/// `U(z) = -int ln|z - t| dmu(t)`.
pub fn potential(ms: &MeasureSample, z: C64) -> f64 {
    -ms.chords.iter().map(|c| c.mass * chord_log_integral(z, c)).sum::<f64>()
}

/// Gradient of `U` as `U_x + i U_y`, with the principal value on chord `own`.
fn potential_gradient(ms: &MeasureSample, z: C64, own: Option<usize>) -> C64 {
    let mut g = C64::new(0.0, 0.0);
    for (i, c) in ms.chords.iter().enumerate() {
        let d = c.b - c.a;
        if d.norm() == 0.0 {
            continue;
        }
        let ratio = (z - c.b) / (z - c.a);
        let l = if Some(i) == own { C64::new(ratio.norm().ln(), 0.0) } else { ratio.ln() };
        g += c.mass * l / d;
    }
    g.conj()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialProbe {
    pub arc: usize,
    pub z: C64,
    pub potential: f64,
    /// `|dU/dn_+ - dU/dn_-|` with each normal pointing away from the arc.
    pub normal_mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub probes: Vec<PotentialProbe>,
    /// `max U - min U` over the probes of each support component.
    pub component_variation: Vec<f64>,
    pub max_variation: f64,
    pub max_normal_mismatch: f64,
    /// `E = int int ln(1/|z - t|) dmu dmu`.
    pub energy: f64,
}

/// Probes every arc at `probes_per_arc` points evenly spaced in mass.
pub fn potential_checks(ms: &MeasureSample, probes_per_arc: usize) -> PotentialReport {
    let mut targets = Vec::new();
    for arc in 0..ms.support.len() {
        let idx: Vec<usize> = (0..ms.chords.len()).filter(|&i| ms.chords[i].arc == arc).collect();
        let total: f64 = idx.iter().map(|&i| ms.chords[i].mass).sum();
        for j in 0..probes_per_arc {
            let goal = total * (j as f64 + 0.5) / probes_per_arc as f64;
            let mut acc = 0.0;
            let mut pick = *idx.last().unwrap_or(&0);
            for &i in &idx {
                acc += ms.chords[i].mass;
                if acc >= goal {
                    pick = i;
                    break;
                }
            }
            if !idx.is_empty() {
                targets.push((arc, pick));
            }
        }
    }
    let probes: Vec<PotentialProbe> = targets
        .par_iter()
        .map(|&(arc, i)| {
            let c = &ms.chords[i];
            let z = (c.a + c.b) * 0.5;
            let d = c.b - c.a;
            let normal = I * d / d.norm();
            let g = potential_gradient(ms, z, Some(i));
            PotentialProbe { arc, z, potential: potential(ms, z), normal_mismatch: 2.0 * (g * normal.conj()).re.abs() }
        })
        .collect();
    let ncomp = ms.component.iter().copied().max().map_or(0, |m| m + 1);
    let component_variation: Vec<f64> = (0..ncomp)
        .map(|k| {
            let vals: Vec<f64> = probes.iter().filter(|p| ms.component[p.arc] == k).map(|p| p.potential).collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min)
            }
        })
        .collect();
    let energy = ms.chords.par_iter().map(|c| c.mass * potential(ms, (c.a + c.b) * 0.5)).sum();
    PotentialReport {
        max_variation: component_variation.iter().copied().fold(0.0, f64::max),
        max_normal_mismatch: probes.iter().map(|p| p.normal_mismatch).fold(0.0, f64::max),
        probes,
        component_variation,
        energy,
    }
}

/// Finer tracing for measures: potentials need short chords.
pub fn measure_controls() -> TraceControls {
    TraceControls { max_xi_step: 0.005, max_z_step: 0.005, ..TraceControls::default() }
}

/// Convenience: measure of the closed chart `(V, A)` with its critical graph.
pub fn measure_of_chart(chart: &QuadDiffChart, cycles: Option<&[CycleSpec]>) -> Result<MeasureSample> {
    let graph = critical_graph(chart, &measure_controls())?;
    measure_from_qd(chart, &graph, cycles)
}
