//! The pipelines behind each subcommand, usable without the binary.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use lame_core::hs::{solve_all, HSPair, MultiStartOptions};
use lame_core::periods::chebotarev_center;
use lame_core::quad_diff::{critical_graph, trace_trajectory, QuadDiffChart, Trajectory};
use lame_core::wkb::{compare, predict_lattice_p2, support_controls};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::config::ModelConfig;
use crate::json::*;
use crate::svg::FigureModel;

/// Outcome of a run that did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Fewer solutions than the expected count.
    Shortfall,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Complete => 0,
            Status::Shortfall => 2,
        }
    }
}

fn require_degrees(cfg: &ModelConfig) -> Result<Vec<usize>> {
    let d = cfg.degrees();
    if d.is_empty() {
        bail!("the config needs n or n_range");
    }
    Ok(d)
}

pub fn solve_document(cfg: &ModelConfig) -> Result<(SolveDocument, Status)> {
    let ms = MultiStartOptions { seeds: cfg.seeds, rng_seed: cfg.seed, tol: cfg.tol, ..MultiStartOptions::default() };
    let runs = require_degrees(cfg)?
        .into_iter()
        .map(|n| {
            let op = cfg.operator(n)?;
            let report = solve_all(&op, cfg.tol, &ms).map_err(|e| anyhow!("solving n = {n}: {e}"))?;
            Ok(SolveRun { n, lambda_n: op.lambda_n, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let short = runs.iter().any(|r| (r.report.found_count as u64) < r.report.expected_count);
    let doc = SolveDocument { schema_version: SCHEMA_VERSION.into(), poles: cfg.poles.clone(), b_coeffs: cfg.b().coeffs().to_vec(), runs };
    Ok((doc, if short { Status::Shortfall } else { Status::Complete }))
}

fn require_three(cfg: &ModelConfig) -> Result<()> {
    if cfg.poles.len() != 3 {
        bail!("this command needs exactly three poles");
    }
    Ok(())
}

pub fn chebotarev_document(cfg: &ModelConfig) -> Result<ChebotarevDocument> {
    require_three(cfg)?;
    let data = chebotarev_center(&cfg.poles, 1e-13).map_err(|e| anyhow!("chebotarev center: {e}"))?;
    Ok(ChebotarevDocument { schema_version: SCHEMA_VERSION.into(), poles: cfg.poles.clone(), data })
}

pub fn predict_document(cfg: &ModelConfig) -> Result<PredictDocument> {
    require_three(cfg)?;
    let cheb = chebotarev_center(&cfg.poles, 1e-13).map_err(|e| anyhow!("chebotarev center: {e}"))?;
    let lattices = require_degrees(cfg)?
        .into_iter()
        .map(|n| {
            let op = cfg.operator(n)?;
            predict_lattice_p2(&op, &cheb, cfg.epsilon, cfg.exclusion_radius).map_err(|e| anyhow!("lattice for n = {n}: {e}"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictDocument {
        schema_version: SCHEMA_VERSION.into(),
        poles: cfg.poles.clone(),
        b_coeffs: cfg.b().coeffs().to_vec(),
        v_star: cheb.v_star,
        m: cheb.m,
        lattices,
    })
}

/// Compares every lattice with the exact run of the same degree.
pub fn compare_document(cfg: &ModelConfig, exact: &SolveDocument, lattice: &PredictDocument) -> Result<CompareDocument> {
    if exact.poles != lattice.poles || exact.poles != cfg.poles {
        bail!("the solve and predict reports were computed for different poles");
    }
    let runs = lattice
        .lattices
        .iter()
        .map(|lat| {
            let run = exact.runs.iter().find(|r| r.n == lat.n).ok_or_else(|| anyhow!("no exact solutions for n = {}", lat.n))?;
            let op = cfg.operator(lat.n)?;
            Ok(CompareRun { n: lat.n, exclusion_radius: lat.exclusion_radius, report: compare(&op, &run.report, lat) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareDocument { schema_version: SCHEMA_VERSION.into(), poles: cfg.poles.clone(), runs })
}

/// The differential used by `trace`: explicit zeros of `V`, the constant
/// for two poles, or the Chebotarev center for three.
pub fn trace_chart(cfg: &ModelConfig) -> Result<QuadDiffChart> {
    let zeros = match (&cfg.v_zeros, cfg.poles.len()) {
        (Some(z), _) => z.clone(),
        (None, 2) => Vec::new(),
        (None, 3) => vec![chebotarev_center(&cfg.poles, 1e-13).map_err(|e| anyhow!("{e}"))?.v_star],
        _ => bail!("v_zeros is required with more than three poles"),
    };
    QuadDiffChart::from_zeros(&zeros, &cfg.poles).map_err(|e| anyhow!("chart: {e}"))
}

/// The trajectory through `start`, both directions joined into one polyline
/// when `direction = both`; `s` is the signed metric parameter `|xi|`.
pub fn trace_csv(cfg: &ModelConfig) -> Result<String> {
    let start = cfg.start.ok_or_else(|| anyhow!("trace needs a start point"))?;
    let chart = trace_chart(cfg)?;
    let run = |d: i32| trace_trajectory(&chart, start, cfg.kind, d, &cfg.trace).map_err(|e| anyhow!("tracing: {e}"));
    let mut rows: Vec<(f64, C64, C64)> = Vec::new();
    let arclen = |t: &Trajectory| t.xi_arclength();
    match cfg.direction {
        0 => {
            let back = run(-1)?;
            let fwd = run(1)?;
            let sb = arclen(&back);
            for i in (1..back.samples.len()).rev() {
                rows.push((-sb[i], back.samples[i], back.xi_values[i]));
            }
            let sf = arclen(&fwd);
            for i in 0..fwd.samples.len() {
                rows.push((sf[i], fwd.samples[i], fwd.xi_values[i]));
            }
        }
        d => {
            let t = run(d)?;
            let s = arclen(&t);
            for i in 0..t.samples.len() {
                rows.push((s[i], t.samples[i], t.xi_values[i]));
            }
        }
    }
    let mut out = String::from("s,re_z,im_z,re_xi,im_xi\n");
    for (s, z, xi) in rows {
        let _ = writeln!(out, "{},{},{},{},{}", format_f64(s), format_f64(z.re), format_f64(z.im), format_f64(xi.re), format_f64(xi.im));
    }
    Ok(out)
}

pub fn read_trajectory_csv(text: &str) -> Result<Vec<C64>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("s,re_z,im_z,re_xi,im_xi") {
        bail!("trajectory CSV must start with the header s,re_z,im_z,re_xi,im_xi");
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                bail!("expected five columns: {l:?}");
            }
            Ok(C64::new(f[1].trim().parse()?, f[2].trim().parse()?))
        })
        .collect()
}

/// Critical trajectories of the differential `-(V/A) dz^2` of one pair.
pub fn pair_trajectories(poles: &[C64], pair: &HSPair) -> Result<Vec<Trajectory>> {
    let chart = QuadDiffChart::reduced(&pair.vv_zeros, poles).map_err(|e| anyhow!("chart: {e}"))?;
    critical_graph(&chart, &support_controls()).map_err(|e| anyhow!("critical graph: {e}"))
}

pub fn select_run(doc: &SolveDocument, n: Option<usize>) -> Result<&SolveRun> {
    match n {
        Some(n) => doc.runs.iter().find(|r| r.n == n).ok_or_else(|| anyhow!("no run with n = {n}")),
        None => doc.runs.first().ok_or_else(|| anyhow!("the solve report has no runs")),
    }
}

/// One panel per pair (or just `pair`), with the pair's critical graph.
pub fn solution_panels(doc: &SolveDocument, n: Option<usize>, pair: Option<usize>) -> Result<Vec<FigureModel>> {
    let run = select_run(doc, n)?;
    let chosen: Vec<usize> = match pair {
        Some(k) if k < run.report.pairs.len() => vec![k],
        Some(k) => bail!("pair {k} out of range ({} pairs)", run.report.pairs.len()),
        None => (0..run.report.pairs.len()).collect(),
    };
    chosen
        .par_iter()
        .map(|&k| {
            let p = &run.report.pairs[k];
            let graph = pair_trajectories(&doc.poles, p)?;
            Ok(FigureModel {
                title: format!("n = {}, pair {k}", run.n),
                poles: doc.poles.clone(),
                q_zeros: p.q_zeros.clone(),
                v_zeros: p.vv_zeros.clone(),
                polylines: graph.into_iter().map(|t| t.samples).collect(),
                circles: Vec::new(),
            })
        })
        .collect()
}

pub fn chebotarev_panel(doc: &ChebotarevDocument) -> FigureModel {
    FigureModel {
        title: "Chebotarev continuum".into(),
        poles: doc.poles.clone(),
        v_zeros: vec![doc.data.v_star],
        polylines: doc.data.star_arcs.iter().map(|t| t.samples.clone()).collect(),
        ..Default::default()
    }
}

pub fn trajectory_panel(poles: &[C64], lines: Vec<Vec<C64>>) -> FigureModel {
    FigureModel { title: "trajectories".into(), poles: poles.to_vec(), polylines: lines, ..Default::default() }
}

/// Lattice predictions as open circles over the exact Van Vleck zeros.
pub fn lattice_panel(lattice: &PredictDocument, exact: Option<&SolveDocument>, n: Option<usize>) -> Result<FigureModel> {
    let lat = match n {
        Some(n) => lattice.lattices.iter().find(|l| l.n == n).ok_or_else(|| anyhow!("no lattice with n = {n}"))?,
        None => lattice.lattices.first().ok_or_else(|| anyhow!("the predict report has no lattices"))?,
    };
    let v_zeros = match exact {
        Some(doc) => select_run(doc, Some(lat.n))?.report.pairs.iter().flat_map(|p| p.vv_zeros.clone()).collect(),
        None => Vec::new(),
    };
    Ok(FigureModel {
        title: format!("lattice, n = {}", lat.n),
        poles: lattice.poles.clone(),
        v_zeros,
        circles: lat.entries.iter().map(|e| e.v_pred).collect(),
        ..Default::default()
    })
}
