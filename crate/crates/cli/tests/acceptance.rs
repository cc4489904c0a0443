//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use anyhow::{anyhow, Result};
use lame_cli::commands::{predict_document, solution_panels, solve_document};
use lame_cli::config::ModelConfig;
use lame_cli::json::to_json;
use lame_cli::svg;
use lame_core::hs::{classify_occupancy, solve_all, solve_all_p2, solve_p1, MultiStartOptions};
use lame_core::lame::LameOperator;
use lame_core::periods::{chebotarev_center, germ_chart, periods, star_cycles};
use lame_core::poly::Poly;
use lame_core::quad_diff::{QuadDiffChart, Termination};
use lame_core::wkb::{
    compare, measure_of_chart, potential_checks, predict_lattice_p2, strong_error, zero_phase_check, ComparisonReport,
    PredictedLattice, WkbEvaluator,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn stieltjes_poles() -> Vec<C64> {
    vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
}

fn stieltjes(n: usize) -> LameOperator {
    LameOperator::new(&stieltjes_poles(), Poly::from_real(&[-1.0, 0.0, 4.0]), n).unwrap()
}

fn legendre(n: usize) -> LameOperator {
    LameOperator::new(&[c(-1.0, 0.0), c(1.0, 0.0)], Poly::from_real(&[0.0, 2.0]), n).unwrap()
}

fn equilateral() -> Vec<C64> {
    (0..3).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0)).collect()
}

fn random_triangle(rng: &mut ChaCha8Rng) -> Vec<C64> {
    loop {
        let t: Vec<C64> = (0..3).map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
        // keep triangles that are not too flat
        let area = ((t[1] - t[0]).conj() * (t[2] - t[0])).im.abs() / 2.0;
        let d = (t[1] - t[0]).norm().max((t[2] - t[0]).norm()).max((t[2] - t[1]).norm());
        if area > 0.1 * d * d {
            return t;
        }
    }
}

/// Zeros of the Legendre polynomial by Newton on the three-term recurrence.
fn legendre_oracle(n: usize) -> Vec<f64> {
    let eval = |x: f64| {
        let (mut a, mut b) = (1.0, x);
        for k in 1..n {
            let next = ((2 * k + 1) as f64 * x * b - k as f64 * a) / (k + 1) as f64;
            a = b;
            b = next;
        }
        (b, n as f64 * (x * b - a) / (x * x - 1.0))
    };
    let mut z: Vec<f64> = (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..60 {
                let (v, d) = eval(x);
                x -= v / d;
            }
            x
        })
        .collect();
    z.sort_by(f64::total_cmp);
    z
}

fn sorted_re(z: &[C64]) -> Vec<f64> {
    let mut r: Vec<f64> = z.iter().map(|w| w.re).collect();
    r.sort_by(f64::total_cmp);
    r
}

type Outcome = Result<(bool, String)>;

fn ac1() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let mut bad = Vec::new();
    for n in 1..=25 {
        let rep = solve_all_p2(&stieltjes(n), 1e-9)?;
        if rep.found_count != n + 1 || rep.pairs.len() != n + 1 {
            bad.push(format!("n={n}: {} pairs", rep.found_count));
        }
        for p in &rep.pairs {
            worst.0 = worst.0.max(p.ode_res);
            worst.1 = worst.1.max(p.electro_res);
        }
    }
    let ok = bad.is_empty() && worst.0 <= 1e-9 && worst.1 <= 1e-7;
    Ok((ok, format!("n=1..25, max ode residual {:.2e}, max electrostatic residual {:.2e} {}", worst.0, worst.1, bad.join(" "))))
}

fn ac2() -> Outcome {
    let rep = solve_all_p2(&stieltjes(1), 1e-12)?;
    let v = sorted_re(&rep.pairs.iter().map(|p| p.vv_zeros[0]).collect::<Vec<_>>());
    let im = rep.pairs.iter().map(|p| p.vv_zeros[0].im.abs()).fold(0.0, f64::max);
    let vdev = (v[0] + 0.5).abs().max((v[1] - 0.5).abs()).max(im);
    let mut ldev = 0.0f64;
    for n in 1..=20 {
        let pair = solve_p1(&legendre(n))?;
        let got = sorted_re(&pair.q_zeros);
        let im = pair.q_zeros.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let d = got.iter().zip(legendre_oracle(n)).map(|(a, b)| (a - b).abs()).fold(im, f64::max);
        ldev = ldev.max(d);
    }
    Ok((vdev <= 1e-12 && ldev <= 1e-10, format!("n=1 Van Vleck deviation {vdev:.2e}; Legendre n<=20 zero deviation {ldev:.2e}")))
}

fn ac3() -> Outcome {
    let op = stieltjes(6);
    let rep = solve_all_p2(&op, 1e-10)?;
    let mut splits = Vec::new();
    let mut min_gap = f64::INFINITY;
    for p in &rep.pairs {
        let occ = classify_occupancy(&op, &p.q_zeros, &p.vv_zeros)?;
        if !occ.all_real_interior {
            return Ok((false, "a pair has non-real or non-interior zeros".into()));
        }
        let r = sorted_re(&p.q_zeros);
        min_gap = r.windows(2).map(|w| w[1] - w[0]).fold(min_gap, f64::min);
        splits.push(occ.counts);
    }
    splits.sort();
    splits.dedup();
    let all: Vec<Vec<usize>> = (0..=6).map(|k| vec![k, 6 - k]).collect();
    Ok((splits == all && rep.found_count == 7 && min_gap > 1e-6, format!("{} distinct splittings, smallest zero gap {min_gap:.3e}", splits.len())))
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sum_err = 0.0f64;
    for _ in 0..100 {
        let poles = random_triangle(&mut rng);
        let centroid = poles.iter().sum::<C64>() / 3.0;
        let v = centroid + c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        sum_err = sum_err.max(periods(&germ_chart(&poles, v)?, &star_cycles(2))?.sum_error);
    }
    let eq = chebotarev_center(&equilateral(), 1e-13)?;
    let eq_dev = eq.m.iter().map(|m| (m - 1.0 / 3.0).abs()).fold(eq.v_star.norm(), f64::max);
    let col = chebotarev_center(&stieltjes_poles(), 1e-13)?;
    let col_dev = (col.m[0] - 0.5).abs().max(col.m[1].abs()).max((col.m[2] - 0.5).abs());
    let mut msum = 0.0f64;
    for _ in 0..20 {
        let ch = chebotarev_center(&random_triangle(&mut rng), 1e-13)?;
        msum = msum.max((ch.m.iter().sum::<f64>() - 1.0).abs());
    }
    let ok = sum_err <= 1e-10 && eq_dev <= 1e-8 && col_dev <= 1e-7 && msum <= 1e-8;
    Ok((ok, format!("|sum w - 1| {sum_err:.1e}; equilateral {eq_dev:.1e}; collinear {col_dev:.1e}; |sum M - 1| {msum:.1e}")))
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut configs = vec![equilateral(), vec![c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]];
    configs.extend((0..4).map(|_| random_triangle(&mut rng)));
    let (mut hit, mut len, mut level) = (0.0f64, 0.0f64, 0.0f64);
    for poles in &configs {
        let ch = chebotarev_center(poles, 1e-13)?;
        for (k, arc) in ch.star_arcs.iter().enumerate() {
            let captured = match arc.termination {
                Termination::CriticalPoint { point, .. } => (point - poles[k]).norm(),
                _ => f64::INFINITY,
            };
            hit = hit.max(captured.max((arc.end() - poles[k]).norm()));
            level = level.max(arc.level_deviation());
            len = len.max((arc.omega_length - ch.m[k]).abs());
        }
    }
    let chart = QuadDiffChart::from_zeros(&[], &[c(-1.0, 0.0), c(1.0, 0.0)])?;
    let seg = (chart.omega_length(&[c(-1.0, 0.0), c(1.0, 0.0)])? - 1.0).abs();
    Ok((hit <= 1e-6 && len <= 1e-7 && seg <= 1e-9, format!("pole miss {hit:.1e}; level drift {level:.1e}; length vs M {len:.1e}; Legendre segment {seg:.1e}")))
}

fn stieltjes_compare(n: usize, epsilon: f64, radius: f64) -> Result<(PredictedLattice, ComparisonReport)> {
    let op = stieltjes(n);
    let cheb = chebotarev_center(&op.poles, 1e-13)?;
    let lat = predict_lattice_p2(&op, &cheb, epsilon, Some(radius))?;
    let exact = solve_all(&op, 1e-9, &MultiStartOptions::default())?;
    let rep = compare(&op, &exact, &lat);
    Ok((lat, rep))
}

fn ac6() -> Outcome {
    let t = Instant::now();
    let vals = [10usize, 20, 40]
        .par_iter()
        .map(|&n| Ok(stieltjes_compare(n, 0.1, 0.2)?.1.c_estimate))
        .collect::<Result<Vec<f64>>>()?;
    let secs = t.elapsed().as_secs_f64();
    let ok = vals[2] <= 3.0 * vals[0] && secs <= 120.0;
    Ok((ok, format!("max n|delta| at n=10,20,40: {:.4}, {:.4}, {:.4} (ratio {:.3}) in {secs:.1}s", vals[0], vals[1], vals[2], vals[2] / vals[0])))
}

fn ac7() -> Outcome {
    let (lat, rep) = stieltjes_compare(30, 0.1, 0.2)?;
    let locs: Vec<String> = rep.unmatched_pred.iter().map(|&i| format!("{:.4}", lat.entries[i].v_pred)).collect();
    let extra = if locs.is_empty() { String::new() } else { format!("; unmatched: {}", locs.join(", ")) };
    Ok((rep.matched_fraction >= 0.95, format!("matched fraction {:.4}{extra}", rep.matched_fraction)))
}

fn ac8() -> Outcome {
    let pts = [c(2.0, 0.0), c(1.0, 1.0), c(0.0, -3.0)];
    let mut e = Vec::new();
    for n in [20, 40] {
        let op = legendre(n);
        let pair = solve_p1(&op)?;
        let ev = WkbEvaluator::new(&op, &Poly::one())?;
        e.push(strong_error(&ev, &pair.q_zeros, &pts, 0.5)?.error);
    }
    Ok((e[1] <= 0.6 * e[0], format!("error n=20 {:.3e}, n=40 {:.3e} (ratio {:.3})", e[0], e[1], e[1] / e[0])))
}

fn ac9() -> Outcome {
    let op = stieltjes(20);
    let rep = solve_all_p2(&op, 1e-9)?;
    let stats = rep
        .pairs
        .par_iter()
        .map(|p| {
            let ev = WkbEvaluator::new(&op, &p.v)?;
            let ph = zero_phase_check(&ev, &p.q_zeros)?;
            let miss = ph.arcs.iter().map(|a| (a.count as f64 - a.expected).abs()).fold(0.0, f64::max);
            Ok((ph.fraction_within_10pct, miss))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let worst_frac = stats.iter().map(|s| s.0).fold(1.0, f64::min);
    let worst_count = stats.iter().map(|s| s.1).fold(0.0, f64::max);
    let lop = legendre(20);
    let lp = zero_phase_check(&WkbEvaluator::new(&lop, &Poly::one())?, &solve_p1(&lop)?.q_zeros)?;
    let ok = worst_frac >= 0.9 && worst_count <= 2.0 && lp.fraction_within_10pct >= 0.9;
    Ok((
        ok,
        format!(
            "{} pairs: worst gap fraction {worst_frac:.3}, worst count miss {worst_count:.2}; Legendre fraction {:.3}",
            stats.len(),
            lp.fraction_within_10pct
        ),
    ))
}

fn ac10() -> Outcome {
    let chart = QuadDiffChart::from_zeros(&[], &[c(-1.0, 0.0), c(1.0, 0.0)])?;
    let arc = potential_checks(&measure_of_chart(&chart, None)?, 10);
    let dev = arc.probes.iter().map(|p| (p.potential - 2f64.ln()).abs()).fold(0.0, f64::max);
    let poles = equilateral();
    let cheb = chebotarev_center(&poles, 1e-13)?;
    let eq = potential_checks(&measure_of_chart(&QuadDiffChart::from_zeros(&[cheb.v_star], &poles)?, None)?, 5);
    let ok = arc.probes.len() == 10 && dev <= 1e-4 && eq.max_variation <= 1e-4 && eq.max_normal_mismatch <= 1e-3;
    Ok((
        ok,
        format!(
            "arcsine |U - log 2| {dev:.1e} at {} points; equilateral variation {:.1e}, normal mismatch {:.1e}",
            arc.probes.len(),
            eq.max_variation,
            eq.max_normal_mismatch
        ),
    ))
}

fn segment_distance(z: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let t = if d.norm_sqr() == 0.0 { 0.0 } else { (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0) };
    (z - (a + d * t)).norm()
}

fn ac11() -> Outcome {
    let t = Instant::now();
    let cfg = ModelConfig::parse("poles = [(1, 0.5), (-1, 0.5), (-1, -0.5), (1, -0.5)]\nn = 12\nseed = 11\n")?;
    let (doc, _) = solve_document(&cfg)?;
    let run = &doc.runs[0];
    let panels = solution_panels(&doc, Some(12), None)?;
    let image = svg::render(&panels);
    let mut worst = 0.0f64;
    for fig in &panels {
        for &q in &fig.q_zeros {
            let d = fig
                .polylines
                .iter()
                .flat_map(|l| l.windows(2).map(move |w| segment_distance(q, w[0], w[1])))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    let marks = image.matches("class=\"q-zero\"").count();
    let zeros: usize = run.report.pairs.iter().map(|p| p.q_zeros.len()).sum();
    let ok = !panels.is_empty() && marks == zeros && worst <= 0.05;
    Ok((
        ok,
        format!(
            "{} of {} pairs drawn, {marks} zero marks, worst zero-to-trajectory distance {worst:.3e} ({:.1}s)",
            panels.len(),
            run.report.expected_count,
            t.elapsed().as_secs_f64()
        ),
    ))
}

fn ac12() -> Outcome {
    let rect = ModelConfig::parse("poles = [(1, 0.5), (-1, 0.5), (-1, -0.5), (1, -0.5)]\nn = 3\nseed = 7\n")?;
    let st = ModelConfig::parse("poles = [-1, 0, 1]\nB_coeffs = [-1, 0, 4]\nn_range = [8, 10]\nexclusion_radius = 0.2\n")?;
    let in_process = |cfg: &ModelConfig| -> Result<String> { to_json(&solve_document(cfg)?.0) };
    let same_lib = in_process(&rect)? == in_process(&rect)?
        && in_process(&st)? == in_process(&st)?
        && to_json(&predict_document(&st)?)? == to_json(&predict_document(&st)?)?;

    let dir = tempfile::tempdir()?;
    let cfg_path = dir.path().join("rect.cfg");
    std::fs::write(&cfg_path, "poles = [(1, 0.5), (-1, 0.5), (-1, -0.5), (1, -0.5)]\nn = 3\nseed = 7\n")?;
    let mut outputs = Vec::new();
    for (i, jobs) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_lame"))
            .args(["--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs, "solve"])
            .status()?;
        if !status.success() {
            return Err(anyhow!("lame solve exited with {status}"));
        }
        outputs.push(std::fs::read(out)?);
    }
    let same_bin = outputs[0] == outputs[1];
    Ok((same_lib && same_bin, format!("library runs identical: {same_lib}; binary runs with 1 and 4 threads identical: {same_bin}")))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 12] = [
        ("AC1 exactness certificates", ac1),
        ("AC2 closed forms", ac2),
        ("AC3 Stieltjes splittings", ac3),
        ("AC4 geometry identities", ac4),
        ("AC5 trajectory fidelity", ac5),
        ("AC6 delta scaling", ac6),
        ("AC7 lattice matching", ac7),
        ("AC8 strong asymptotics", ac8),
        ("AC9 zero phase spacing", ac9),
        ("AC10 potential theory", ac10),
        ("AC11 figure reproduction", ac11),
        ("AC12 determinism", ac12),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let t = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        failed += usize::from(!ok);
        println!("{} {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
