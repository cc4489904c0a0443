use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lame_cli::commands::read_trajectory_csv;
use lame_cli::json::{to_json, ChebotarevDocument, CompareDocument, PredictDocument, SolveDocument};

struct Workdir(tempfile::TempDir);

impl Workdir {
    fn new() -> Self {
        Workdir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn lame(args: &[&Path], tail: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lame"));
    for pair in args.chunks(2) {
        cmd.arg(pair[0]).arg(pair[1]);
    }
    cmd.args(tail).output().unwrap()
}

fn run(config: &Path, out: &Path, tail: &[&str]) -> Output {
    lame(&[Path::new("--config"), config, Path::new("--out"), out], tail)
}

fn read<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn legendre_quadratic() {
    let w = Workdir::new();
    let cfg = w.file("leg.cfg", "poles = [-1, 1]\nn = 2\n");
    let out = w.path("leg.json");
    let o = run(&cfg, &out, &["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: SolveDocument = read(&out);
    let mut q: Vec<f64> = doc.runs[0].report.pairs[0].q_zeros.iter().map(|z| z.re).collect();
    q.sort_by(f64::total_cmp);
    let r = 0.5773502691896258;
    assert!((q[0] + r).abs() < 1e-14 && (q[1] - r).abs() < 1e-14, "{q:?}");
}

#[test]
fn three_pole_count_and_round_trip() {
    let w = Workdir::new();
    let cfg = w.file("st.cfg", "poles = [-1, 0, 1]\nB_coeffs = [-1, 0, 4]\nn = 5\n");
    let out = w.path("st.json");
    let o = run(&cfg, &out, &["solve"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let doc: SolveDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.runs[0].report.found_count, 6);
    assert_eq!(doc.runs[0].report.expected_count, 6);
    assert_eq!(to_json(&doc).unwrap(), text);
}

#[test]
fn bad_input_exits_with_one() {
    let w = Workdir::new();
    let out = w.path("x.json");
    for (name, text) in [("a.cfg", "poles = [-1, 1\nn = 2\n"), ("b.cfg", "poles = [1, 1]\nn = 2\n"), ("c.cfg", "poles = [-1, 1]\nwidth = 3\n")] {
        let o = run(&w.file(name, text), &out, &["solve"]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
    assert!(!out.exists());
    let o = run(&w.path("missing.cfg"), &out, &["solve"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn trace_from_origin_reaches_the_poles() {
    let w = Workdir::new();
    let cfg = w.file("t.cfg", "poles = [-1, 1]\nstart = 0\n");
    let out = w.path("t.csv");
    let o = run(&cfg, &out, &["trace"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let pts = read_trajectory_csv(&text).unwrap();
    let (first, last) = (pts[0], *pts.last().unwrap());
    assert!((first + 1.0).norm() < 1e-6 && (last - 1.0).norm() < 1e-6, "{first} {last}");
    assert!(pts.iter().all(|z| z.im.abs() < 1e-9));
    let s: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(s.windows(2).all(|p| p[1] > p[0]));
}

#[test]
fn chebotarev_equilateral() {
    let w = Workdir::new();
    let cfg = w.file("eq.cfg", "poles = [1, (-0.5, 0.8660254037844386), (-0.5, -0.8660254037844386)]\n");
    let out = w.path("eq.json");
    assert_eq!(run(&cfg, &out, &["chebotarev"]).status.code(), Some(0));
    let doc: ChebotarevDocument = read(&out);
    assert!(doc.data.v_star.norm() < 1e-8);
    assert!(doc.data.m.iter().all(|m| (m - 1.0 / 3.0).abs() < 1e-8));
    let svg = w.path("eq.svg");
    let o = lame(&[Path::new("--out"), &svg], &["figure", "--which", "chebotarev", "--data", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"pole\"").count(), 3);
    assert_eq!(text.matches("class=\"trajectory\"").count(), 3);
}

#[test]
fn predict_compare_and_overlay() {
    let w = Workdir::new();
    let cfg = w.file("st.cfg", "poles = [-1, 0, 1]\nB_coeffs = [-1, 0, 4]\nn = 12\nexclusion_radius = 0.2\n");
    let (exact, lattice, report) = (w.path("exact.json"), w.path("lat.json"), w.path("cmp.json"));
    assert_eq!(run(&cfg, &exact, &["solve"]).status.code(), Some(0));
    assert_eq!(run(&cfg, &lattice, &["predict"]).status.code(), Some(0));
    let lat: PredictDocument = read(&lattice);
    assert!(!lat.lattices[0].entries.is_empty());
    let o = run(&cfg, &report, &["compare", "--exact", exact.to_str().unwrap(), "--lattice", lattice.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cmp: CompareDocument = read(&report);
    assert!(cmp.runs[0].report.matched_fraction >= 0.95);

    let svg = w.path("overlay.svg");
    let o = lame(
        &[Path::new("--out"), &svg],
        &["figure", "--which", "lattice-overlay", "--data", lattice.to_str().unwrap(), "--exact", exact.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"lattice\"").count(), lat.lattices[0].entries.len());
    assert_eq!(text.matches("class=\"v-zero\"").count(), 13);
}

#[test]
fn trajectory_figure_from_csv() {
    let w = Workdir::new();
    let cfg = w.file("t.cfg", "poles = [-1, 1]\nstart = (0, 0.5)\nkind = vertical\n");
    let csv = w.path("t.csv");
    assert_eq!(run(&cfg, &csv, &["trace"]).status.code(), Some(0));
    let svg = w.path("t.svg");
    let o = run(&cfg, &svg, &["figure", "--which", "trajectories", "--data", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("class=\"trajectory\"").count(), 1);
    // through i/2 the orthogonal trajectory is the imaginary axis, crossing the segment at 0
    let pts = read_trajectory_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert!(pts.iter().all(|z| z.re.abs() < 1e-9));
    assert!(pts.iter().any(|z| z.im > 1.0) && pts.iter().any(|z| z.im < -1.0));
}
