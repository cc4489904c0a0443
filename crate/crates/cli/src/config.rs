//! `key = value` model files. Complex numbers are written `(re, im)` or as a
//! bare real; lists are bracketed and comma separated. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lame_core::lame::LameOperator;
use lame_core::poly::Poly;
use lame_core::quad_diff::{TraceControls, TrajectoryKind};
use num_complex::Complex64 as C64;

const KEYS: &[&str] = &[
    "poles",
    "B_coeffs",
    "n",
    "n_range",
    "tol",
    "seed",
    "seeds",
    "epsilon",
    "exclusion_radius",
    "v_zeros",
    "start",
    "kind",
    "direction",
    "max_xi_step",
    "max_z_step",
    "max_omega_length",
    "capture_tol",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub poles: Vec<C64>,
    /// Ascending coefficients of `B`; `None` means `B = A'`.
    pub b_coeffs: Option<Vec<C64>>,
    pub n: Option<usize>,
    pub n_range: Option<(usize, usize)>,
    pub tol: f64,
    pub seed: u64,
    pub seeds: usize,
    pub epsilon: f64,
    pub exclusion_radius: Option<f64>,
    /// Zeros of `V` selecting the differential for `trace`.
    pub v_zeros: Option<Vec<C64>>,
    pub start: Option<C64>,
    pub kind: TrajectoryKind,
    /// `1`, `-1`, or `0` for both directions.
    pub direction: i32,
    pub trace: TraceControls,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            poles: Vec::new(),
            b_coeffs: None,
            n: None,
            n_range: None,
            tol: 1e-9,
            seed: 0,
            seeds: 400,
            epsilon: 0.1,
            exclusion_radius: None,
            v_zeros: None,
            start: None,
            kind: TrajectoryKind::Horizontal,
            direction: 0,
            trace: TraceControls { max_omega_length: 3.0, ..TraceControls::default() },
        }
    }
}

fn parse_real(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| anyhow!("not a number: {s:?}"))
}

fn parse_int(s: &str) -> Result<u64> {
    s.trim().parse::<u64>().map_err(|_| anyhow!("not a non-negative integer: {s:?}"))
}

pub fn parse_complex(s: &str) -> Result<C64> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 2 {
            bail!("complex numbers are written (re, im): {s:?}");
        }
        return Ok(C64::new(parse_real(parts[0])?, parse_real(parts[1])?));
    }
    Ok(C64::new(parse_real(s)?, 0.0))
}

/// Splits a bracketed list at top-level commas.
fn list_items(s: &str) -> Result<Vec<&str>> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| anyhow!("lists are written [a, b, ...]: {s:?}"))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut begin = 0;
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&inner[begin..i]);
                begin = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            bail!("unbalanced parentheses in {s:?}");
        }
    }
    if depth != 0 {
        bail!("unbalanced parentheses in {s:?}");
    }
    items.push(&inner[begin..]);
    Ok(items)
}

pub fn parse_complex_list(s: &str) -> Result<Vec<C64>> {
    list_items(s)?.into_iter().map(parse_complex).collect()
}

impl ModelConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key {key:?}", lineno + 1);
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {key:?}", lineno + 1);
            }
        }
        let mut cfg = ModelConfig::default();
        for (key, value) in &entries {
            let v = value.as_str();
            let ctx = || format!("key {key:?}");
            match key.as_str() {
                "poles" => cfg.poles = parse_complex_list(v).with_context(ctx)?,
                "B_coeffs" => cfg.b_coeffs = Some(parse_complex_list(v).with_context(ctx)?),
                "n" => cfg.n = Some(parse_int(v).with_context(ctx)? as usize),
                "n_range" => {
                    let items = list_items(v).with_context(ctx)?;
                    if items.len() != 2 {
                        bail!("n_range is written [first, last]");
                    }
                    let (lo, hi) = (parse_int(items[0])? as usize, parse_int(items[1])? as usize);
                    if lo > hi {
                        bail!("n_range must be increasing");
                    }
                    cfg.n_range = Some((lo, hi));
                }
                "tol" => cfg.tol = parse_real(v).with_context(ctx)?,
                "seed" => cfg.seed = parse_int(v).with_context(ctx)?,
                "seeds" => cfg.seeds = parse_int(v).with_context(ctx)? as usize,
                "epsilon" => cfg.epsilon = parse_real(v).with_context(ctx)?,
                "exclusion_radius" => cfg.exclusion_radius = Some(parse_real(v).with_context(ctx)?),
                "v_zeros" => cfg.v_zeros = Some(parse_complex_list(v).with_context(ctx)?),
                "start" => cfg.start = Some(parse_complex(v).with_context(ctx)?),
                "kind" => {
                    cfg.kind = match v {
                        "horizontal" => TrajectoryKind::Horizontal,
                        "vertical" => TrajectoryKind::Vertical,
                        _ => bail!("kind is horizontal or vertical"),
                    }
                }
                "direction" => {
                    cfg.direction = match v {
                        "1" | "+1" => 1,
                        "-1" => -1,
                        "0" | "both" => 0,
                        _ => bail!("direction is 1, -1 or both"),
                    }
                }
                "max_xi_step" => cfg.trace.max_xi_step = parse_real(v).with_context(ctx)?,
                "max_z_step" => cfg.trace.max_z_step = parse_real(v).with_context(ctx)?,
                "max_omega_length" => cfg.trace.max_omega_length = parse_real(v).with_context(ctx)?,
                "capture_tol" => cfg.trace.capture_tol = parse_real(v).with_context(ctx)?,
                _ => unreachable!(),
            }
        }
        if cfg.poles.len() < 2 {
            bail!("poles must list at least two points");
        }
        if cfg.n.is_some() && cfg.n_range.is_some() {
            bail!("give either n or n_range, not both");
        }
        if !(cfg.tol > 0.0) || !(0.0..1.0).contains(&cfg.epsilon) {
            bail!("tol must be positive and epsilon in [0, 1)");
        }
        // validates the pair (A, B)
        cfg.operator(cfg.degrees().first().copied().unwrap_or(1))?;
        Ok(cfg)
    }

    pub fn a(&self) -> Poly {
        Poly::from_roots(&self.poles)
    }

    pub fn b(&self) -> Poly {
        match &self.b_coeffs {
            Some(c) => Poly::new(c.clone()),
            None => self.a().derivative(),
        }
    }

    /// The requested degrees, ascending.
    pub fn degrees(&self) -> Vec<usize> {
        match (self.n, self.n_range) {
            (Some(n), _) => vec![n],
            (None, Some((lo, hi))) => (lo..=hi).collect(),
            _ => Vec::new(),
        }
    }

    pub fn operator(&self, n: usize) -> Result<LameOperator> {
        LameOperator::new(&self.poles, self.b(), n).map_err(|e| anyhow!("invalid operator: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_rejects_unknown_keys() {
        let cfg = ModelConfig::parse("poles = [(-1, 0), 0, (1.0, 0)]  # three\nB_coeffs = [-1, 0, 4]\nn = 5\n").unwrap();
        assert_eq!(cfg.poles, vec![C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(cfg.b(), Poly::from_real(&[-1.0, 0.0, 4.0]));
        assert_eq!(cfg.degrees(), vec![5]);
        assert!(ModelConfig::parse("poles = [-1, 1]\ncolour = red\n").is_err());
        assert!(ModelConfig::parse("poles = [(-1, 0, 1)]\n").is_err());
        assert!(ModelConfig::parse("poles = [-1, 1]\nn = 2\nn = 3\n").is_err());
        let r = ModelConfig::parse("poles = [-1, 1]\nn_range = [2, 4]\n").unwrap();
        assert_eq!(r.degrees(), vec![2, 3, 4]);
        assert_eq!(r.b(), Poly::from_real(&[0.0, 2.0]));
    }
}
