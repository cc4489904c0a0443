//! Report documents and their byte-stable JSON encoding: floats always carry
//! 17 significant digits, keys keep declaration order, and non-finite values
//! become `null`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use lame_core::hs::SolveReport;
use lame_core::periods::ChebotarevData;
use lame_core::wkb::{ComparisonReport, PredictedLattice};
use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRun {
    pub n: usize,
    pub lambda_n: C64,
    pub report: SolveReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDocument {
    pub schema_version: String,
    pub poles: Vec<C64>,
    #[serde(rename = "B_coeffs")]
    pub b_coeffs: Vec<C64>,
    pub runs: Vec<SolveRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictDocument {
    pub schema_version: String,
    pub poles: Vec<C64>,
    #[serde(rename = "B_coeffs")]
    pub b_coeffs: Vec<C64>,
    pub v_star: C64,
    #[serde(rename = "M")]
    pub m: [f64; 3],
    pub lattices: Vec<PredictedLattice>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebotarevDocument {
    pub schema_version: String,
    pub poles: Vec<C64>,
    #[serde(flatten)]
    pub data: ChebotarevData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRun {
    pub n: usize,
    pub exclusion_radius: f64,
    pub report: ComparisonReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareDocument {
    pub schema_version: String,
    pub poles: Vec<C64>,
    pub runs: Vec<CompareRun>,
}

/// `x` with 17 significant digits: positional for moderate exponents,
/// scientific otherwise.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci.split_once('e').unwrap().1.parse().unwrap();
    if (-5..17).contains(&exp) {
        format!("{x:.prec$}", prec = (16 - exp) as usize)
    } else {
        sci
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, k: usize| out.extend(std::iter::repeat(' ').take(k));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_u64() || n.is_i64() {
                let _ = write!(out, "{n}");
            } else {
                out.push_str(&format_f64(n.as_f64().unwrap()));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // short numeric arrays (complex pairs) stay on one line
            if items.len() <= 3 && items.iter().all(|x| x.is_number() || x.is_null()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, x, indent + 2);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_value(out, x, indent + 2);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).context("serializing report")?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes through a temporary file in the target directory and renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        for x in [1.0 / 3.0, -2.5e-9, 6.02214076e23, 0.1 + 0.2, f64::MIN_POSITIVE, 123456789.125, -0.0] {
            let s = format_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_f64(0.5), "0.50000000000000000");
        assert_eq!(format_f64(f64::NAN), "null");
    }

    #[test]
    fn output_parses_back() {
        let v = vec![C64::new(1.0 / 3.0, -0.0), C64::new(2.0, 1e-300)];
        let s = to_json(&v).unwrap();
        let back: Vec<C64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
