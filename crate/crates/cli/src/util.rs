use std::path::{Path, PathBuf};

use cordscan::Metric;
use serde_json::{json, Value};

use crate::error::CliError;

/// Parses `2-4`, `1,3,5` or a mix such as `1-3,6`.
pub fn parse_levels(s: &str) -> Result<Vec<u8>, CliError> {
    let bad = || CliError::input(format!("invalid level list `{s}` (expected e.g. 2-4 or 1,3,5)"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = match part.split_once('-') {
            Some((a, b)) => (a, b),
            None => (part, part),
        };
        let parse = |t: &str| t.trim().trim_start_matches(['C', 'c']).parse::<u8>().map_err(|_| bad());
        let (a, b) = (parse(a)?, parse(b)?);
        if a == 0 || b > 7 || a > b {
            return Err(bad());
        }
        out.extend(a..=b);
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_thresholds(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::input(format!("invalid threshold list `{s}` (expected e.g. 0.02:0.20:0.02 or 0.05,0.10)"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let out: Vec<f64> = if let [a, b, step] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| round9(a + i as f64 * step)).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if out.is_empty() || out.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(bad());
    }
    Ok(out)
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Parses `FA,MD,RD;FWW,STICK_AD,MD,RD`.
pub fn parse_combos(s: &str) -> Result<Vec<Vec<Metric>>, CliError> {
    let mut combos = Vec::new();
    for group in s.split(';').map(str::trim).filter(|g| !g.is_empty()) {
        let combo = group
            .split(',')
            .map(|m| m.parse::<Metric>().map_err(|e| CliError::input(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = combo.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != combo.len() {
            return Err(CliError::input(format!("combination `{group}` repeats a metric")));
        }
        combos.push(combo);
    }
    if combos.is_empty() {
        return Err(CliError::input("no metric combination given"));
    }
    Ok(combos)
}

/// Path of the JSON sidecar for `out`: `results.csv` → `results.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("meta.json")
    } else {
        out.with_extension("json")
    }
}

/// Writes provenance metadata beside an output.
pub fn write_sidecar(path: &Path, command: &str, seed: Option<u64>, params: Value) -> Result<(), CliError> {
    let meta = json!({
        "tool": "cordscan",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "parameters": params,
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::write(path, e))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}
