use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::IoError;

/// b-values below this are treated as non-diffusion-weighted (s/mm²).
pub const B0_THRESHOLD: f64 = 10.0;

const UNIT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientEntry {
    /// s/mm²
    pub b: f64,
    pub g: [f64; 3],
}

impl GradientEntry {
    pub fn is_b0(&self) -> bool {
        self.b == 0.0
    }
}

/// Per-measurement b-value and unit gradient direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientScheme {
    entries: Vec<GradientEntry>,
}

impl GradientScheme {
    /// Validates and normalizes a table: small b-values snap to 0, b > 0
    /// directions are rescaled to unit norm.
    pub fn new(entries: Vec<GradientEntry>) -> Result<Self, IoError> {
        let mut out = Vec::with_capacity(entries.len());
        for (i, e) in entries.into_iter().enumerate() {
            if !e.b.is_finite() || e.b < 0.0 || e.g.iter().any(|c| !c.is_finite()) {
                return Err(IoError::InvalidScheme(format!("entry {i}: non-finite or negative b")));
            }
            let norm = e.g.iter().map(|c| c * c).sum::<f64>().sqrt();
            if e.b < B0_THRESHOLD {
                let g = if norm > 0.0 { e.g.map(|c| c / norm) } else { [0.0; 3] };
                out.push(GradientEntry { b: 0.0, g });
            } else {
                if norm < 1e-3 {
                    return Err(IoError::InvalidScheme(format!(
                        "entry {i}: b = {} with zero gradient direction",
                        e.b
                    )));
                }
                out.push(GradientEntry {
                    b: e.b,
                    g: e.g.map(|c| c / norm),
                });
            }
        }
        if !out.iter().any(GradientEntry::is_b0) {
            return Err(IoError::InvalidScheme("no b = 0 measurement".into()));
        }
        debug_assert!(out
            .iter()
            .filter(|e| !e.is_b0())
            .all(|e| (e.g.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs() < UNIT_TOL));
        Ok(GradientScheme { entries: out })
    }

    /// `n_b0` non-weighted measurements followed by `repeats` passes over
    /// `directions` at b-value `b`.
    pub fn shelled(n_b0: usize, b: f64, directions: &[[f64; 3]], repeats: usize) -> Result<Self, IoError> {
        let mut entries = vec![GradientEntry { b: 0.0, g: [0.0; 3] }; n_b0];
        for _ in 0..repeats {
            entries.extend(directions.iter().map(|&g| GradientEntry { b, g }));
        }
        GradientScheme::new(entries)
    }

    pub fn entries(&self) -> &[GradientEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bvals(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.b)
    }

    pub fn b0_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_b0()).count()
    }

    /// Rank of the quadratic-form design over the b > 0 directions. Six means
    /// the directions determine a symmetric tensor.
    pub fn tensor_rank(&self) -> usize {
        let rows: Vec<[f64; 6]> = self
            .entries
            .iter()
            .filter(|e| !e.is_b0())
            .map(|e| {
                let [x, y, z] = e.g;
                [x * x, y * y, z * z, 2.0 * x * y, 2.0 * x * z, 2.0 * y * z]
            })
            .collect();
        if rows.is_empty() {
            return 0;
        }
        let m = DMatrix::from_fn(rows.len(), 6, |i, j| rows[i][j]);
        let sv = m.singular_values();
        let smax = sv.max();
        sv.iter().filter(|&&s| s > 1e-8 * smax.max(1e-300)).count()
    }

    /// Number of distinct b > 0 directions (antipodal pairs count once).
    pub fn distinct_directions(&self) -> usize {
        let mut seen: Vec<[f64; 3]> = Vec::new();
        for e in self.entries.iter().filter(|e| !e.is_b0()) {
            let dup = seen.iter().any(|s| {
                let dot: f64 = s.iter().zip(e.g.iter()).map(|(a, b)| a * b).sum();
                dot.abs() > 1.0 - 1e-9
            });
            if !dup {
                seen.push(e.g);
            }
        }
        seen.len()
    }
}

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let row = toks
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| IoError::NonNumericToken {
                    path: path.to_path_buf(),
                    token: t.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads FSL-convention `bval` (one row) and `bvec` (three rows x, y, z)
/// files. A bvec stored as N rows of three columns is also accepted.
pub fn read_scheme(bval_path: impl AsRef<Path>, bvec_path: impl AsRef<Path>) -> Result<GradientScheme, IoError> {
    let bval_path = bval_path.as_ref();
    let bvec_path = bvec_path.as_ref();
    let bvals: Vec<f64> = parse_rows(bval_path)?.into_iter().flatten().collect();
    let rows = parse_rows(bvec_path)?;

    let dirs: Vec<[f64; 3]> = if rows.len() == 3 && rows.iter().all(|r| r.len() == rows[0].len()) {
        (0..rows[0].len())
            .map(|i| [rows[0][i], rows[1][i], rows[2][i]])
            .collect()
    } else if rows.iter().all(|r| r.len() == 3) {
        rows.iter().map(|r| [r[0], r[1], r[2]]).collect()
    } else {
        return Err(IoError::LengthMismatch {
            bvals: bvals.len(),
            bvecs: rows.iter().map(Vec::len).max().unwrap_or(0),
        });
    };
    if dirs.len() != bvals.len() {
        return Err(IoError::LengthMismatch {
            bvals: bvals.len(),
            bvecs: dirs.len(),
        });
    }
    GradientScheme::new(
        bvals
            .into_iter()
            .zip(dirs)
            .map(|(b, g)| GradientEntry { b, g })
            .collect(),
    )
}

/// Writes FSL-convention `bval` / `bvec` files.
pub fn write_scheme(scheme: &GradientScheme, bval_path: impl AsRef<Path>, bvec_path: impl AsRef<Path>) -> Result<(), IoError> {
    let join = |it: &mut dyn Iterator<Item = f64>| it.map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
    let bval = join(&mut scheme.bvals()) + "\n";
    let mut bvec = String::new();
    for axis in 0..3 {
        bvec += &join(&mut scheme.entries.iter().map(|e| e.g[axis]));
        bvec.push('\n');
    }
    for (p, s) in [(bval_path.as_ref(), bval), (bvec_path.as_ref(), bvec)] {
        fs::write(p, s).map_err(|source| IoError::IoFailure {
            path: p.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}
