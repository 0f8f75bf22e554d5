//! Diffusion tensor model: `S = s0 exp(-b gᵀ D g)`, fitted by log-linear
//! least squares.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};

use super::{canonical_hemisphere, ModelError};
use crate::io::GradientScheme;

/// Smallest eigenvalue kept after a fit (mm²/s).
pub const MIN_EIGENVALUE: f64 = 1e-9;

/// Signals are clamped to this fraction of the b = 0 estimate before the log.
const SIGNAL_FLOOR: f64 = 1e-6;

/// Symmetric tensor, components `[xx, yy, zz, xy, xz, yz]` in mm²/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionTensor {
    pub d: [f64; 6],
    pub s0: f64,
}

impl DiffusionTensor {
    pub fn from_matrix(m: &Matrix3<f64>, s0: f64) -> Self {
        DiffusionTensor {
            d: [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(0, 2)], m[(1, 2)]],
            s0,
        }
    }

    /// Tensor with the given eigenvalues along the columns of `frame`.
    pub fn from_eigen(evals: [f64; 3], frame: &Matrix3<f64>, s0: f64) -> Self {
        let m = frame * Matrix3::from_diagonal(&Vector3::from(evals)) * frame.transpose();
        Self::from_matrix(&m, s0)
    }

    pub fn diagonal(evals: [f64; 3], s0: f64) -> Self {
        DiffusionTensor {
            d: [evals[0], evals[1], evals[2], 0.0, 0.0, 0.0],
            s0,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let [xx, yy, zz, xy, xz, yz] = self.d;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    /// Apparent diffusivity `gᵀ D g` along `g`.
    #[inline]
    pub fn quadratic_form(&self, g: &[f64; 3]) -> f64 {
        let [xx, yy, zz, xy, xz, yz] = self.d;
        let [x, y, z] = *g;
        xx * x * x + yy * y * y + zz * z * z + 2.0 * (xy * x * y + xz * x * z + yz * y * z)
    }
}

/// Rotation-invariant tensor summaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtiMetrics {
    pub fa: f64,
    pub md: f64,
    pub ad: f64,
    pub rd: f64,
    /// Eigenvalues, descending.
    pub evals: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

pub fn predict_dti(t: &DiffusionTensor, scheme: &GradientScheme) -> Vec<f64> {
    scheme
        .entries()
        .iter()
        .map(|e| {
            if e.is_b0() {
                t.s0
            } else {
                t.s0 * (-e.b * t.quadratic_form(&e.g)).exp()
            }
        })
        .collect()
}

/// Sorted eigen-decomposition and scalar indices.
pub fn dti_metrics(t: &DiffusionTensor) -> DtiMetrics {
    let eig = SymmetricEigen::new(t.matrix());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let evals = order.map(|i| eig.eigenvalues[i]);
    let vec_of = |i: usize| {
        let c = eig.eigenvectors.column(order[i]);
        canonical_hemisphere([c[0], c[1], c[2]])
    };

    let ad = evals[0];
    let rd = 0.5 * (evals[1] + evals[2]);
    let md = (ad + 2.0 * rd) / 3.0;
    let mean = (evals[0] + evals[1] + evals[2]) / 3.0;
    let num = evals.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>();
    let den = evals.iter().map(|l| l * l).sum::<f64>();
    let fa = if den > 0.0 {
        (1.5 * num / den).sqrt().clamp(0.0, 1.0)
    } else {
        0.0
    };
    DtiMetrics {
        fa,
        md,
        ad,
        rd,
        evals,
        e1: vec_of(0),
        e2: vec_of(1),
    }
}

/// Pre-factored log-linear design for one gradient scheme.
#[derive(Clone, Debug)]
pub struct DtiDesign {
    /// Pseudo-inverse of the n×7 design, row-major 7×n.
    pinv: DMatrix<f64>,
    design: DMatrix<f64>,
    b0: Vec<usize>,
}

impl DtiDesign {
    pub fn new(scheme: &GradientScheme) -> Result<Self, ModelError> {
        if scheme.tensor_rank() < 6 {
            return Err(ModelError::RankDeficientDesign);
        }
        let n = scheme.len();
        let design = DMatrix::from_fn(n, 7, |i, j| {
            let e = &scheme.entries()[i];
            let [x, y, z] = e.g;
            let b = e.b;
            match j {
                0 => 1.0,
                1 => -b * x * x,
                2 => -b * y * y,
                3 => -b * z * z,
                4 => -2.0 * b * x * y,
                5 => -2.0 * b * x * z,
                _ => -2.0 * b * y * z,
            }
        });
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.iter().any(|&s| s <= 1e-10 * smax) {
            return Err(ModelError::RankDeficientDesign);
        }
        let pinv = svd
            .pseudo_inverse(1e-12 * smax)
            .map_err(|_| ModelError::RankDeficientDesign)?;
        let b0 = scheme
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_b0())
            .map(|(i, _)| i)
            .collect();
        Ok(DtiDesign { pinv, design, b0 })
    }

    /// Log-linear fit. Returns the tensor and the RSS of the fitted signal.
    pub fn fit(&self, signals: &[f64]) -> Result<(DiffusionTensor, f64), ModelError> {
        let n = self.design.nrows();
        if signals.len() != n {
            return Err(ModelError::LengthMismatch {
                expected: n,
                got: signals.len(),
            });
        }
        if signals.iter().any(|s| !s.is_finite()) {
            return Err(ModelError::NonFiniteSignal);
        }
        let s0_est = self.b0.iter().map(|&i| signals[i]).sum::<f64>() / self.b0.len() as f64;
        let scale = if s0_est > 0.0 {
            s0_est
        } else {
            signals.iter().cloned().fold(0.0, f64::max).max(1.0)
        };
        let floor = SIGNAL_FLOOR * scale;
        let logs: Vec<f64> = signals.iter().map(|&s| s.max(floor).ln()).collect();

        let mut beta = [0.0; 7];
        for (k, b) in beta.iter_mut().enumerate() {
            *b = (0..n).map(|i| self.pinv[(k, i)] * logs[i]).sum();
        }
        let raw = DiffusionTensor {
            d: [beta[1], beta[2], beta[3], beta[4], beta[5], beta[6]],
            s0: beta[0].exp(),
        };
        let tensor = clamp_eigenvalues(raw);
        let rss = (0..n)
            .map(|i| {
                let e = self.design.row(i);
                let q = -(e[1] * tensor.d[0]
                    + e[2] * tensor.d[1]
                    + e[3] * tensor.d[2]
                    + e[4] * tensor.d[3]
                    + e[5] * tensor.d[4]
                    + e[6] * tensor.d[5]);
                let pred = tensor.s0 * (-q).exp();
                (signals[i] - pred).powi(2)
            })
            .sum();
        Ok((tensor, rss))
    }
}

fn clamp_eigenvalues(t: DiffusionTensor) -> DiffusionTensor {
    let eig = SymmetricEigen::new(t.matrix());
    if eig.eigenvalues.iter().all(|&l| l >= MIN_EIGENVALUE) {
        return t;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(MIN_EIGENVALUE));
    let m = eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    DiffusionTensor::from_matrix(&m, t.s0)
}

/// Fits a tensor to one voxel's raw signals.
pub fn fit_dti_voxel(signals: &[f64], scheme: &GradientScheme) -> Result<(DiffusionTensor, super::FitDiagnostics), ModelError> {
    if scheme.len() < 7 {
        return Err(ModelError::RankDeficientDesign);
    }
    let design = DtiDesign::new(scheme)?;
    let (t, rss) = design.fit(signals)?;
    Ok((
        t,
        super::FitDiagnostics {
            rss,
            iterations: 1,
            converged: true,
            degenerate: false,
        },
    ))
}
