//! Voxel-wise signal models: DTI and the regularized Ball-and-Stick.

mod ballstick;
mod dti;
pub mod lm;
mod volume;

pub use ballstick::{
    ballstick_jacobian, fit_ballstick_voxel, predict_ballstick, BallStickFitter, BallStickParams, FitConfig, D0_DEFAULT,
    D_MAX, D_MIN, LAMBDA_PERP_DEFAULT,
};
pub use dti::{dti_metrics, fit_dti_voxel, predict_dti, DiffusionTensor, DtiDesign, DtiMetrics, MIN_EIGENVALUE};
pub use volume::{fit_volume, flags, FitOutput, ModelChoice};

use crate::io::GradientScheme;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("gradient directions do not span the tensor space")]
    RankDeficientDesign,
    #[error("need at least 6 non-collinear diffusion-weighted directions")]
    InsufficientDirections,
    #[error("mean b = 0 signal is not positive")]
    NonPositiveS0,
    #[error("signal has {got} samples, scheme has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite signal value")]
    NonFiniteSignal,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Per-voxel fit diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitDiagnostics {
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The fiber direction is not identifiable from the data.
    pub degenerate: bool,
}

/// Flips `v` onto the hemisphere z > 0 (ties broken on y, then x).
pub fn canonical_hemisphere(v: [f64; 3]) -> [f64; 3] {
    let flip = if v[2] != 0.0 {
        v[2] < 0.0
    } else if v[1] != 0.0 {
        v[1] < 0.0
    } else {
        v[0] < 0.0
    };
    if flip {
        v.map(|c| if c == 0.0 { 0.0 } else { -c })
    } else {
        v
    }
}

/// Divides by the mean b = 0 signal.
pub fn normalize_attenuation(signals: &[f64], scheme: &GradientScheme) -> Result<(Vec<f64>, f64), ModelError> {
    if signals.len() != scheme.len() {
        return Err(ModelError::LengthMismatch {
            expected: scheme.len(),
            got: signals.len(),
        });
    }
    let (sum, count) = scheme
        .entries()
        .iter()
        .zip(signals)
        .filter(|(e, _)| e.is_b0())
        .fold((0.0, 0usize), |(s, c), (_, &x)| (s + x, c + 1));
    if count == 0 {
        return Err(ModelError::NonPositiveS0);
    }
    let s0 = sum / count as f64;
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(ModelError::NonPositiveS0);
    }
    Ok((signals.iter().map(|s| s / s0).collect(), s0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::GradientEntry;

    fn scheme4() -> GradientScheme {
        let e = |b: f64, g: [f64; 3]| GradientEntry { b, g };
        GradientScheme::new(vec![
            e(0.0, [0.0; 3]),
            e(0.0, [0.0; 3]),
            e(0.0, [0.0; 3]),
            e(900.0, [1.0, 0.0, 0.0]),
        ])
        .unwrap()
    }

    #[test]
    fn normalization_uses_mean_b0() {
        let (n, s0) = normalize_attenuation(&[100.0, 102.0, 98.0, 40.0], &scheme4()).unwrap();
        assert_eq!(s0, 100.0);
        assert!((n[3] - 0.40).abs() < 1e-15);
        let (n, s0) = normalize_attenuation(&[1.0, 1.0, 1.0, 0.3], &scheme4()).unwrap();
        assert_eq!(s0, 1.0);
        assert_eq!(n, vec![1.0, 1.0, 1.0, 0.3]);
        assert_eq!(
            normalize_attenuation(&[0.0, 0.0, 0.0, 0.3], &scheme4()),
            Err(ModelError::NonPositiveS0)
        );
    }

    #[test]
    fn hemisphere_convention() {
        assert_eq!(canonical_hemisphere([0.0, 0.0, -1.0]), [0.0, 0.0, 1.0]);
        assert_eq!(canonical_hemisphere([0.3, -0.5, 0.0]), [-0.3, 0.5, 0.0]);
        assert_eq!(canonical_hemisphere([-1.0, 0.0, 0.0]), [1.0, 0.0, 0.0]);
        assert_eq!(canonical_hemisphere([0.1, 0.2, 0.3]), [0.1, 0.2, 0.3]);
    }
}
