use rayon::prelude::*;

use super::ballstick::{BallStickFitter, FitConfig};
use super::dti::dti_metrics;
use super::{normalize_attenuation, ModelError};
use crate::io::{GradientScheme, Volume};

/// Bits of the `flags` output volume.
pub mod flags {
    /// Nonlinear fit converged.
    pub const CONVERGED: u8 = 1;
    /// Fiber direction not identifiable.
    pub const DEGENERATE: u8 = 2;
    /// Voxel could not be fitted (non-positive b = 0 signal, non-finite data).
    pub const FAILED: u8 = 4;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelChoice {
    Dti,
    BallStick,
    Both,
}

impl ModelChoice {
    pub fn map_names(self) -> &'static [&'static str] {
        match self {
            ModelChoice::Dti => &["fa", "md", "ad", "rd", "rss", "flags"],
            ModelChoice::BallStick => &["fww", "stick_ad", "nx", "ny", "nz", "rss", "flags"],
            ModelChoice::Both => &[
                "fa", "md", "ad", "rd", "fww", "stick_ad", "nx", "ny", "nz", "rss", "flags",
            ],
        }
    }
}

impl std::str::FromStr for ModelChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dti" => Ok(ModelChoice::Dti),
            "ballstick" | "ball-stick" | "ball_stick" => Ok(ModelChoice::BallStick),
            "both" => Ok(ModelChoice::Both),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOutput {
    /// Named 3D maps in [`ModelChoice::map_names`] order.
    pub maps: Vec<(String, Volume)>,
    pub fitted: usize,
    pub failed: usize,
    pub degenerate: usize,
}

impl FitOutput {
    pub fn map(&self, name: &str) -> Option<&Volume> {
        self.maps.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

fn fit_one(signals: &[f64], scheme: &GradientScheme, fitter: &BallStickFitter, model: ModelChoice) -> (Vec<f64>, bool) {
    let names = model.map_names();
    let mut out = vec![0.0; names.len()];
    let flags_idx = names.len() - 1;
    let Ok((norm, _)) = normalize_attenuation(signals, scheme) else {
        out[flags_idx] = flags::FAILED as f64;
        return (out, false);
    };
    let mut flag = 0u8;
    let mut degenerate = false;
    let mut k = 0;
    if matches!(model, ModelChoice::Dti | ModelChoice::Both) {
        match fitter.dti_design().fit(signals) {
            Ok((t, rss)) => {
                let m = dti_metrics(&t);
                out[..4].copy_from_slice(&[m.fa, m.md, m.ad, m.rd]);
                if model == ModelChoice::Dti {
                    out[4] = rss;
                    flag |= flags::CONVERGED;
                }
            }
            Err(_) => flag |= flags::FAILED,
        }
        k = 4;
    }
    if matches!(model, ModelChoice::BallStick | ModelChoice::Both) {
        match fitter.fit(&norm) {
            Ok((p, diag)) => {
                out[k..k + 6].copy_from_slice(&[p.f, p.d, p.n[0], p.n[1], p.n[2], diag.rss]);
                if diag.converged {
                    flag |= flags::CONVERGED;
                }
                if diag.degenerate {
                    flag |= flags::DEGENERATE;
                    degenerate = true;
                }
            }
            Err(_) => flag |= flags::FAILED,
        }
    }
    out[flags_idx] = flag as f64;
    (out, degenerate)
}

/// Fits every voxel inside `mask` (non-zero voxels). Outside the mask all
/// outputs are zero. Results do not depend on the thread count.
pub fn fit_volume(
    dwi: &Volume,
    scheme: &GradientScheme,
    mask: &Volume,
    model: ModelChoice,
    cfg: &FitConfig,
    threads: Option<usize>,
) -> Result<FitOutput, ModelError> {
    if dwi.dims().len() != 4 {
        return Err(ModelError::DimensionMismatch("DWI volume must be 4D".into()));
    }
    if dwi.spatial_dims() != mask.spatial_dims() || mask.n_frames() != 1 {
        return Err(ModelError::DimensionMismatch(format!(
            "mask {:?} vs DWI {:?}",
            mask.dims(),
            dwi.dims()
        )));
    }
    if dwi.n_frames() != scheme.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "DWI has {} volumes, gradient table has {} entries",
            dwi.n_frames(),
            scheme.len()
        )));
    }
    let fitter = BallStickFitter::new(scheme, *cfg).map_err(|e| match e {
        ModelError::InsufficientDirections if model == ModelChoice::Dti => ModelError::RankDeficientDesign,
        e => e,
    })?;

    let voxels: Vec<usize> = mask
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m != 0.0)
        .map(|(i, _)| i)
        .collect();

    let run = || -> Vec<(Vec<f64>, bool)> {
        voxels
            .par_iter()
            .map(|&v| fit_one(&dwi.voxel_series(v), scheme, &fitter, model))
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ModelError::DimensionMismatch(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let names = model.map_names();
    let nv = dwi.n_voxels();
    let mut data: Vec<Vec<f64>> = vec![vec![0.0; nv]; names.len()];
    let mut failed = 0;
    let mut degenerate = 0;
    for (&v, (vals, deg)) in voxels.iter().zip(&results) {
        for (k, x) in vals.iter().enumerate() {
            data[k][v] = *x;
        }
        if (*vals.last().unwrap() as u8) & flags::FAILED != 0 {
            failed += 1;
        }
        degenerate += *deg as usize;
    }
    let maps = names
        .iter()
        .zip(data)
        .map(|(n, d)| (n.to_string(), mask.with_data_3d(d)))
        .collect();
    Ok(FitOutput {
        maps,
        fitted: voxels.len() - failed,
        failed,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::scaling_affine;
    use crate::models::{predict_ballstick, BallStickParams};
    use crate::phantom::DIRECTIONS_30;

    fn tiny(mask_vals: Vec<f64>) -> (Volume, GradientScheme, Volume) {
        let scheme = GradientScheme::shelled(2, 900.0, &DIRECTIONS_30, 1).unwrap();
        let a = scaling_affine([2.0; 3]);
        let nv = mask_vals.len();
        let mut data = vec![0.0; nv * scheme.len()];
        for v in 0..nv {
            let p = BallStickParams::new(0.1 + 0.05 * v as f64, 1.0e-3 + 1e-4 * v as f64, [0.0, 0.6, 0.8]);
            for (t, s) in predict_ballstick(&p, &scheme).iter().enumerate() {
                data[v + t * nv] = 500.0 * s;
            }
        }
        let dwi = Volume::new(vec![nv, 1, 1, scheme.len()], [2.0; 3], a, data).unwrap();
        let mask = Volume::new(vec![nv, 1, 1], [2.0; 3], a, mask_vals).unwrap();
        (dwi, scheme, mask)
    }

    #[test]
    fn outputs_only_inside_mask() {
        let (dwi, scheme, mask) = tiny(vec![1.0, 0.0, 1.0, 1.0]);
        let out = fit_volume(&dwi, &scheme, &mask, ModelChoice::Both, &FitConfig::default(), None).unwrap();
        assert_eq!(out.fitted, 3);
        for (_, v) in &out.maps {
            assert_eq!(v.data()[1], 0.0);
        }
        let fww = out.map("fww").unwrap();
        assert!((fww.data()[2] - 0.2).abs() < 1e-4);
        let md = out.map("md").unwrap().data()[0];
        let ad = out.map("ad").unwrap().data()[0];
        let rd = out.map("rd").unwrap().data()[0];
        assert_eq!(md, (ad + 2.0 * rd) / 3.0);
    }

    #[test]
    fn empty_mask_gives_zeros() {
        let (dwi, scheme, mask) = tiny(vec![0.0; 3]);
        let out = fit_volume(&dwi, &scheme, &mask, ModelChoice::BallStick, &FitConfig::default(), None).unwrap();
        assert_eq!(out.fitted, 0);
        assert!(out.maps.iter().all(|(_, v)| v.data().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn mask_dimension_mismatch() {
        let (dwi, scheme, _) = tiny(vec![1.0; 3]);
        let bad = Volume::new(vec![2, 1, 1], [2.0; 3], scaling_affine([2.0; 3]), vec![1.0; 2]).unwrap();
        assert!(matches!(
            fit_volume(&dwi, &scheme, &bad, ModelChoice::Dti, &FitConfig::default(), None),
            Err(ModelError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_b0_voxel_is_flagged_failed() {
        let (mut dwi, scheme, mask) = tiny(vec![1.0, 1.0]);
        let nv = 2;
        for t in 0..scheme.len() {
            dwi.data_mut()[1 + t * nv] = 0.0;
        }
        let out = fit_volume(&dwi, &scheme, &mask, ModelChoice::Dti, &FitConfig::default(), None).unwrap();
        assert_eq!(out.failed, 1);
        assert_eq!(out.map("flags").unwrap().data()[1] as u8, flags::FAILED);
    }
}
