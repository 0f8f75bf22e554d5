//! Synthetic spinal-cord diffusion datasets with known ground truth.
//!
//! The cord is a cylinder along z. Voxels whose centre lies inside the
//! inner radius of the white-matter annulus carry grey-matter parameters,
//! the rest of the cord carries white-matter parameters (optionally per
//! level), and ellipsoidal lesions override both. Background voxels have zero
//! signal before noise.

pub mod cohort;
mod directions;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use directions::DIRECTIONS_30;

use crate::io::{scaling_affine, GradientScheme, IoError, LabelMap, Volume};
use crate::models::{
    dti_metrics, predict_ballstick, BallStickParams, DtiDesign, D0_DEFAULT, D_MAX, LAMBDA_PERP_DEFAULT,
};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Ball-and-Stick truth of one tissue class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TissueParams {
    pub f: f64,
    /// mm²/s
    pub d: f64,
}

impl TissueParams {
    pub const HEALTHY_WM: TissueParams = TissueParams { f: 0.16, d: 1.14e-3 };
    pub const LESION: TissueParams = TissueParams { f: 0.21, d: 1.02e-3 };
    pub const GM: TissueParams = TissueParams { f: 0.30, d: 0.90e-3 };

    fn validate(&self, what: &str) -> Result<(), PhantomError> {
        if !(0.0..=1.0).contains(&self.f) || !(self.d > 0.0 && self.d <= D_MAX) {
            return Err(PhantomError::InvalidSpec(format!(
                "{what}: f must be in [0,1] and d in (0, {D_MAX}], got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRange {
    pub label: u8,
    /// Half-open slice range `[start, end)`.
    pub z_range: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    /// mm
    pub inner: f64,
    /// mm
    pub outer: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    /// Centre in voxel coordinates.
    pub center: [f64; 3],
    /// Semi-axes in mm.
    pub radii: [f64; 3],
    pub params: TissueParams,
}

impl LesionSpec {
    fn contains(&self, p: [f64; 3], voxel_size: [f64; 3]) -> bool {
        (0..3)
            .map(|k| ((p[k] - self.center[k]) * voxel_size[k] / self.radii[k]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    None,
    Gaussian {
        sigma: f64,
    },
    Rician {
        sigma: f64,
    },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } | NoiseModel::Rician { sigma } => sigma,
        }
    }
}

/// Single-shell acquisition: `n_b0` b = 0 images then `repeats` passes over
/// the 30-direction set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub n_b0: usize,
    pub b: f64,
    pub repeats: usize,
}

impl Default for Acquisition {
    fn default() -> Self {
        Acquisition {
            n_b0: 6,
            b: 900.0,
            repeats: 3,
        }
    }
}

impl Acquisition {
    pub fn scheme(&self) -> Result<GradientScheme, IoError> {
        GradientScheme::shelled(self.n_b0, self.b, &DIRECTIONS_30, self.repeats)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    /// mm
    pub voxel_size: [f64; 3],
    /// Cord axis position in voxel coordinates; defaults to the image centre.
    pub cord_center: Option<[f64; 2]>,
    /// mm
    pub cord_radius: f64,
    /// Vertebral levels; empty means an even split of the slices into C1..C7.
    pub levels: Vec<LevelRange>,
    pub wm_annulus: Annulus,
    pub wm: TissueParams,
    pub gm: TissueParams,
    /// Per-level white-matter overrides.
    pub level_wm: BTreeMap<u8, TissueParams>,
    pub fiber_direction: [f64; 3],
    pub lesions: Vec<LesionSpec>,
    pub noise: NoiseModel,
    pub s0: f64,
    pub seed: u64,
    pub acquisition: Acquisition,
    pub d0: f64,
    pub lambda_perp: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [80, 80, 16],
            voxel_size: [2.0, 2.0, 2.0],
            cord_center: None,
            cord_radius: 14.0,
            levels: Vec::new(),
            wm_annulus: Annulus {
                inner: 6.0,
                outer: 14.0,
            },
            wm: TissueParams::HEALTHY_WM,
            gm: TissueParams::GM,
            level_wm: BTreeMap::new(),
            fiber_direction: [0.0, 0.0, 1.0],
            lesions: Vec::new(),
            noise: NoiseModel::None,
            s0: 1000.0,
            seed: 0,
            acquisition: Acquisition::default(),
            d0: D0_DEFAULT,
            lambda_perp: LAMBDA_PERP_DEFAULT,
        }
    }
}

/// Splits `nz` slices into seven contiguous levels, extra slices going to
/// the first levels.
pub fn default_levels(nz: usize) -> Vec<LevelRange> {
    let n = 7.min(nz);
    let base = nz / n;
    let extra = nz % n;
    let mut z = 0;
    (0..n)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = LevelRange {
                label: i as u8 + 1,
                z_range: [z, z + len],
            };
            z += len;
            r
        })
        .collect()
}

impl PhantomSpec {
    pub fn center(&self) -> [f64; 2] {
        self.cord_center.unwrap_or([
            (self.dims[0] as f64 - 1.0) / 2.0,
            (self.dims[1] as f64 - 1.0) / 2.0,
        ])
    }

    pub fn resolved_levels(&self) -> Vec<LevelRange> {
        if self.levels.is_empty() {
            default_levels(self.dims[2])
        } else {
            self.levels.clone()
        }
    }

    /// In-plane distance (mm) of point `(x, y)` from the cord axis.
    fn radius_mm(&self, x: f64, y: f64) -> f64 {
        let c = self.center();
        (((x - c[0]) * self.voxel_size[0]).powi(2) + ((y - c[1]) * self.voxel_size[1]).powi(2)).sqrt()
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::InvalidSpec(m));
        if self.dims.iter().any(|&d| d == 0) {
            return bad(format!("dims must be positive, got {:?}", self.dims));
        }
        if self.voxel_size.iter().any(|&v| !(v > 0.0)) {
            return bad(format!("voxel sizes must be positive, got {:?}", self.voxel_size));
        }
        if !(self.cord_radius > 0.0) {
            return bad("cord_radius must be positive".into());
        }
        let c = self.center();
        let room = [
            c[0].min(self.dims[0] as f64 - 1.0 - c[0]) * self.voxel_size[0],
            c[1].min(self.dims[1] as f64 - 1.0 - c[1]) * self.voxel_size[1],
        ];
        if room[0] < self.cord_radius || room[1] < self.cord_radius {
            return bad("cord does not fit inside the field of view".into());
        }
        let Annulus { inner, outer } = self.wm_annulus;
        if !(inner >= 0.0 && outer > inner) {
            return bad(format!("WM annulus needs 0 <= inner < outer, got {inner}, {outer}"));
        }
        if !(self.s0 > 0.0) {
            return bad("s0 must be positive".into());
        }
        let sigma = self.noise.sigma();
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return bad(format!("noise sigma must be >= 0, got {sigma}"));
        }
        let fd = self.fiber_direction;
        if fd.iter().map(|x| x * x).sum::<f64>() < 1e-12 {
            return bad("fiber_direction must be non-zero".into());
        }
        self.wm.validate("wm")?;
        self.gm.validate("gm")?;
        for (l, p) in &self.level_wm {
            p.validate(&format!("level_wm[{l}]"))?;
        }

        let levels = self.resolved_levels();
        let mut covered = vec![0u8; self.dims[2]];
        let mut labels = Vec::new();
        for lv in &levels {
            if !(1..=7).contains(&lv.label) || labels.contains(&lv.label) {
                return bad(format!("level labels must be unique in 1..=7, got {}", lv.label));
            }
            labels.push(lv.label);
            let [a, b] = lv.z_range;
            if a >= b || b > self.dims[2] {
                return bad(format!("level {} has invalid z range {:?}", lv.label, lv.z_range));
            }
            for c in &mut covered[a..b] {
                *c += 1;
            }
        }
        if covered.iter().any(|&c| c != 1) {
            return bad("level z ranges must partition the slices".into());
        }

        for (i, les) in self.lesions.iter().enumerate() {
            les.params.validate(&format!("lesion {i}"))?;
            if les.radii.iter().any(|&r| !(r > 0.0)) {
                return bad(format!("lesion {i}: radii must be positive"));
            }
            let reach = self.radius_mm(les.center[0], les.center[1]) + les.radii[0].max(les.radii[1]);
            let zr = les.radii[2] / self.voxel_size[2];
            if reach > self.cord_radius || les.center[2] - zr < -0.5 || les.center[2] + zr > self.dims[2] as f64 - 0.5 {
                return bad(format!("lesion {i} extends outside the cord"));
            }
        }
        self.acquisition.scheme()?;
        Ok(())
    }
}

/// Additive noise on one magnitude sample.
pub fn add_noise<R: Rng + ?Sized>(signal: f64, model: NoiseModel, rng: &mut R) -> f64 {
    match model {
        NoiseModel::None => signal,
        NoiseModel::Gaussian { sigma } if sigma == 0.0 => signal,
        NoiseModel::Rician { sigma } if sigma == 0.0 => signal,
        NoiseModel::Gaussian { sigma } => {
            let n: f64 = rng.sample(StandardNormal);
            signal + sigma * n
        }
        NoiseModel::Rician { sigma } => {
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            ((signal + sigma * n1).powi(2) + (sigma * n2).powi(2)).sqrt()
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhantomOutput {
    pub dwi: Volume,
    pub scheme: GradientScheme,
    pub labels: LabelMap,
    /// Truth maps: fww, stick_ad, nx, ny, nz, fa, md, ad, rd.
    pub truth: Vec<(String, Volume)>,
    /// Lesion voxels per level label.
    pub lesion_voxels: BTreeMap<u8, usize>,
    /// Voxels per level label.
    pub level_voxels: BTreeMap<u8, usize>,
}

impl PhantomOutput {
    pub fn truth_map(&self, name: &str) -> Option<&Volume> {
        self.truth.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Cord mask (non-zero level label).
    pub fn cord_mask(&self) -> Volume {
        let d = self.labels.levels.data().iter().map(|&l| f64::from(l > 0.0)).collect();
        self.labels.levels.with_data_3d(d)
    }
}

pub fn generate(spec: &PhantomSpec) -> Result<PhantomOutput, PhantomError> {
    spec.validate()?;
    let scheme = spec.acquisition.scheme()?;
    let [nx, ny, nz] = spec.dims;
    let nv = nx * ny * nz;
    let nt = scheme.len();
    let affine = scaling_affine(spec.voxel_size);
    let levels = spec.resolved_levels();
    let mut level_of_slice = vec![0u8; nz];
    for lv in &levels {
        for z in lv.z_range[0]..lv.z_range[1] {
            level_of_slice[z] = lv.label;
        }
    }
    let fnorm = spec.fiber_direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n = spec.fiber_direction.map(|c| c / fnorm);
    let dti = DtiDesign::new(&scheme).map_err(|e| PhantomError::InvalidSpec(e.to_string()))?;

    let mut level_map = vec![0.0; nv];
    let mut wm = vec![0.0; nv];
    let mut lesion = vec![0.0; nv];
    let truth_names = ["fww", "stick_ad", "nx", "ny", "nz", "fa", "md", "ad", "rd"];
    let mut truth: Vec<Vec<f64>> = vec![vec![0.0; nv]; truth_names.len()];
    let mut tissue: Vec<Option<TissueParams>> = vec![None; nv];
    let mut lesion_voxels = BTreeMap::new();
    let mut level_voxels = BTreeMap::new();

    let offsets = [-1.0 / 3.0, 0.0, 1.0 / 3.0];
    let Annulus { inner, outer } = spec.wm_annulus;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let v = x + nx * (y + ny * z);
                let (xf, yf, zf) = (x as f64, y as f64, z as f64);
                // 3×3×3 sub-voxel sampling; the annulus is constant along z so
                // the three z layers agree and only the in-plane 3×3 is counted.
                let mut inside = 0;
                for dy in offsets {
                    for dx in offsets {
                        let r = spec.radius_mm(xf + dx, yf + dy);
                        if r >= inner && r <= outer {
                            inside += 1;
                        }
                    }
                }
                wm[v] = inside as f64 / 9.0;

                let r = spec.radius_mm(xf, yf);
                if r > spec.cord_radius {
                    continue;
                }
                let label = level_of_slice[z];
                level_map[v] = label as f64;
                *level_voxels.entry(label).or_insert(0) += 1;
                let mut params = if r < inner {
                    spec.gm
                } else {
                    spec.level_wm.get(&label).copied().unwrap_or(spec.wm)
                };
                if let Some(les) = spec.lesions.iter().rev().find(|l| l.contains([xf, yf, zf], spec.voxel_size)) {
                    params = les.params;
                    lesion[v] = 1.0;
                    *lesion_voxels.entry(label).or_insert(0) += 1;
                }
                tissue[v] = Some(params);
            }
        }
    }

    // Truth DTI metrics per distinct tissue parameter set.
    let mut dti_cache: Vec<(TissueParams, [f64; 4])> = Vec::new();
    let mut dwi = vec![0.0; nv * nt];
    for v in 0..nv {
        let mut rng = rng::stream(spec.seed, v as u64);
        let clean = match tissue[v] {
            Some(t) => {
                let p = BallStickParams {
                    f: t.f,
                    d: t.d,
                    n,
                    d0: spec.d0,
                    lambda_perp: spec.lambda_perp,
                };
                let att = predict_ballstick(&p, &scheme);
                let m = match dti_cache.iter().find(|(k, _)| *k == t) {
                    Some((_, m)) => *m,
                    None => {
                        let (tensor, _) = dti
                            .fit(&att)
                            .map_err(|e| PhantomError::InvalidSpec(e.to_string()))?;
                        let m = dti_metrics(&tensor);
                        let m = [m.fa, m.md, m.ad, m.rd];
                        dti_cache.push((t, m));
                        m
                    }
                };
                for (k, val) in [t.f, t.d, n[0], n[1], n[2], m[0], m[1], m[2], m[3]].into_iter().enumerate() {
                    truth[k][v] = val;
                }
                att
            }
            None => vec![0.0; nt],
        };
        for (t, a) in clean.iter().enumerate() {
            dwi[v + t * nv] = add_noise(spec.s0 * a, spec.noise, &mut rng);
        }
    }

    let vol3 = |d: Vec<f64>| Volume::new(spec.dims.to_vec(), spec.voxel_size, affine, d);
    let labels = LabelMap::new(vol3(level_map)?, vol3(wm)?, Some(vol3(lesion)?))?;
    let truth = truth_names
        .iter()
        .zip(truth)
        .map(|(n, d)| Ok((n.to_string(), vol3(d)?)))
        .collect::<Result<Vec<_>, IoError>>()?;
    let dwi = Volume::new(vec![nx, ny, nz, nt], spec.voxel_size, affine, dwi)?;
    Ok(PhantomOutput {
        dwi,
        scheme,
        labels,
        truth,
        lesion_voxels,
        level_voxels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::normalize_attenuation;

    fn small() -> PhantomSpec {
        PhantomSpec {
            dims: [20, 20, 8],
            cord_radius: 8.0,
            wm_annulus: Annulus { inner: 3.0, outer: 8.0 },
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn default_level_partition() {
        let l = default_levels(16);
        assert_eq!(l.len(), 7);
        assert_eq!(l[0].z_range, [0, 3]);
        assert_eq!(l[1].z_range, [3, 6]);
        assert_eq!(l[6].z_range, [14, 16]);
    }

    #[test]
    fn noise_free_signals_match_forward_model() {
        let spec = small();
        let out = generate(&spec).unwrap();
        let nv = out.dwi.n_voxels();
        let mut checked = 0;
        for v in 0..nv {
            if out.labels.levels.data()[v] == 0.0 {
                assert!(out.dwi.voxel_series(v).iter().all(|&s| s == 0.0));
                continue;
            }
            let p = BallStickParams::new(
                out.truth_map("fww").unwrap().data()[v],
                out.truth_map("stick_ad").unwrap().data()[v],
                [0.0, 0.0, 1.0],
            );
            let (norm, s0) = normalize_attenuation(&out.dwi.voxel_series(v), &out.scheme).unwrap();
            assert!((s0 - 1000.0).abs() < 1e-9);
            for (a, b) in norm.iter().zip(predict_ballstick(&p, &out.scheme)) {
                assert!((a - b).abs() < 1e-14);
            }
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = PhantomSpec {
            noise: NoiseModel::Rician { sigma: 50.0 },
            seed: 9,
            ..small()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.dwi.data(), b.dwi.data());
        let c = generate(&PhantomSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a.dwi.data(), c.dwi.data());
    }

    #[test]
    fn no_lesions_means_zero_lesion_volume() {
        let out = generate(&small()).unwrap();
        assert!(out.lesion_voxels.is_empty());
        assert!(out.labels.lesion.as_ref().unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lesion_outside_cord_is_rejected() {
        let mut spec = small();
        spec.lesions.push(LesionSpec {
            center: [9.5, 9.5, 4.0],
            radii: [9.0, 2.0, 2.0],
            params: TissueParams::LESION,
        });
        assert!(matches!(generate(&spec), Err(PhantomError::InvalidSpec(_))));
        spec.lesions[0].radii = [3.0, 3.0, 2.0];
        let out = generate(&spec).unwrap();
        assert!(out.lesion_voxels.values().sum::<usize>() > 0);
    }

    #[test]
    fn wm_weights_are_partial_at_edges() {
        let out = generate(&small()).unwrap();
        let w = out.labels.wm_weight.data();
        assert!(w.iter().any(|&x| x > 0.0 && x < 1.0));
        assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn invalid_levels_rejected() {
        let mut spec = small();
        spec.levels = vec![LevelRange { label: 1, z_range: [0, 4] }, LevelRange { label: 2, z_range: [3, 8] }];
        assert!(generate(&spec).is_err());
        spec.noise = NoiseModel::Gaussian { sigma: -1.0 };
        spec.levels.clear();
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let mut r = rng::stream(1, 2);
        for m in [NoiseModel::None, NoiseModel::Gaussian { sigma: 0.0 }, NoiseModel::Rician { sigma: 0.0 }] {
            assert_eq!(add_noise(3.25, m, &mut r), 3.25);
        }
    }

    #[test]
    fn spec_json_round_trip_with_defaults() {
        let spec: PhantomSpec = serde_json::from_str(r#"{"seed": 42, "noise": {"kind": "rician", "sigma": 50.0}}"#).unwrap();
        assert_eq!(spec.dims, [80, 80, 16]);
        assert_eq!(spec.noise, NoiseModel::Rician { sigma: 50.0 });
        let back: PhantomSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
