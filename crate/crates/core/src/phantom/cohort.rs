//! Multi-subject phantom cohorts run through the full fit/aggregate pipeline.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{generate, LesionSpec, PhantomError, PhantomSpec, TissueParams};
use crate::io::Volume;
use crate::metric::Metric;
use crate::models::{fit_volume, FitConfig, FitOutput, ModelChoice, D_MAX};
use crate::regions::{build_cohort, lesion_stats, summarize_subject, CohortTable, Group, LesionStats, Weighting};
use crate::rng;

/// Per-(subject, level) Gaussian spread of the white-matter truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub f: f64,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortDesign {
    pub n_healthy: usize,
    pub n_patients: usize,
    /// Geometry, acquisition and noise shared by all subjects.
    pub base: PhantomSpec,
    pub healthy: TissueParams,
    /// Lesion-free patient white matter.
    pub nawm: TissueParams,
    pub lesion: TissueParams,
    pub jitter: Jitter,
    /// Additive per-level shifts applied to every subject's white matter.
    pub level_shift: BTreeMap<u8, TissueParams>,
    /// Levels that may carry lesions and are fitted and tabulated.
    pub levels: Vec<u8>,
    /// Probability that a patient level carries a lesion.
    pub lesion_prob: f64,
    /// In-plane lesion radius range (mm).
    pub lesion_radius: [f64; 2],
    pub seed: u64,
}

impl Default for CohortDesign {
    fn default() -> Self {
        CohortDesign {
            n_healthy: 25,
            n_patients: 25,
            base: PhantomSpec {
                dims: [28, 28, 14],
                cord_radius: 10.0,
                wm_annulus: super::Annulus { inner: 3.0, outer: 10.0 },
                noise: super::NoiseModel::Rician { sigma: 50.0 },
                ..PhantomSpec::default()
            },
            healthy: TissueParams::HEALTHY_WM,
            nawm: TissueParams { f: 0.1774, d: 1.135e-3 },
            lesion: TissueParams::LESION,
            jitter: Jitter { f: 0.02, d: 0.03e-3 },
            level_shift: BTreeMap::new(),
            levels: vec![2, 3, 4],
            lesion_prob: 0.75,
            lesion_radius: [2.5, 5.5],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Subject {
    pub id: String,
    pub group: Group,
    pub spec: PhantomSpec,
}

fn jittered(base: TissueParams, shift: Option<&TissueParams>, jitter: Jitter, rng: &mut impl Rng) -> TissueParams {
    let (sf, sd) = shift.map_or((0.0, 0.0), |s| (s.f, s.d));
    let zf: f64 = rng.sample(StandardNormal);
    let zd: f64 = rng.sample(StandardNormal);
    TissueParams {
        f: (base.f + sf + jitter.f * zf).clamp(0.0, 0.95),
        d: (base.d + sd + jitter.d * zd).clamp(1e-4, D_MAX),
    }
}

impl CohortDesign {
    pub fn subjects(&self) -> Result<Vec<Subject>, PhantomError> {
        if !(0.0..=1.0).contains(&self.lesion_prob) {
            return Err(PhantomError::InvalidSpec("lesion_prob must be in [0, 1]".into()));
        }
        let [rmin, rmax] = self.lesion_radius;
        if !(rmin > 0.0 && rmax >= rmin) {
            return Err(PhantomError::InvalidSpec("lesion_radius must satisfy 0 < min <= max".into()));
        }
        let levels = self.base.resolved_levels();
        let c = self.base.center();
        let vs = self.base.voxel_size;
        let mid = 0.5 * (self.base.wm_annulus.inner + self.base.wm_annulus.outer);
        let total = self.n_healthy + self.n_patients;
        (0..total)
            .map(|i| {
                let group = if i < self.n_healthy { Group::Healthy } else { Group::Patient };
                let id = match group {
                    Group::Healthy => format!("hc{:02}", i + 1),
                    Group::Patient => format!("ms{:02}", i - self.n_healthy + 1),
                };
                let mut r = rng::keyed(&[self.seed, i as u64, 0xc0]);
                let mut spec = self.base.clone();
                spec.seed = rng::hash_words(&[self.seed, i as u64, 0x0e]);
                let wm = if group == Group::Healthy { self.healthy } else { self.nawm };
                spec.level_wm = levels
                    .iter()
                    .map(|lv| (lv.label, jittered(wm, self.level_shift.get(&lv.label), self.jitter, &mut r)))
                    .collect();
                spec.lesions.clear();
                if group == Group::Patient {
                    for lv in levels.iter().filter(|lv| self.levels.contains(&lv.label)) {
                        let hit = r.random::<f64>() < self.lesion_prob;
                        let radius = rmin + (rmax - rmin) * r.random::<f64>();
                        let angle = TAU * r.random::<f64>();
                        if !hit {
                            continue;
                        }
                        let rho = mid.min(self.base.cord_radius - radius - 1e-6).max(0.0);
                        let [z0, z1] = lv.z_range;
                        spec.lesions.push(LesionSpec {
                            center: [
                                c[0] + rho * angle.cos() / vs[0],
                                c[1] + rho * angle.sin() / vs[1],
                                0.5 * (z0 + z1 - 1) as f64,
                            ],
                            radii: [radius, radius, 0.5 * (z1 - z0) as f64 * vs[2]],
                            params: self.lesion,
                        });
                    }
                }
                Ok(Subject { id, group, spec })
            })
            .collect()
    }
}

/// Metric maps keyed by [`Metric`] from a `ModelChoice::Both` fit.
pub fn metric_maps(fit: &FitOutput) -> BTreeMap<Metric, Volume> {
    Metric::ALL
        .iter()
        .filter_map(|&m| fit.map(m.column()).map(|v| (m, v.clone())))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SimulatedCohort {
    pub table: CohortTable,
    pub subjects: Vec<Subject>,
    pub fitted_voxels: usize,
    pub degenerate_voxels: usize,
}

/// Generates, fits and aggregates every subject of `design`. Only voxels in
/// `design.levels` are fitted.
pub fn simulate(design: &CohortDesign, cfg: &FitConfig, threads: Option<usize>) -> Result<SimulatedCohort, PhantomError> {
    let subjects = design.subjects()?;
    let mut summaries = Vec::new();
    let mut lesions: BTreeMap<(String, u8), LesionStats> = BTreeMap::new();
    let mut groups = BTreeMap::new();
    let (mut fitted, mut degenerate) = (0, 0);
    let err = |e: String| PhantomError::InvalidSpec(e);
    for s in &subjects {
        let out = generate(&s.spec)?;
        let mask_data = out
            .labels
            .levels
            .data()
            .iter()
            .map(|&l| f64::from(l > 0.0 && design.levels.contains(&(l as u8))))
            .collect();
        let mask = out.labels.levels.with_data_3d(mask_data);
        let fit = fit_volume(&out.dwi, &out.scheme, &mask, ModelChoice::Both, cfg, threads).map_err(|e| err(e.to_string()))?;
        fitted += fit.fitted;
        degenerate += fit.degenerate;
        let maps = metric_maps(&fit);
        summaries.extend(
            summarize_subject(&s.id, &maps, &out.labels, &design.levels, Weighting::Partial).map_err(|e| err(e.to_string()))?,
        );
        for &l in &design.levels {
            let st = lesion_stats(&out.labels, l).map_err(|e| err(e.to_string()))?;
            lesions.insert((s.id.clone(), l), st);
        }
        groups.insert(s.id.clone(), s.group);
        log::info!("{}: {} voxels fitted", s.id, fit.fitted);
    }
    let table = build_cohort(&summaries, &lesions, &groups, &design.levels).map_err(|e| err(e.to_string()))?;
    Ok(SimulatedCohort {
        table,
        subjects,
        fitted_voxels: fitted,
        degenerate_voxels: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_is_deterministic_and_valid() {
        let d = CohortDesign::default();
        let a = d.subjects().unwrap();
        let b = d.subjects().unwrap();
        assert_eq!(a.len(), 50);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.spec, y.spec);
            x.spec.validate().unwrap();
        }
        assert!(a.iter().filter(|s| s.group == Group::Healthy).all(|s| s.spec.lesions.is_empty()));
        assert!(a.iter().any(|s| !s.spec.lesions.is_empty()));
    }

    #[test]
    fn lesions_stay_in_their_level() {
        let d = CohortDesign {
            lesion_prob: 1.0,
            lesion_radius: [5.0, 5.0],
            ..CohortDesign::default()
        };
        for s in d.subjects().unwrap().iter().filter(|s| s.group == Group::Patient).take(3) {
            let out = generate(&PhantomSpec { noise: super::super::NoiseModel::None, ..s.spec.clone() }).unwrap();
            for l in [1, 5, 6, 7] {
                assert_eq!(out.lesion_voxels.get(&l), None);
            }
            for l in [2, 3, 4] {
                let st = lesion_stats(&out.labels, l).unwrap();
                assert_eq!(st.lesion_count, 1);
                assert_eq!(st.lesion_voxels, out.lesion_voxels[&l]);
            }
        }
    }

    #[test]
    fn small_noise_free_cohort() {
        let mut d = CohortDesign {
            n_healthy: 2,
            n_patients: 2,
            lesion_prob: 1.0,
            ..CohortDesign::default()
        };
        d.base.noise = super::super::NoiseModel::None;
        d.base.dims = [24, 24, 14];
        d.base.cord_radius = 8.0;
        d.base.wm_annulus.outer = 8.0;
        d.lesion_radius = [3.0, 3.5];
        let c = simulate(&d, &FitConfig::default(), Some(1)).unwrap();
        assert_eq!(c.table.len(), 12);
        assert_eq!(c.table.of_class(crate::regions::RowClass::Ms).count(), 6);
        for r in c.table.rows() {
            assert!((r.metric(Metric::Md) - (r.metric(Metric::Ad) + 2.0 * r.metric(Metric::Rd)) / 3.0).abs() < 1e-15);
        }
    }
}
