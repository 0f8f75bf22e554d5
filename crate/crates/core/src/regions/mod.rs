//! Per-vertebral-level aggregation restricted to white matter, lesion load,
//! and the cohort table that feeds the statistics.

mod components;
mod table;

pub use components::label_components;
pub use table::{CohortRow, CohortTable, Group, RowClass};

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::io::{LabelMap, Volume};
use crate::metric::Metric;

/// Levels pooled by default for the group comparison (C2-C4).
pub const DEFAULT_LEVELS: [u8; 3] = [2, 3, 4];

#[derive(Debug, thiserror::Error)]
pub enum RegionError {
    #[error("level C{0} has zero white-matter weight")]
    EmptyRegion(u8),
    #[error("no lesion mask supplied")]
    MissingLesionMask,
    #[error("geometry mismatch between metric map and labels")]
    GeometryMismatch,
    #[error("duplicate row for subject `{subject}` level C{level}")]
    DuplicateRow { subject: String, level: u8 },
    #[error("level {0} outside 1..=7")]
    InvalidLevel(u8),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown group for subject `{0}`")]
    UnknownSubject(String),
    #[error("non-finite {metric} for subject `{subject}` level C{level}")]
    NonFinite { subject: String, level: u8, metric: Metric },
    #[error("{path}: {reason}")]
    Table { path: PathBuf, reason: String },
}

/// How white-matter partial-volume weights enter the mean.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Weighting {
    /// Weighted mean with the partial-volume weights.
    #[default]
    Partial,
    /// Unweighted mean over voxels with weight >= threshold.
    Binary { threshold: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelMean {
    pub mean: f64,
    pub weight_sum: f64,
    pub voxel_count: usize,
}

/// White-matter weighted mean of `metric` over voxels labelled `level`.
pub fn aggregate_level(metric: &Volume, labels: &LabelMap, level: u8, weighting: Weighting) -> Result<LevelMean, RegionError> {
    if !(1..=7).contains(&level) {
        return Err(RegionError::InvalidLevel(level));
    }
    if !metric.same_grid(&labels.levels) || metric.n_frames() != 1 {
        return Err(RegionError::GeometryMismatch);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0;
    for ((&m, &l), &w) in metric
        .data()
        .iter()
        .zip(labels.levels.data())
        .zip(labels.wm_weight.data())
    {
        if l as u8 != level || l == 0.0 {
            continue;
        }
        let w = match weighting {
            Weighting::Partial => w,
            Weighting::Binary { threshold } => f64::from(w >= threshold && w > 0.0),
        };
        if w > 0.0 {
            num += w * m;
            den += w;
            count += 1;
        }
    }
    if den <= 0.0 {
        return Err(RegionError::EmptyRegion(level));
    }
    Ok(LevelMean {
        mean: num / den,
        weight_sum: den,
        voxel_count: count,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LesionStats {
    pub level: u8,
    /// Number of 6-connected lesion components within the level.
    pub lesion_count: usize,
    pub lesion_voxels: usize,
    pub level_voxels: usize,
    /// Lesion voxels / level voxels.
    pub lesion_fraction: f64,
}

pub fn lesion_stats(labels: &LabelMap, level: u8) -> Result<LesionStats, RegionError> {
    if !(1..=7).contains(&level) {
        return Err(RegionError::InvalidLevel(level));
    }
    let lesion = labels.lesion.as_ref().ok_or(RegionError::MissingLesionMask)?;
    let in_level: Vec<bool> = labels.levels.data().iter().map(|&l| l == level as f64).collect();
    let mask: Vec<bool> = in_level
        .iter()
        .zip(lesion.data())
        .map(|(&a, &les)| a && les != 0.0)
        .collect();
    let level_voxels = in_level.iter().filter(|&&a| a).count();
    let lesion_voxels = mask.iter().filter(|&&a| a).count();
    let (_, lesion_count) = label_components(&mask, labels.levels.spatial_dims());
    let lesion_fraction = if level_voxels == 0 {
        0.0
    } else {
        lesion_voxels as f64 / level_voxels as f64
    };
    Ok(LesionStats {
        level,
        lesion_count,
        lesion_voxels,
        level_voxels,
        lesion_fraction,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub subject: String,
    pub level: u8,
    /// Indexed by [`Metric::index`].
    pub metrics: [f64; 6],
    pub wm_weight_sum: f64,
    pub voxel_count: usize,
}

/// Aggregates all six metric maps for one subject over `levels`. Levels with
/// no white-matter weight are skipped with a warning.
pub fn summarize_subject(
    subject: &str,
    maps: &BTreeMap<Metric, Volume>,
    labels: &LabelMap,
    levels: &[u8],
    weighting: Weighting,
) -> Result<Vec<LevelSummary>, RegionError> {
    let mut out = Vec::new();
    'levels: for &level in levels {
        let mut metrics = [0.0; 6];
        let mut stats = None;
        for m in Metric::ALL {
            let vol = maps.get(&m).ok_or_else(|| RegionError::Table {
                path: PathBuf::from(m.column()),
                reason: "metric map missing".into(),
            })?;
            match aggregate_level(vol, labels, level, weighting) {
                Ok(lm) => {
                    metrics[m.index()] = lm.mean;
                    stats = Some(lm);
                }
                Err(RegionError::EmptyRegion(_)) => {
                    log::warn!("subject {subject}: level C{level} has no white matter, skipped");
                    continue 'levels;
                }
                Err(e) => return Err(e),
            }
        }
        let lm = stats.expect("six metrics aggregated");
        out.push(LevelSummary {
            subject: subject.to_string(),
            level,
            metrics,
            wm_weight_sum: lm.weight_sum,
            voxel_count: lm.voxel_count,
        });
    }
    Ok(out)
}

/// Joins level summaries with lesion load into a cohort table restricted to
/// `levels`. Healthy subjects have lesion fraction 0.
pub fn build_cohort(
    summaries: &[LevelSummary],
    lesions: &BTreeMap<(String, u8), LesionStats>,
    groups: &BTreeMap<String, Group>,
    levels: &[u8],
) -> Result<CohortTable, RegionError> {
    let mut table = CohortTable::default();
    for s in summaries.iter().filter(|s| levels.contains(&s.level)) {
        let group = *groups
            .get(&s.subject)
            .ok_or_else(|| RegionError::UnknownSubject(s.subject.clone()))?;
        let lesion_fraction = match group {
            Group::Healthy => 0.0,
            Group::Patient => {
                lesions
                    .get(&(s.subject.clone(), s.level))
                    .ok_or(RegionError::MissingLesionMask)?
                    .lesion_fraction
            }
        };
        table.push(CohortRow {
            subject: s.subject.clone(),
            group,
            level: s.level,
            metrics: s.metrics,
            lesion_fraction,
        })?;
    }
    Ok(table)
}

/// Patient rows whose lesion fraction exceeds `thr`.
pub fn select_ms_rows(table: &CohortTable, thr: f64) -> Result<Vec<&CohortRow>, RegionError> {
    if !(0.0..=1.0).contains(&thr) {
        return Err(RegionError::InvalidThreshold(thr));
    }
    Ok(table
        .rows()
        .iter()
        .filter(|r| r.group == Group::Patient && r.lesion_fraction > thr)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::scaling_affine;

    fn labels(levels: Vec<f64>, wm: Vec<f64>, lesion: Option<Vec<f64>>) -> LabelMap {
        let n = levels.len();
        let a = scaling_affine([1.0; 3]);
        let v = |d: Vec<f64>| Volume::new(vec![n, 1, 1], [1.0; 3], a, d).unwrap();
        LabelMap::new(v(levels), v(wm), lesion.map(v)).unwrap()
    }

    fn metric(vals: Vec<f64>) -> Volume {
        let n = vals.len();
        Volume::new(vec![n, 1, 1], [1.0; 3], scaling_affine([1.0; 3]), vals).unwrap()
    }

    #[test]
    fn weighted_mean_by_hand() {
        let l = labels(vec![3.0, 3.0, 0.0], vec![0.25, 0.75, 1.0], None);
        let r = aggregate_level(&metric(vec![1.0, 3.0, 100.0]), &l, 3, Weighting::Partial).unwrap();
        assert!((r.mean - 2.5).abs() < 1e-15);
        assert_eq!(r.voxel_count, 2);
        let b = aggregate_level(&metric(vec![1.0, 3.0, 100.0]), &l, 3, Weighting::Binary { threshold: 0.5 }).unwrap();
        assert_eq!(b.mean, 3.0);
    }

    #[test]
    fn constant_map_and_missing_level() {
        let l = labels(vec![1.0, 2.0, 2.0, 2.0], vec![0.1, 0.3, 0.9, 0.2], None);
        let m = metric(vec![0.7; 4]);
        assert!((aggregate_level(&m, &l, 2, Weighting::Partial).unwrap().mean - 0.7).abs() < 1e-15);
        assert!(matches!(aggregate_level(&m, &l, 5, Weighting::Partial), Err(RegionError::EmptyRegion(5))));
    }

    #[test]
    fn geometry_mismatch() {
        let l = labels(vec![1.0, 1.0], vec![1.0, 1.0], None);
        assert!(matches!(
            aggregate_level(&metric(vec![1.0; 3]), &l, 1, Weighting::Partial),
            Err(RegionError::GeometryMismatch)
        ));
    }

    #[test]
    fn lesion_counting() {
        let mut lv = vec![2.0; 100];
        lv.push(3.0);
        let mut les = vec![0.0; 101];
        for x in les.iter_mut().skip(20).take(10) {
            *x = 1.0;
        }
        les[100] = 1.0;
        let l = labels(lv.clone(), vec![1.0; 101], Some(les));
        let s = lesion_stats(&l, 2).unwrap();
        assert_eq!((s.lesion_count, s.lesion_fraction), (1, 0.10));
        let s3 = lesion_stats(&l, 3).unwrap();
        assert_eq!(s3.lesion_fraction, 1.0);

        let empty = labels(lv.clone(), vec![1.0; 101], Some(vec![0.0; 101]));
        let s = lesion_stats(&empty, 2).unwrap();
        assert_eq!((s.lesion_count, s.lesion_fraction), (0, 0.0));

        let none = labels(lv, vec![1.0; 101], None);
        assert!(matches!(lesion_stats(&none, 2), Err(RegionError::MissingLesionMask)));
    }

    fn summary(subject: &str, level: u8) -> LevelSummary {
        LevelSummary {
            subject: subject.into(),
            level,
            metrics: [0.16, 1.1e-3, 1.6e-3, 0.6, 0.8e-3, 0.4e-3],
            wm_weight_sum: 10.0,
            voxel_count: 12,
        }
    }

    #[test]
    fn cohort_construction() {
        let mut summaries = Vec::new();
        let mut groups = BTreeMap::new();
        for s in 0..29 {
            let id = format!("h{s:02}");
            for level in 1..=7 {
                summaries.push(summary(&id, level));
            }
            groups.insert(id, Group::Healthy);
        }
        summaries.push(summary("p01", 3));
        groups.insert("p01".into(), Group::Patient);
        let mut lesions = BTreeMap::new();
        lesions.insert(
            ("p01".to_string(), 3),
            LesionStats {
                level: 3,
                lesion_count: 1,
                lesion_voxels: 12,
                level_voxels: 100,
                lesion_fraction: 0.12,
            },
        );
        let t = build_cohort(&summaries, &lesions, &groups, &DEFAULT_LEVELS).unwrap();
        assert_eq!(t.rows().iter().filter(|r| r.class() == RowClass::V).count(), 87);
        assert_eq!(select_ms_rows(&t, 0.10).unwrap().len(), 1);
        assert_eq!(select_ms_rows(&t, 0.15).unwrap().len(), 0);
        assert_eq!(select_ms_rows(&t, 0.0).unwrap().len(), 1);
        assert!(select_ms_rows(&t, 1.5).is_err());

        summaries.push(summary("h00", 2));
        assert!(matches!(
            build_cohort(&summaries, &lesions, &groups, &DEFAULT_LEVELS),
            Err(RegionError::DuplicateRow { .. })
        ));
    }
}
