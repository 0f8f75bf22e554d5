use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::tukey::ptukey;
use super::{StatsError, ALPHA};
use crate::metric::Metric;
use crate::regions::CohortRow;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairTest {
    pub a: u8,
    pub b: u8,
    /// EMM(a) - EMM(b).
    pub diff: f64,
    pub se: f64,
    /// Studentized range statistic.
    pub q: f64,
    /// Tukey-adjusted p-value.
    pub p_adj: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelComparison {
    pub metric: Metric,
    pub levels: Vec<u8>,
    /// Estimated marginal mean per entry of `levels`.
    pub emm: Vec<f64>,
    pub df_resid: f64,
    pub sigma: f64,
    pub pairs: Vec<PairTest>,
}

impl LevelComparison {
    pub fn pair(&self, a: u8, b: u8) -> Option<&PairTest> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn significant(&self, a: u8, b: u8) -> bool {
        self.pair(a, b).is_some_and(|p| p.significant)
    }

    pub fn emm_of(&self, level: u8) -> Option<f64> {
        self.levels.iter().position(|&l| l == level).map(|i| self.emm[i])
    }
}

/// Additive subject + level least-squares fit of one metric with all pairwise
/// level contrasts adjusted by Tukey's HSD.
pub fn level_pooling(rows: &[CohortRow], metric: Metric) -> Result<LevelComparison, StatsError> {
    let mut subjects: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_level: BTreeMap<u8, usize> = BTreeMap::new();
    for r in rows {
        if !r.metric(metric).is_finite() {
            return Err(StatsError::NonFinite);
        }
        let n = subjects.len();
        subjects.entry(&r.subject).or_insert(n);
        *per_level.entry(r.level).or_default() += 1;
    }
    if let Some((&l, _)) = per_level.iter().find(|(_, &c)| c < 2) {
        return Err(StatsError::UnbalancedDesignUnderdetermined(l));
    }
    let levels: Vec<u8> = per_level.keys().copied().collect();
    if levels.len() < 2 {
        return Err(StatsError::TooFewSamples { need: 2, got: levels.len() });
    }
    let ns = subjects.len();
    let nl = levels.len();
    let p = 1 + (ns - 1) + (nl - 1);
    let n = rows.len();

    let design_row = |s: usize, li: usize| {
        let mut x = vec![0.0; p];
        x[0] = 1.0;
        if s > 0 {
            x[s] = 1.0;
        }
        if li > 0 {
            x[ns + li - 1] = 1.0;
        }
        x
    };
    let mut xm = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        let s = subjects[r.subject.as_str()];
        let li = levels.binary_search(&r.level).unwrap();
        for (j, v) in design_row(s, li).into_iter().enumerate() {
            xm[(i, j)] = v;
        }
        y[i] = r.metric(metric);
    }
    let xtx = xm.transpose() * &xm;
    let svd = xtx.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let xtx_inv = svd.pseudo_inverse(tol).map_err(|_| StatsError::NoResidualDf)?;
    let beta = &xtx_inv * (xm.transpose() * &y);
    let resid = &y - &xm * &beta;
    let df = (n - rank) as f64;
    if df < 1.0 {
        return Err(StatsError::NoResidualDf);
    }
    let sigma2 = resid.norm_squared() / df;
    let scale = y.amax();

    // marginal mean: design row averaged over subjects with equal weight
    let marginal = |li: usize| {
        let mut l = DVector::zeros(p);
        for s in 0..ns {
            l += DVector::from_vec(design_row(s, li));
        }
        l / ns as f64
    };
    let lvecs: Vec<DVector<f64>> = (0..nl).map(marginal).collect();
    let emm: Vec<f64> = lvecs.iter().map(|l| l.dot(&beta)).collect();

    let mut pairs = Vec::new();
    for i in 0..nl {
        for j in i + 1..nl {
            let c = &lvecs[i] - &lvecs[j];
            let diff = emm[i] - emm[j];
            let var = sigma2 * (c.transpose() * &xtx_inv * &c)[(0, 0)];
            let se = var.max(0.0).sqrt();
            let (q, p_adj) = if se > 1e-9 * scale {
                let q = std::f64::consts::SQRT_2 * diff.abs() / se;
                (q, (1.0 - ptukey(q, nl, df)).clamp(0.0, 1.0))
            } else if diff.abs() <= 1e-9 * scale {
                (0.0, 1.0)
            } else {
                (f64::INFINITY, 0.0)
            };
            pairs.push(PairTest {
                a: levels[i],
                b: levels[j],
                diff,
                se,
                q,
                p_adj,
                significant: p_adj < ALPHA,
            });
        }
    }
    Ok(LevelComparison {
        metric,
        levels,
        emm,
        df_resid: df,
        sigma: sigma2.sqrt(),
        pairs,
    })
}

/// Inclusive range of vertebral levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelRun {
    pub start: u8,
    pub end: u8,
}

impl fmt::Display for LevelRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start == self.end {
            write!(f, "[C{}]", self.start)
        } else {
            write!(f, "[C{}-C{}]", self.start, self.end)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolingReport {
    pub per_metric: Vec<(Metric, Vec<LevelRun>)>,
    /// Runs with no significant internal pair for any metric.
    pub intersection: Vec<LevelRun>,
}

impl PoolingReport {
    /// Intersection runs spanning at least two levels.
    pub fn pooled(&self) -> Vec<LevelRun> {
        self.intersection.iter().copied().filter(|r| r.end > r.start).collect()
    }
}

fn maximal_runs(levels: &[u8], sig: impl Fn(u8, u8) -> bool) -> Vec<LevelRun> {
    let k = levels.len();
    let mut runs = Vec::new();
    let mut prev_end = None;
    for i in 0..k {
        let mut e = i;
        while e + 1 < k && (i..=e).all(|m| !sig(levels[m], levels[e + 1])) {
            e += 1;
        }
        if prev_end.map_or(true, |pe| e > pe) {
            runs.push(LevelRun {
                start: levels[i],
                end: levels[e],
            });
        }
        prev_end = Some(e);
    }
    runs
}

pub fn pooling_report(comparisons: &[LevelComparison]) -> PoolingReport {
    let mut levels: Vec<u8> = comparisons.iter().flat_map(|c| c.levels.iter().copied()).collect();
    levels.sort_unstable();
    levels.dedup();
    let per_metric = comparisons
        .iter()
        .map(|c| (c.metric, maximal_runs(&c.levels, |a, b| c.significant(a, b))))
        .collect();
    let intersection = maximal_runs(&levels, |a, b| comparisons.iter().any(|c| c.significant(a, b)));
    PoolingReport {
        per_metric,
        intersection,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::Group;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn cohort(n_subj: usize, offsets: &[f64; 7], sd: f64, seed: u64) -> Vec<CohortRow> {
        cohort_stream(n_subj, offsets, sd, seed, 0)
    }

    fn cohort_stream(n_subj: usize, offsets: &[f64; 7], sd: f64, seed: u64, stream: u64) -> Vec<CohortRow> {
        let mut rng = crate::rng::stream(seed, stream);
        let mut rows = Vec::new();
        for s in 0..n_subj {
            let subj: f64 = rng.sample::<f64, _>(StandardNormal) * 2.0;
            for l in 1..=7u8 {
                let mut metrics = [0.0; 6];
                for m in metrics.iter_mut() {
                    *m = 10.0 + subj + offsets[l as usize - 1] + sd * rng.sample::<f64, _>(StandardNormal);
                }
                rows.push(CohortRow {
                    subject: format!("s{s}"),
                    group: Group::Healthy,
                    level: l,
                    metrics,
                    lesion_fraction: 0.0,
                });
            }
        }
        rows
    }

    #[test]
    fn null_cohorts_rarely_flag() {
        let trials = 1000;
        let mut clean = 0;
        for t in 0..trials {
            let rows = cohort_stream(10, &[0.0; 7], 1.0, 0x5eed, t);
            let c = level_pooling(&rows, Metric::Fa).unwrap();
            if c.pairs.iter().all(|p| !p.significant) {
                clean += 1;
            }
        }
        assert!(clean as f64 / trials as f64 >= 0.94, "{clean}");
    }

    #[test]
    fn large_offset_flagged_everywhere() {
        let mut off = [0.0; 7];
        off[4] = 10.0;
        let rows = cohort(12, &off, 1.0, 7);
        let c = level_pooling(&rows, Metric::Md).unwrap();
        for l in [1, 2, 3, 4, 6, 7] {
            assert!(c.significant(5, l), "C5 vs C{l}");
        }
    }

    #[test]
    fn zero_residual_equal_means() {
        let mk = |s: &str, l: u8, v: f64| CohortRow {
            subject: s.into(),
            group: Group::Healthy,
            level: l,
            metrics: [v; 6],
            lesion_fraction: 0.0,
        };
        let rows = vec![mk("a", 1, 1.0), mk("a", 2, 1.0), mk("b", 1, 3.0), mk("b", 2, 3.0)];
        let c = level_pooling(&rows, Metric::Fww).unwrap();
        assert_eq!(c.pairs[0].p_adj, 1.0);
        assert!(!c.pairs[0].significant);
    }

    #[test]
    fn sparse_level_is_rejected() {
        let mut rows = cohort(4, &[0.0; 7], 1.0, 1);
        rows.retain(|r| r.level != 6 || r.subject == "s0");
        assert_eq!(
            level_pooling(&rows, Metric::Fa),
            Err(StatsError::UnbalancedDesignUnderdetermined(6))
        );
    }

    #[test]
    fn subject_shift_leaves_contrasts() {
        let rows = cohort(8, &[0.0, 1.0, 0.5, 0.0, -0.2, 0.3, 0.0], 0.7, 3);
        let base = level_pooling(&rows, Metric::Rd).unwrap();
        let mut shifted = rows.clone();
        shifted.iter_mut().filter(|r| r.subject == "s2").for_each(|r| r.metrics[5] += 123.0);
        let moved = level_pooling(&shifted, Metric::Rd).unwrap();
        for (a, b) in base.pairs.iter().zip(&moved.pairs) {
            assert!((a.diff - b.diff).abs() < 1e-10);
        }
    }

    fn comparison(metric: Metric, sig: &[(u8, u8)]) -> LevelComparison {
        let mut pairs = Vec::new();
        for a in 1..=7u8 {
            for b in a + 1..=7 {
                let s = sig.contains(&(a, b)) || sig.contains(&(b, a));
                pairs.push(PairTest {
                    a,
                    b,
                    diff: 0.0,
                    se: 1.0,
                    q: 0.0,
                    p_adj: if s { 0.01 } else { 0.5 },
                    significant: s,
                });
            }
        }
        LevelComparison {
            metric,
            levels: (1..=7).collect(),
            emm: vec![0.0; 7],
            df_resid: 10.0,
            sigma: 1.0,
            pairs,
        }
    }

    #[test]
    fn report_set_logic() {
        let run = |start, end| LevelRun { start, end };
        let none: Vec<_> = Metric::ALL.iter().map(|&m| comparison(m, &[])).collect();
        let r = pooling_report(&none);
        assert_eq!(r.intersection, vec![run(1, 7)]);
        assert!(r.per_metric.iter().all(|(_, runs)| runs == &vec![run(1, 7)]));

        let mut one = none.clone();
        one[2] = comparison(Metric::Ad, &[(5, 3)]);
        let r = pooling_report(&one);
        assert_eq!(r.per_metric[2].1, vec![run(1, 4), run(4, 7)]);
        assert_eq!(r.intersection, vec![run(1, 4), run(4, 7)]);

        let mut split = none.clone();
        split[0] = comparison(Metric::Fww, &[(1, 2), (1, 3), (1, 4), (4, 5), (5, 6), (6, 7)]);
        split[3] = comparison(Metric::Fa, &[(2, 5), (3, 5)]);
        let r = pooling_report(&split);
        assert_eq!(r.intersection, vec![run(1, 1), run(2, 4), run(5, 5), run(6, 6), run(7, 7)]);
        assert_eq!(r.pooled(), vec![run(2, 4)]);
        assert_eq!(run(2, 4).to_string(), "[C2-C4]");
    }
}
