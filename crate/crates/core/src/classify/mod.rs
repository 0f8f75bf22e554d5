//! Two-class LDA on metric combinations, scored by ROC AUC over repeated
//! stratified random splits.

mod lda;
mod roc;

pub use lda::{fit_lda, standardize, LdaModel};
pub use roc::roc_auc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::metric::Metric;
use crate::regions::{select_ms_rows, CohortTable, RowClass};

pub const DEFAULT_RIDGE: f64 = 1e-8;
pub const DEFAULT_SPLITS: usize = 1000;
pub const DEFAULT_TRAIN_FRAC: f64 = 0.67;

/// Metric combinations of two, three and four metrics studied by default.
pub const TABLE2_COMBOS: [&[Metric]; 8] = [
    &[Metric::Fww, Metric::Rd],
    &[Metric::Fww, Metric::Fa],
    &[Metric::Fww, Metric::StickAd],
    &[Metric::Fa, Metric::Md],
    &[Metric::Fa, Metric::Md, Metric::Rd],
    &[Metric::Fww, Metric::Md, Metric::StickAd],
    &[Metric::Fww, Metric::Md, Metric::StickAd, Metric::Rd],
    &[Metric::Fww, Metric::Md, Metric::Fa, Metric::Rd],
];

/// Default lesion-fraction grid 0.02, 0.04, ..., 0.20.
pub fn default_thresholds() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.02).collect()
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),
    #[error("training set holds a single class")]
    SingleClassTraining,
    #[error("test set holds a single class")]
    SingleClassTest,
    #[error("pooled covariance is singular")]
    SingularCovariance,
    #[error("too few rows: {n_pos} positive, {n_neg} negative for {n_features} features")]
    TooFewRows { n_pos: usize, n_neg: usize, n_features: usize },
    #[error("non-finite value in features or scores")]
    NonFinite,
    #[error("{0}")]
    InvalidInput(String),
}

/// Design matrix for one (combination, threshold) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub x: DMatrix<f64>,
    /// 0 = healthy, 1 = lesioned.
    pub y: Vec<u8>,
    pub thr: f64,
    pub combo: Vec<Metric>,
}

impl FeatureMatrix {
    /// Positive rows are patient levels with lesion fraction above `thr`,
    /// negative rows are all healthy levels. Lesion-free patient levels are
    /// left out.
    pub fn from_table(table: &CohortTable, combo: &[Metric], thr: f64) -> Result<Self, ClassifyError> {
        if combo.is_empty() {
            return Err(ClassifyError::InvalidInput("empty metric combination".into()));
        }
        let pos = select_ms_rows(table, thr).map_err(|e| ClassifyError::InvalidInput(e.to_string()))?;
        let neg: Vec<_> = table.of_class(RowClass::V).collect();
        let rows: Vec<_> = neg.iter().chain(pos.iter()).collect();
        let x = DMatrix::from_fn(rows.len(), combo.len(), |i, j| rows[i].metric(combo[j]));
        let y = std::iter::repeat_n(0, neg.len()).chain(std::iter::repeat_n(1, pos.len())).collect();
        Ok(Self {
            x,
            y,
            thr,
            combo: combo.to_vec(),
        })
    }

    pub fn n_pos(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.y.len() - self.n_pos()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitConfig {
    pub n_splits: usize,
    pub train_frac: f64,
    pub ridge: f64,
    pub seed: u64,
    /// Scale on the training rows of each split instead of the full matrix.
    pub no_leak: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_splits: DEFAULT_SPLITS,
            train_frac: DEFAULT_TRAIN_FRAC,
            ridge: DEFAULT_RIDGE,
            seed: 0,
            no_leak: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocSummary {
    pub thr: f64,
    pub combo: Vec<Metric>,
    pub auc_mean: f64,
    /// Population standard deviation over splits.
    pub auc_std: f64,
    pub n_splits: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_pos_test: usize,
    pub n_neg_test: usize,
}

pub fn combo_label(combo: &[Metric]) -> String {
    combo.iter().map(|m| m.label()).collect::<Vec<_>>().join("+")
}

fn split_seed(seed: u64, thr: f64, combo: &[Metric], k: usize) -> u64 {
    let mut words = vec![seed, thr.to_bits()];
    words.extend(combo.iter().map(|m| m.index() as u64));
    words.push(k as u64);
    crate::rng::hash_words(&words)
}

fn train_count(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).round() as usize).clamp(1, n - 1)
}

fn select(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Mean and spread of test-set AUC over `cfg.n_splits` stratified splits.
pub fn repeated_split_auc(f: &FeatureMatrix, cfg: &SplitConfig) -> Result<RocSummary, ClassifyError> {
    if !(0.0..1.0).contains(&cfg.train_frac) || cfg.train_frac == 0.0 || cfg.n_splits == 0 {
        return Err(ClassifyError::InvalidInput("train_frac must be in (0, 1), n_splits > 0".into()));
    }
    let p = f.x.ncols();
    let pos: Vec<usize> = (0..f.y.len()).filter(|&i| f.y[i] == 1).collect();
    let neg: Vec<usize> = (0..f.y.len()).filter(|&i| f.y[i] == 0).collect();
    let too_few = ClassifyError::TooFewRows {
        n_pos: pos.len(),
        n_neg: neg.len(),
        n_features: p,
    };
    if pos.len() < 2 || neg.len() < 2 {
        return Err(too_few);
    }
    let (tp, tn) = (train_count(pos.len(), cfg.train_frac), train_count(neg.len(), cfg.train_frac));
    if tp + tn < p + 2 {
        return Err(too_few);
    }
    let x = if cfg.no_leak { f.x.clone() } else { standardize(&f.x)?.0 };

    let aucs: Vec<f64> = (0..cfg.n_splits)
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::rng::keyed(&[split_seed(cfg.seed, f.thr, &f.combo, k)]);
            let mut ps = pos.clone();
            let mut ns = neg.clone();
            ps.shuffle(&mut rng);
            ns.shuffle(&mut rng);
            let train: Vec<usize> = ns[..tn].iter().chain(&ps[..tp]).copied().collect();
            let test: Vec<usize> = ns[tn..].iter().chain(&ps[tp..]).copied().collect();
            let (mut xtr, mut xte) = (select(&x, &train), select(&x, &test));
            if cfg.no_leak {
                let (scaled, mean, sd) = standardize(&xtr)?;
                xtr = scaled;
                for j in 0..p {
                    xte.column_mut(j).apply(|v| *v = (*v - mean[j]) / sd[j]);
                }
            }
            let ytr: Vec<u8> = train.iter().map(|&i| f.y[i]).collect();
            let yte: Vec<u8> = test.iter().map(|&i| f.y[i]).collect();
            let model = fit_lda(&xtr, &ytr, cfg.ridge)?;
            let scores: Vec<f64> = xte.row_iter().map(|r| model.score_row(r.iter().copied())).collect();
            roc_auc(&scores, &yte)
        })
        .collect::<Result<_, _>>()?;
    let n = aucs.len() as f64;
    let auc_mean = aucs.iter().sum::<f64>() / n;
    let auc_std = (aucs.iter().map(|a| (a - auc_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RocSummary {
        thr: f.thr,
        combo: f.combo.clone(),
        auc_mean,
        auc_std,
        n_splits: cfg.n_splits,
        n_pos: pos.len(),
        n_neg: neg.len(),
        n_pos_test: pos.len() - tp,
        n_neg_test: neg.len() - tn,
    })
}

/// Outcome of one (combination, threshold) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub combo: Vec<Metric>,
    pub thr: f64,
    pub result: Result<RocSummary, ClassifyError>,
}

/// `combos` followed by each single metric not already listed.
pub fn with_singletons(combos: &[Vec<Metric>]) -> Vec<Vec<Metric>> {
    let mut out = combos.to_vec();
    for m in Metric::ALL {
        if !out.iter().any(|c| c.as_slice() == [m]) {
            out.push(vec![m]);
        }
    }
    out
}

/// Every combination (plus singletons) at every threshold. Cells that cannot
/// be evaluated keep their error and the run continues.
pub fn run_combinations(table: &CohortTable, combos: &[Vec<Metric>], thr_grid: &[f64], cfg: &SplitConfig) -> Result<Vec<Cell>, ClassifyError> {
    if thr_grid.is_empty() {
        return Err(ClassifyError::InvalidInput("empty threshold grid".into()));
    }
    let all = with_singletons(combos);
    let mut cells = Vec::with_capacity(all.len() * thr_grid.len());
    for combo in &all {
        for &thr in thr_grid {
            let result = FeatureMatrix::from_table(table, combo, thr).and_then(|f| repeated_split_auc(&f, cfg));
            if let Err(e) = &result {
                log::warn!("{} at thr {thr}: {e}", combo_label(combo));
            }
            cells.push(Cell {
                combo: combo.clone(),
                thr,
                result,
            });
        }
    }
    Ok(cells)
}
