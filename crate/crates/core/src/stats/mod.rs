//! Group comparisons, level pooling and metric correlation.

mod corr;
mod pooling;
mod special;
mod tukey;
mod welch;

pub use corr::{correlation_matrix, CorrelationMatrix};
pub use pooling::{level_pooling, pooling_report, LevelComparison, LevelRun, PairTest, PoolingReport};
pub use special::{beta_inc, ln_beta, norm_cdf, t_cdf, t_two_sided};
pub use tukey::ptukey;
pub use welch::{welch, WelchResult};

use crate::metric::Metric;

/// Significance level for flagged comparisons.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} observations, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("non-finite observation")]
    NonFinite,
    #[error("{0} is constant over the selected rows")]
    ZeroVariance(Metric),
    #[error("level C{0} observed for fewer than two subjects")]
    UnbalancedDesignUnderdetermined(u8),
    #[error("no residual degrees of freedom")]
    NoResidualDf,
}
