//! Diffusion MRI microstructure fitting and group statistics for the
//! cervical spinal cord.
//!
//! The crate is organized along the processing chain:
//!
//! * [`io`]: NIfTI-1 volumes, FSL gradient tables and the cohort CSV.
//! * [`models`]: DTI and Ball-and-Stick forward models and voxel fits.
//! * [`phantom`]: synthetic spinal-cord datasets with known ground truth.
//! * [`regions`]: white-matter weighted means per vertebral level and lesion load.
//! * [`stats`]: Welch's t-test, level pooling with Tukey HSD, metric correlations.
//! * [`classify`]: standardization, two-class LDA and repeated-split ROC AUC.

pub mod classify;
pub mod io;
pub mod metric;
pub mod models;
pub mod phantom;
pub mod regions;
pub mod rng;
pub mod stats;

pub use io::{GradientEntry, GradientScheme, LabelMap, Volume};
pub use metric::Metric;
