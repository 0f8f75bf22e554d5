//! Python bindings: voxel model fits, the statistical tests and LDA/ROC
//! scoring, on plain Python lists.

use cordscan_core::classify::{self, FeatureMatrix, SplitConfig};
use cordscan_core::models::{self, BallStickParams, FitConfig};
use cordscan_core::phantom::{generate, PhantomSpec};
use cordscan_core::stats;
use cordscan_core::{GradientEntry, GradientScheme};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scheme(bvals: &[f64], bvecs: &[[f64; 3]]) -> PyResult<GradientScheme> {
    if bvals.len() != bvecs.len() {
        return Err(value_err(format!("{} b-values but {} directions", bvals.len(), bvecs.len())));
    }
    let entries = bvals
        .iter()
        .zip(bvecs)
        .map(|(&b, &g)| GradientEntry { b, g })
        .collect();
    GradientScheme::new(entries).map_err(value_err)
}

/// CDF of Student's t distribution.
#[pyfunction]
fn t_cdf(x: f64, df: f64) -> PyResult<f64> {
    if !(df > 0.0) {
        return Err(value_err("df must be positive"));
    }
    Ok(stats::t_cdf(x, df))
}

/// CDF of the studentized range for `k` groups and `df` error degrees of freedom.
#[pyfunction]
fn ptukey(q: f64, k: usize, df: f64) -> PyResult<f64> {
    if k < 2 || !(df > 0.0) {
        return Err(value_err("need k >= 2 and df > 0"));
    }
    Ok(stats::ptukey(q, k, df))
}

/// Welch's unequal-variance t-test (two-sided).
#[pyfunction]
fn welch<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::welch(&a, &b).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("df", r.df)?;
    d.set_item("p", r.p)?;
    d.set_item("mean_a", r.mean_a)?;
    d.set_item("mean_b", r.mean_b)?;
    d.set_item("sd_a", r.sd_a)?;
    d.set_item("sd_b", r.sd_b)?;
    d.set_item("degenerate", r.degenerate)?;
    Ok(d)
}

/// Normalized Ball-and-Stick signal for each measurement.
#[pyfunction]
#[pyo3(signature = (f, d, n, bvals, bvecs, lambda_perp = models::LAMBDA_PERP_DEFAULT, d0 = models::D0_DEFAULT))]
fn predict_ballstick(
    f: f64,
    d: f64,
    n: [f64; 3],
    bvals: Vec<f64>,
    bvecs: Vec<[f64; 3]>,
    lambda_perp: f64,
    d0: f64,
) -> PyResult<Vec<f64>> {
    let s = scheme(&bvals, &bvecs)?;
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(value_err("fiber direction must be non-zero"));
    }
    let p = BallStickParams {
        f,
        d,
        n: n.map(|x| x / norm),
        d0,
        lambda_perp,
    };
    Ok(models::predict_ballstick(&p, &s))
}

/// Ball-and-Stick fit of one voxel's raw signals.
#[pyfunction]
#[pyo3(signature = (signals, bvals, bvecs, lambda_perp = models::LAMBDA_PERP_DEFAULT, d0 = models::D0_DEFAULT))]
fn fit_ballstick<'py>(
    py: Python<'py>,
    signals: Vec<f64>,
    bvals: Vec<f64>,
    bvecs: Vec<[f64; 3]>,
    lambda_perp: f64,
    d0: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = scheme(&bvals, &bvecs)?;
    let (norm, s0) = models::normalize_attenuation(&signals, &s).map_err(value_err)?;
    let cfg = FitConfig {
        lambda_perp,
        d0,
        ..FitConfig::default()
    };
    let (p, diag) = models::fit_ballstick_voxel(&norm, &s, &cfg).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("f", p.f)?;
    out.set_item("d", p.d)?;
    out.set_item("n", p.n.to_vec())?;
    out.set_item("s0", s0)?;
    out.set_item("rss", diag.rss)?;
    out.set_item("iterations", diag.iterations)?;
    out.set_item("converged", diag.converged)?;
    out.set_item("degenerate", diag.degenerate)?;
    Ok(out)
}

/// Log-linear tensor fit and its scalar indices.
#[pyfunction]
fn fit_dti<'py>(py: Python<'py>, signals: Vec<f64>, bvals: Vec<f64>, bvecs: Vec<[f64; 3]>) -> PyResult<Bound<'py, PyDict>> {
    let s = scheme(&bvals, &bvecs)?;
    let (t, _) = models::fit_dti_voxel(&signals, &s).map_err(value_err)?;
    let m = models::dti_metrics(&t);
    let out = PyDict::new(py);
    out.set_item("fa", m.fa)?;
    out.set_item("md", m.md)?;
    out.set_item("ad", m.ad)?;
    out.set_item("rd", m.rd)?;
    out.set_item("evals", m.evals.to_vec())?;
    out.set_item("e1", m.e1.to_vec())?;
    out.set_item("s0", t.s0)?;
    Ok(out)
}

/// Area under the ROC curve, ties counted as one half.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    classify::roc_auc(&scores, &labels).map_err(value_err)
}

/// Mean and standard deviation of the test AUC of a two-class LDA over
/// repeated stratified random splits.
#[pyfunction]
#[pyo3(signature = (x, y, n_splits = classify::DEFAULT_SPLITS, seed = 0, train_frac = classify::DEFAULT_TRAIN_FRAC, ridge = classify::DEFAULT_RIDGE, no_leak = false))]
fn repeated_split_auc<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    n_splits: usize,
    seed: u64,
    train_frac: f64,
    ridge: f64,
    no_leak: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(value_err("x must be a non-empty list of equal-length rows"));
    }
    let fm = FeatureMatrix {
        x: DMatrix::from_fn(x.len(), p, |i, j| x[i][j]),
        y,
        thr: 0.0,
        combo: Vec::new(),
    };
    let cfg = SplitConfig {
        n_splits,
        train_frac,
        ridge,
        seed,
        no_leak,
    };
    let r = py.detach(|| classify::repeated_split_auc(&fm, &cfg)).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("auc_mean", r.auc_mean)?;
    out.set_item("auc_std", r.auc_std)?;
    out.set_item("n_splits", r.n_splits)?;
    out.set_item("n_pos", r.n_pos)?;
    out.set_item("n_neg", r.n_neg)?;
    Ok(out)
}

/// Generates a phantom from a JSON description and returns its lesion and
/// level voxel counts.
#[pyfunction]
#[pyo3(signature = (spec_json = "{}", seed = 0))]
fn phantom_counts<'py>(py: Python<'py>, spec_json: &str, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let mut spec: PhantomSpec = serde_json::from_str(spec_json).map_err(value_err)?;
    spec.seed = seed;
    let out = py.detach(|| generate(&spec)).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("dims", out.dwi.dims().to_vec())?;
    d.set_item("lesion_voxels", out.lesion_voxels.into_iter().collect::<Vec<_>>())?;
    d.set_item("level_voxels", out.level_voxels.into_iter().collect::<Vec<_>>())?;
    Ok(d)
}

#[pymodule]
fn cordscan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(t_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(ptukey, m)?)?;
    m.add_function(wrap_pyfunction!(welch, m)?)?;
    m.add_function(wrap_pyfunction!(predict_ballstick, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ballstick, m)?)?;
    m.add_function(wrap_pyfunction!(fit_dti, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(repeated_split_auc, m)?)?;
    m.add_function(wrap_pyfunction!(phantom_counts, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_lengths_must_agree() {
        assert!(scheme(&[0.0, 900.0], &[[0.0; 3]]).is_err());
        assert_eq!(scheme(&[0.0, 900.0], &[[0.0; 3], [0.0, 0.0, 1.0]]).unwrap().len(), 2);
    }

    #[test]
    fn wrappers_forward_to_core() {
        assert_eq!(t_cdf(0.0, 3.0).unwrap(), 0.5);
        assert!(t_cdf(1.0, 0.0).is_err());
        assert!(ptukey(2.0, 1, 10.0).is_err());
        assert_eq!(roc_auc(vec![0.1, 0.4, 0.35, 0.8], vec![0, 0, 1, 1]).unwrap(), 0.75);
        let sig = predict_ballstick(0.2, 1e-3, [0.0, 0.0, 2.0], vec![0.0, 1000.0], vec![[0.0; 3], [0.0, 0.0, 1.0]], 0.0, 3e-3)
            .unwrap();
        let expect = 0.8 * (-1.0f64).exp() + 0.2 * (-3.0f64).exp();
        assert!((sig[1] - expect).abs() < 1e-15);
        assert!(predict_ballstick(0.2, 1e-3, [0.0; 3], vec![0.0], vec![[0.0; 3]], 0.0, 3e-3).is_err());
    }
}
