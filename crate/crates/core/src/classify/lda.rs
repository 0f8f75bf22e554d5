use nalgebra::{DMatrix, DVector};

use super::ClassifyError;

/// Centers every column and scales it to unit population standard deviation.
pub fn standardize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>), ClassifyError> {
    let n = x.nrows() as f64;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ClassifyError::NonFinite);
    }
    let mut out = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let m = col.sum() / n;
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        if !(sd > 1e-300) || sd <= 1e-14 * m.abs() {
            return Err(ClassifyError::ZeroVarianceColumn(j));
        }
        col.apply(|v| *v = (*v - m) / sd);
        means.push(m);
        sds.push(sd);
    }
    Ok((out, means, sds))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    pub w: DVector<f64>,
    pub b: f64,
    pub mean0: DVector<f64>,
    pub mean1: DVector<f64>,
    /// Pooled within-class covariance including the ridge term.
    pub cov: DMatrix<f64>,
}

impl LdaModel {
    /// Signed decision score; positive favours class 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.score_row(x.iter().copied())
    }

    pub fn score_row(&self, x: impl Iterator<Item = f64>) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }
}

pub fn fit_lda(x: &DMatrix<f64>, y: &[u8], ridge: f64) -> Result<LdaModel, ClassifyError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(ClassifyError::InvalidInput("labels and rows differ in length".into()));
    }
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(ClassifyError::InvalidInput("ridge must be >= 0".into()));
    }
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = n - n1;
    if n0 == 0 || n1 == 0 {
        return Err(ClassifyError::SingleClassTraining);
    }
    if n < p + 2 {
        return Err(ClassifyError::TooFewRows {
            n_pos: n1,
            n_neg: n0,
            n_features: p,
        });
    }
    let mut means = [DVector::zeros(p), DVector::zeros(p)];
    for (row, &c) in x.row_iter().zip(y) {
        means[c as usize] += row.transpose();
    }
    means[0] /= n0 as f64;
    means[1] /= n1 as f64;
    let mut cov = DMatrix::zeros(p, p);
    for (row, &c) in x.row_iter().zip(y) {
        let d = row.transpose() - &means[c as usize];
        cov += &d * d.transpose();
    }
    cov /= (n - 2) as f64;
    for i in 0..p {
        cov[(i, i)] += ridge;
    }
    let eig = cov.clone().symmetric_eigenvalues();
    if eig.min() <= 1e-12 * eig.max().abs() {
        return Err(ClassifyError::SingularCovariance);
    }
    let chol = cov.clone().cholesky().ok_or(ClassifyError::SingularCovariance)?;
    let [mean0, mean1] = means;
    let w = chol.solve(&(&mean1 - &mean0));
    let prior = (n1 as f64 / n0 as f64).ln();
    let b = -w.dot(&(0.5 * (&mean0 + &mean1))) + prior;
    if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(ClassifyError::SingularCovariance);
    }
    Ok(LdaModel { w, b, mean0, mean1, cov })
}
