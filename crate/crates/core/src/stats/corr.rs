use super::StatsError;
use crate::metric::Metric;
use crate::regions::CohortRow;

/// Pearson correlations between the six metrics, in [`Metric::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub values: [[f64; 6]; 6],
    pub n_rows: usize,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Metric, b: Metric) -> f64 {
        self.values[a.index()][b.index()]
    }
}

pub fn correlation_matrix(rows: &[&CohortRow]) -> Result<CorrelationMatrix, StatsError> {
    if rows.len() < 3 {
        return Err(StatsError::TooFewSamples { need: 3, got: rows.len() });
    }
    if rows.iter().any(|r| r.metrics.iter().any(|v| !v.is_finite())) {
        return Err(StatsError::NonFinite);
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; 6];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(&r.metrics) {
            *m += v / n;
        }
    }
    let mut cov = [[0.0; 6]; 6];
    for r in rows {
        let c: Vec<f64> = r.metrics.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for i in 0..6 {
            for j in i..6 {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    for m in Metric::ALL {
        let i = m.index();
        if cov[i][i] <= 0.0 {
            return Err(StatsError::ZeroVariance(m));
        }
    }
    let mut values = [[0.0; 6]; 6];
    for i in 0..6 {
        values[i][i] = 1.0;
        for j in i + 1..6 {
            let r = (cov[i][j] / (cov[i][i].sqrt() * cov[j][j].sqrt())).clamp(-1.0, 1.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        values,
        n_rows: rows.len(),
    })
}
