use super::special::t_two_sided;
use super::StatsError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// Both samples had zero variance; `p` follows the convention
    /// 1 for equal means and 0 otherwise.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (m, ss / (n - 1.0))
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples { need: 2, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    let mut r = WelchResult {
        t: 0.0,
        df: na + nb - 2.0,
        p: 1.0,
        mean_a: ma,
        mean_b: mb,
        sd_a: va.sqrt(),
        sd_b: vb.sqrt(),
        n_a: a.len(),
        n_b: b.len(),
        degenerate: false,
    };
    if se2 == 0.0 {
        r.degenerate = true;
        if ma != mb {
            r.t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            r.p = 0.0;
        }
        return Ok(r);
    }
    r.t = (ma - mb) / se2.sqrt();
    r.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    r.p = t_two_sided(r.t, r.df).clamp(0.0, 1.0);
    Ok(r)
}
