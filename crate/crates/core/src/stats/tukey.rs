use std::sync::OnceLock;

use super::special::{ln_chi_scaled_pdf, norm_cdf, norm_pdf};

const GL_ORDER: usize = 16;
const INNER_PANELS: usize = 6;
const OUTER_PANELS: usize = 6;
const Z_MAX: f64 = 8.5;

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let k = k as f64;
                        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// Composite rule on [lo, hi] as (node, weight) pairs.
fn composite(lo: f64, hi: f64, panels: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (hi - lo) / panels as f64;
    (0..panels).flat_map(move |p| {
        let mid = lo + (p as f64 + 0.5) * h;
        gauss_legendre().iter().map(move |&(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
    })
}

/// Range CDF of `k` independent standard normals.
fn range_cdf_normal(w: f64, k: usize) -> f64 {
    // (node, weight * pdf, cdf) on [-8.5, 8.5]
    static NODES: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    if w <= 0.0 {
        return 0.0;
    }
    let nodes = NODES.get_or_init(|| {
        composite(-Z_MAX, Z_MAX, INNER_PANELS)
            .map(|(z, wt)| (z, wt * norm_pdf(z), norm_cdf(z)))
            .collect()
    });
    let km1 = (k - 1) as i32;
    let v: f64 = nodes
        .iter()
        .map(|&(z, wp, cdf)| wp * (cdf - norm_cdf(z - w)).max(0.0).powi(km1))
        .sum();
    (k as f64 * v).clamp(0.0, 1.0)
}

/// CDF of the studentized range statistic for `k` groups and `df` error
/// degrees of freedom.
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2 && df > 0.0, "ptukey requires k >= 2 and df > 0");
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df > 1e5 {
        return range_cdf_normal(q, k);
    }
    let mode = ((df - 1.0).max(0.0) / df).sqrt();
    let peak = ln_chi_scaled_pdf(mode.max(1e-3), df);
    let keep = |s: f64| ln_chi_scaled_pdf(s, df) >= peak - 40.0;
    let mut lo = mode;
    let mut step = 0.05 * mode.max(0.1);
    while lo > 0.0 && keep(lo) {
        lo -= step;
        step *= 1.5;
    }
    let lo = lo.max(0.0);
    let mut hi = mode.max(0.5);
    let mut step = 0.05 * hi;
    while keep(hi) {
        hi += step;
        step *= 1.5;
    }
    let v: f64 = composite(lo, hi, OUTER_PANELS)
        .filter(|&(s, _)| s > 0.0)
        .map(|(s, wt)| wt * ln_chi_scaled_pdf(s, df).exp() * range_cdf_normal(q * s, k))
        .sum();
    v.clamp(0.0, 1.0)
}
