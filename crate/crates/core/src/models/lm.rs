//! Levenberg-Marquardt for small dense problems with an analytic Jacobian.

use nalgebra::{SMatrix, SVector};

/// A residual vector `r(p)` of fixed length with its Jacobian.
pub trait LeastSquares<const P: usize> {
    fn len(&self) -> usize;

    fn residuals(&self, p: &SVector<f64, P>, r: &mut [f64]);

    /// Row `i` of the Jacobian is `d r_i / d p`.
    fn jacobian(&self, p: &SVector<f64, P>, jac: &mut [[f64; P]]);
}

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when an accepted step improves the RSS by less than this fraction.
    pub rel_tol: f64,
    /// Stop when the RSS itself drops below this value.
    pub abs_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            rel_tol: 1e-10,
            abs_tol: 1e-28,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmReport<const P: usize> {
    pub params: SVector<f64, P>,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn rss_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

pub fn minimize<const P: usize, F: LeastSquares<P>>(
    problem: &F,
    init: SVector<f64, P>,
    opts: &LmOptions,
) -> LmReport<P> {
    let n = problem.len();
    let mut p = init;
    let mut r = vec![0.0; n];
    let mut r_try = vec![0.0; n];
    let mut jac = vec![[0.0; P]; n];

    problem.residuals(&p, &mut r);
    let mut rss = rss_of(&r);
    let initial_rss = rss;
    if !rss.is_finite() {
        return LmReport {
            params: p,
            rss,
            initial_rss,
            iterations: 0,
            converged: false,
        };
    }

    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut converged = rss <= opts.abs_tol;
    let mut iterations = 0;
    let mut need_jac = true;
    let mut a = SMatrix::<f64, P, P>::zeros();
    let mut g = SVector::<f64, P>::zeros();

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        if need_jac {
            problem.jacobian(&p, &mut jac);
            a.fill(0.0);
            g.fill(0.0);
            for (row, &ri) in jac.iter().zip(r.iter()) {
                for i in 0..P {
                    g[i] += row[i] * ri;
                    for j in 0..=i {
                        a[(i, j)] += row[i] * row[j];
                    }
                }
            }
            for i in 0..P {
                for j in 0..i {
                    a[(j, i)] = a[(i, j)];
                }
            }
            if mu < 0.0 {
                let dmax = (0..P).map(|i| a[(i, i)]).fold(0.0, f64::max);
                mu = 1e-3 * dmax.max(1e-300);
            }
            need_jac = false;
        }

        let dmax = (0..P).map(|i| a[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut damped = a;
        for i in 0..P {
            damped[(i, i)] += mu * a[(i, i)].max(1e-12 * dmax);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&(-g)),
            None => {
                mu *= nu;
                nu *= 2.0;
                if mu > 1e30 {
                    break;
                }
                continue;
            }
        };

        let p_try = p + step;
        problem.residuals(&p_try, &mut r_try);
        let rss_try = rss_of(&r_try);
        // Predicted decrease of the damped quadratic model.
        let predicted = -(step.dot(&g) * 2.0 + step.dot(&(a * step)));

        if rss_try.is_finite() && rss_try < rss {
            let improvement = rss - rss_try;
            let rho = if predicted > 0.0 { improvement / predicted } else { 0.0 };
            p = p_try;
            std::mem::swap(&mut r, &mut r_try);
            let rss_prev = rss;
            rss = rss_try;
            need_jac = true;
            mu *= (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if rss <= opts.abs_tol || improvement <= opts.rel_tol * rss_prev {
                converged = true;
            }
        } else {
            let step_norm = step.norm();
            if step_norm <= 1e-15 * (p.norm() + 1e-15) {
                // No representable progress left.
                converged = true;
                break;
            }
            mu *= nu;
            nu *= 2.0;
            if mu > 1e30 {
                converged = g.norm() <= 1e-12 * (1.0 + rss.sqrt());
                break;
            }
        }
    }

    LmReport {
        params: p,
        rss,
        initial_rss,
        iterations,
        converged,
    }
}
