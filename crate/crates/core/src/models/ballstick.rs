//! Regularized Ball-and-Stick model.
//!
//! The stick is an axially symmetric tensor with axial diffusivity `d` and
//! fixed perpendicular diffusivity `lambda_perp`; the ball is isotropic with
//! fixed diffusivity `d0`:
//!
//! ```text
//! S/S0 = (1 - f) exp(-b [d (n·g)² + λ⊥ (1 - (n·g)²)]) + f exp(-b d0)
//! ```
//!
//! Setting `lambda_perp = 0` gives the zero-radius stick.

use nalgebra::{SVector, Vector3};

use super::dti::{dti_metrics, DtiDesign};
use super::lm::{self, LeastSquares, LmOptions};
use super::{canonical_hemisphere, FitDiagnostics, ModelError};
use crate::io::GradientScheme;

/// Free water diffusivity (mm²/s).
pub const D0_DEFAULT: f64 = 3.0e-3;
/// Fixed perpendicular diffusivity of the stick (mm²/s).
pub const LAMBDA_PERP_DEFAULT: f64 = 0.2e-3;
/// Open lower bound of the stick diffusivity (mm²/s).
pub const D_MIN: f64 = 1e-5;
/// Upper bound of the stick diffusivity (mm²/s).
pub const D_MAX: f64 = 4.0e-3;

const DEGENERATE_F: f64 = 0.95;
const DEGENERATE_D_GAP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallStickParams {
    /// Free water weight.
    pub f: f64,
    /// Stick axial diffusivity (mm²/s).
    pub d: f64,
    /// Unit fiber direction.
    pub n: [f64; 3],
    pub d0: f64,
    pub lambda_perp: f64,
}

impl BallStickParams {
    pub fn new(f: f64, d: f64, n: [f64; 3]) -> Self {
        BallStickParams {
            f,
            d,
            n,
            d0: D0_DEFAULT,
            lambda_perp: LAMBDA_PERP_DEFAULT,
        }
    }

    /// Spherical angles `(theta, phi)` of `n`.
    pub fn angles(&self) -> (f64, f64) {
        let [x, y, z] = self.n;
        (z.clamp(-1.0, 1.0).acos(), y.atan2(x))
    }

    pub fn direction_from_angles(theta: f64, phi: f64) -> [f64; 3] {
        [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub d0: f64,
    pub lambda_perp: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Additional attempts from perturbed starting points when the first
    /// fit does not converge or ends at a diffusivity bound.
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            d0: D0_DEFAULT,
            lambda_perp: LAMBDA_PERP_DEFAULT,
            max_iter: 200,
            rel_tol: 1e-10,
            restarts: 2,
        }
    }
}

/// Signal and partial derivatives w.r.t. `f`, `d` and `c = n·g`.
#[inline]
fn terms(f: f64, d: f64, lp: f64, b: f64, ball: f64, c: f64) -> (f64, f64, f64, f64) {
    let stick = (-b * ((d - lp) * c * c + lp)).exp();
    let s = (1.0 - f) * stick + f * ball;
    let ds_df = ball - stick;
    let ds_dd = -(1.0 - f) * stick * b * c * c;
    let ds_dc = -(1.0 - f) * stick * b * 2.0 * c * (d - lp);
    (s, ds_df, ds_dd, ds_dc)
}

pub fn predict_ballstick(p: &BallStickParams, scheme: &GradientScheme) -> Vec<f64> {
    scheme
        .entries()
        .iter()
        .map(|e| {
            if e.is_b0() {
                return 1.0;
            }
            let c = p.n[0] * e.g[0] + p.n[1] * e.g[1] + p.n[2] * e.g[2];
            terms(p.f, p.d, p.lambda_perp, e.b, (-e.b * p.d0).exp(), c).0
        })
        .collect()
}

/// Jacobian of [`predict_ballstick`] w.r.t. `(f, d, theta, phi)`, one row per
/// measurement, with `n = (sinθ cosφ, sinθ sinφ, cosθ)`.
pub fn ballstick_jacobian(p: &BallStickParams, scheme: &GradientScheme) -> Vec<[f64; 4]> {
    let (theta, phi) = p.angles();
    let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
    let n = [st * cp, st * sp, ct];
    let dn_dt = [ct * cp, ct * sp, -st];
    let dn_dp = [-st * sp, st * cp, 0.0];
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    scheme
        .entries()
        .iter()
        .map(|e| {
            let (_, df, dd, dc) = terms(p.f, p.d, p.lambda_perp, e.b, (-e.b * p.d0).exp(), dot(&n, &e.g));
            [df, dd, dc * dot(&dn_dt, &e.g), dc * dot(&dn_dp, &e.g)]
        })
        .collect()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

const LOG_D_MIN: f64 = -11.512_925_464_970_229; // ln(1e-5)
const LOG_D_SPAN: f64 = 5.991_464_547_107_982; // ln(4e-3) - ln(1e-5)

fn d_from_u(u: f64) -> f64 {
    (LOG_D_MIN + LOG_D_SPAN * sigmoid(u)).exp()
}

/// Diffusivity stuck against one of its bounds.
fn pinned(u: &SVector<f64, 4>) -> bool {
    sigmoid(u[1]).min(1.0 - sigmoid(u[1])) < 1e-3
}

fn u_from_d(d: f64) -> f64 {
    let d = d.clamp(D_MIN * 1.0001, D_MAX * 0.9999);
    logit((d.ln() - LOG_D_MIN) / LOG_D_SPAN)
}

/// Orthonormal frame whose first axis is `n`.
fn frame_from(n: [f64; 3]) -> [Vector3<f64>; 3] {
    let a1 = Vector3::from(n).normalize();
    let helper = if a1.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a2 = (helper - a1 * a1.dot(&helper)).normalize();
    let a3 = a1.cross(&a2);
    [a1, a2, a3]
}

struct Problem<'a> {
    b: &'a [f64],
    ball: &'a [f64],
    /// Gradients expressed in the local frame.
    g: Vec<[f64; 3]>,
    y: &'a [f64],
    lp: f64,
}

impl Problem<'_> {
    fn unpack(u: &SVector<f64, 4>) -> (f64, f64, [f64; 3]) {
        let f = sigmoid(u[0]);
        let d = d_from_u(u[1]);
        let (st, ct, sp, cp) = (u[2].sin(), u[2].cos(), u[3].sin(), u[3].cos());
        (f, d, [st * cp, st * sp, ct])
    }
}

impl LeastSquares<4> for Problem<'_> {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn residuals(&self, u: &SVector<f64, 4>, r: &mut [f64]) {
        let (f, d, n) = Self::unpack(u);
        for i in 0..self.y.len() {
            let g = &self.g[i];
            let c = n[0] * g[0] + n[1] * g[1] + n[2] * g[2];
            r[i] = terms(f, d, self.lp, self.b[i], self.ball[i], c).0 - self.y[i];
        }
    }

    fn jacobian(&self, u: &SVector<f64, 4>, jac: &mut [[f64; 4]]) {
        let (f, d, n) = Self::unpack(u);
        let s = sigmoid(u[1]);
        let df_du = f * (1.0 - f);
        let dd_du = d * LOG_D_SPAN * s * (1.0 - s);
        let (st, ct, sp, cp) = (u[2].sin(), u[2].cos(), u[3].sin(), u[3].cos());
        let dn_dt = [ct * cp, ct * sp, -st];
        let dn_dp = [-st * sp, st * cp, 0.0];
        for i in 0..self.y.len() {
            let g = &self.g[i];
            let c = n[0] * g[0] + n[1] * g[1] + n[2] * g[2];
            let (_, ds_df, ds_dd, ds_dc) = terms(f, d, self.lp, self.b[i], self.ball[i], c);
            jac[i] = [
                ds_df * df_du,
                ds_dd * dd_du,
                ds_dc * (dn_dt[0] * g[0] + dn_dt[1] * g[1] + dn_dt[2] * g[2]),
                ds_dc * (dn_dp[0] * g[0] + dn_dp[1] * g[1] + dn_dp[2] * g[2]),
            ];
        }
    }
}

/// Reusable fitter for one gradient scheme.
#[derive(Clone, Debug)]
pub struct BallStickFitter {
    cfg: FitConfig,
    b: Vec<f64>,
    g: Vec<[f64; 3]>,
    ball: Vec<f64>,
    dti: DtiDesign,
}

impl BallStickFitter {
    pub fn new(scheme: &GradientScheme, cfg: FitConfig) -> Result<Self, ModelError> {
        if scheme.tensor_rank() < 6 || scheme.distinct_directions() < 6 {
            return Err(ModelError::InsufficientDirections);
        }
        let dti = DtiDesign::new(scheme).map_err(|_| ModelError::InsufficientDirections)?;
        Ok(BallStickFitter {
            cfg,
            b: scheme.bvals().collect(),
            g: scheme.entries().iter().map(|e| e.g).collect(),
            ball: scheme.bvals().map(|b| (-b * cfg.d0).exp()).collect(),
            dti,
        })
    }

    /// Best (f, d) on a diffusivity grid with `n` fixed, solving for `f` in
    /// closed form at each grid point.
    fn profile_start(&self, y: &[f64], n: [f64; 3]) -> (f64, f64) {
        let lp = self.cfg.lambda_perp;
        let mut best = (f64::INFINITY, 0.1, 1e-3);
        for k in 0..16 {
            let d = 0.3e-3 * (3.5f64 / 0.3).powf(k as f64 / 15.0);
            let stick: Vec<f64> = self
                .g
                .iter()
                .zip(&self.b)
                .map(|(g, &b)| {
                    let c = n[0] * g[0] + n[1] * g[1] + n[2] * g[2];
                    (-b * ((d - lp) * c * c + lp)).exp()
                })
                .collect();
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..y.len() {
                let diff = self.ball[i] - stick[i];
                num += (y[i] - stick[i]) * diff;
                den += diff * diff;
            }
            let f = if den > 0.0 { (num / den).clamp(0.01, 0.9) } else { 0.1 };
            let rss: f64 = (0..y.len())
                .map(|i| ((1.0 - f) * stick[i] + f * self.ball[i] - y[i]).powi(2))
                .sum();
            if rss < best.0 {
                best = (rss, f, d);
            }
        }
        (best.1, best.2)
    }

    pub fn dti_design(&self) -> &DtiDesign {
        &self.dti
    }

    /// Fits normalized signals (b = 0 mean equal to 1).
    pub fn fit(&self, signals: &[f64]) -> Result<(BallStickParams, FitDiagnostics), ModelError> {
        if signals.len() != self.b.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.b.len(),
                got: signals.len(),
            });
        }
        let (tensor, _) = self.dti.fit(signals)?;
        let m = dti_metrics(&tensor);

        let (fp, dp) = self.profile_start(signals, m.e1);
        let starts = [(0.1, m.ad, m.e1), (fp, dp, m.e1), (0.05, m.md, m.e2)];
        let opts = LmOptions {
            max_iter: self.cfg.max_iter,
            rel_tol: self.cfg.rel_tol,
            ..LmOptions::default()
        };

        let mut best: Option<(lm::LmReport<4>, [Vector3<f64>; 3])> = None;
        let mut iterations = 0;
        for &(f0, d0, n0) in starts.iter().take(1 + self.cfg.restarts) {
            let frame = frame_from(n0);
            let problem = Problem {
                b: &self.b,
                ball: &self.ball,
                g: self
                    .g
                    .iter()
                    .map(|g| {
                        let v = Vector3::from(*g);
                        [v.dot(&frame[0]), v.dot(&frame[1]), v.dot(&frame[2])]
                    })
                    .collect(),
                y: signals,
                lp: self.cfg.lambda_perp,
            };
            let init = SVector::from([logit(f0), u_from_d(d0), std::f64::consts::FRAC_PI_2, 0.0]);
            let rep = lm::minimize(&problem, init, &opts);
            iterations += rep.iterations;
            if best.as_ref().is_none_or(|(b, _)| rep.rss < b.rss) {
                best = Some((rep, frame));
            }
            if best.as_ref().is_some_and(|(b, _)| b.converged && !pinned(&b.params)) {
                break;
            }
        }
        let (rep, frame) = best.expect("at least one attempt");
        let (f, d, n_local) = Problem::unpack(&rep.params);
        let n = frame[0] * n_local[0] + frame[1] * n_local[1] + frame[2] * n_local[2];
        let n = n.normalize();
        let params = BallStickParams {
            f,
            d,
            n: canonical_hemisphere([n.x, n.y, n.z]),
            d0: self.cfg.d0,
            lambda_perp: self.cfg.lambda_perp,
        };
        let degenerate = f > DEGENERATE_F || d - self.cfg.lambda_perp < DEGENERATE_D_GAP;
        Ok((
            params,
            FitDiagnostics {
                rss: rep.rss,
                iterations,
                converged: rep.converged,
                degenerate,
            },
        ))
    }
}

/// Least-squares Ball-and-Stick fit of one voxel's normalized signals,
/// initialized from the voxel's tensor fit.
pub fn fit_ballstick_voxel(
    signals: &[f64],
    scheme: &GradientScheme,
    cfg: &FitConfig,
) -> Result<(BallStickParams, FitDiagnostics), ModelError> {
    BallStickFitter::new(scheme, *cfg)?.fit(signals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::DIRECTIONS_30;

    fn paper_scheme() -> GradientScheme {
        GradientScheme::shelled(6, 900.0, &DIRECTIONS_30, 3).unwrap()
    }

    fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
        let d: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        d.abs().min(1.0).acos().to_degrees()
    }

    #[test]
    fn pure_ball_prediction() {
        let p = BallStickParams::new(1.0, 1e-3, [0.0, 0.0, 1.0]);
        for (e, s) in paper_scheme().entries().iter().zip(predict_ballstick(&p, &paper_scheme())) {
            let expect = if e.is_b0() { 1.0 } else { 0.067_205_512_739_749_8 };
            assert!((s - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_radius_stick_passes_perpendicular_signal() {
        let mut p = BallStickParams::new(0.0, 1.7e-3, [0.0, 0.0, 1.0]);
        p.lambda_perp = 0.0;
        let s = GradientScheme::shelled(1, 900.0, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 1).unwrap();
        assert_eq!(predict_ballstick(&p, &s), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn antipodal_symmetry() {
        let p = BallStickParams::new(0.2, 1.3e-3, [0.48, -0.6, 0.64]);
        let q = BallStickParams { n: p.n.map(|c| -c), ..p };
        assert_eq!(predict_ballstick(&p, &paper_scheme()), predict_ballstick(&q, &paper_scheme()));
    }

    #[test]
    fn recovers_healthy_truth() {
        let s = paper_scheme();
        let truth = BallStickParams::new(0.16, 1.14e-3, [0.0, 0.0, 1.0]);
        let (p, diag) = fit_ballstick_voxel(&predict_ballstick(&truth, &s), &s, &FitConfig::default()).unwrap();
        assert!((p.f - 0.16).abs() < 1e-4, "{p:?}");
        assert!((p.d - 1.14e-3).abs() < 1e-6 * 1.14e-3, "{p:?}");
        assert!(angle_deg(p.n, truth.n) < 0.1);
        assert!(diag.converged && !diag.degenerate);
    }

    #[test]
    fn pure_ball_is_degenerate() {
        let s = paper_scheme();
        let truth = BallStickParams::new(1.0, 1e-3, [0.0, 0.0, 1.0]);
        let (p, diag) = fit_ballstick_voxel(&predict_ballstick(&truth, &s), &s, &FitConfig::default()).unwrap();
        assert!(p.f >= 0.99, "{p:?}");
        assert!(diag.degenerate);
    }

    #[test]
    fn unattenuated_signal_does_not_crash() {
        let s = paper_scheme();
        let (p, diag) = fit_ballstick_voxel(&vec![1.0; s.len()], &s, &FitConfig::default()).unwrap();
        assert!(p.f.is_finite() && p.d.is_finite());
        assert!(diag.degenerate || p.d < 2.0 * D_MIN, "{p:?} {diag:?}");
        assert!((0.0..=1.0).contains(&p.f));
    }

    #[test]
    fn too_few_directions() {
        let s = GradientScheme::shelled(1, 900.0, &DIRECTIONS_30[..5], 3).unwrap();
        let sig = vec![1.0; s.len()];
        assert_eq!(
            fit_ballstick_voxel(&sig, &s, &FitConfig::default()).unwrap_err(),
            ModelError::InsufficientDirections
        );
    }

    #[test]
    fn d_transform_round_trip() {
        for d in [2e-5, 1e-4, 1.14e-3, 3.9e-3] {
            assert!((d_from_u(u_from_d(d)) - d).abs() < 1e-12 * d);
        }
        assert!(d_from_u(-50.0) > D_MIN * 0.999 && d_from_u(50.0) <= D_MAX * (1.0 + 1e-12));
    }
}
