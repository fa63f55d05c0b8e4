//! Exact formulas: centered and shifted Gaussians on the line, symmetric
//! pairs of Diracs, and the two-point space.
//!
//! Two conventions for a length `r` coexist here. The symmetric pair
//! `mu_r = (delta_r + delta_{-r}) / 2` has atoms at distance `2r`, so its
//! kernel entry is `exp(-4 r^2 / eps)`. [`TwoPointState`] uses the distance
//! `d(x1, x2) = r` itself, with `b = exp(-2 r^2 / eps)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, newton_bisect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::InvalidArgument(format!("variance {variance} < 0")));
        }
        Ok(Self { mean, variance })
    }

    pub fn centered(variance: f64) -> Result<Self> {
        Self::new(0.0, variance)
    }
}

/// `kappa = 1 + sqrt(1 + 16 v0 v1 / eps^2)`.
pub fn gaussian_kappa(v0: f64, v1: f64, eps: f64) -> f64 {
    1.0 + (1.0 + 16.0 * v0 * v1 / (eps * eps)).sqrt()
}

/// Entropic transport cost between `N(0, v0)` and `N(0, v1)`.
pub fn gaussian_ot_eps(v0: f64, v1: f64, eps: f64) -> f64 {
    let k = gaussian_kappa(v0, v1, eps);
    v0 + v1 - 0.5 * eps * (k - k.ln() + std::f64::consts::LN_2 - 2.0)
}

/// Sinkhorn divergence between two one-dimensional Gaussians.
pub fn gaussian_sinkhorn(g0: Gaussian1D, g1: Gaussian1D, eps: f64) -> f64 {
    let k00 = gaussian_kappa(g0.variance, g0.variance, eps);
    let k01 = gaussian_kappa(g0.variance, g1.variance, eps);
    let k11 = gaussian_kappa(g1.variance, g1.variance, eps);
    let dm = g0.mean - g1.mean;
    dm * dm + 0.25 * eps * (k00 - 2.0 * k01 + k11 + (k01 * k01 / (k00 * k11)).ln())
}

/// Metric tensor on centered Gaussians in the variance coordinate.
pub fn gaussian_metric(v: f64, eps: f64) -> f64 {
    1.0 / (4.0 * (eps * eps / 16.0 + v * v).sqrt())
}

/// `F(x) = int_0^x (1 + s^2)^{-1/4} ds`.
pub fn gaussian_f(x: f64) -> Result<f64> {
    if x < 0.0 {
        return gaussian_f(-x).map(|v| -v);
    }
    integrate(|s| (1.0 + s * s).powf(-0.25), 0.0, x, 1e-12)
}

fn gaussian_f_prime(x: f64) -> f64 {
    (1.0 + x * x).powf(-0.25)
}

/// Inverse of [`gaussian_f`] on `[0, inf)`.
pub fn gaussian_f_inverse(y: f64) -> Result<f64> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    // F(x) >= 2 sqrt(1 + x) - 2 gives the upper end of the bracket.
    let hi = (0.5 * (y + 2.0)).powi(2) - 1.0;
    newton_bisect(
        |x| gaussian_f(x).map(|v| v - y),
        gaussian_f_prime,
        0.0,
        hi.max(y),
        1e-14,
    )
}

/// Variance `v_t` on the geodesic between `N(0, v0)` and `N(0, v1)` and the
/// geodesic distance `(sqrt(eps) / 4) |F(4 v1 / eps) - F(4 v0 / eps)|`.
pub fn gaussian_geodesic(v0: f64, v1: f64, t: f64, eps: f64) -> Result<(f64, f64)> {
    if !(v0 >= 0.0 && v1 >= 0.0) {
        return Err(Error::InvalidArgument("variances must be nonnegative".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    let f0 = gaussian_f(4.0 * v0 / eps)?;
    let f1 = gaussian_f(4.0 * v1 / eps)?;
    let d_hat = 0.25 * eps.sqrt() * (f1 - f0).abs();
    let vt = if t == 0.0 {
        v0
    } else if t == 1.0 {
        v1
    } else {
        0.25 * eps * gaussian_f_inverse((1.0 - t) * f0 + t * f1)?
    };
    Ok((vt, d_hat))
}

/// Wasserstein geodesic between centered Gaussians, `((1-t) sqrt v0 + t sqrt v1)^2`.
pub fn wasserstein_gaussian_variance(v0: f64, v1: f64, t: f64) -> f64 {
    ((1.0 - t) * v0.sqrt() + t * v1.sqrt()).powi(2)
}

/// `(OT_eps, S_eps)` between `mu_r` and `mu_s`, `mu_r = (delta_r + delta_{-r}) / 2`.
pub fn two_dirac_values(r: f64, s: f64, eps: f64) -> (f64, f64) {
    // log(k(r, s) + k(r, -s)) = -(r - s)^2 / eps + log(1 + exp(-4 r s / eps))
    let log_sum = -(r - s).powi(2) / eps + (-4.0 * r * s / eps).exp().ln_1p();
    let half_self = |x: f64| 0.5 * (-4.0 * x * x / eps).exp().ln_1p();
    let ot = eps * (std::f64::consts::LN_2 - log_sum);
    let sdiv = eps * (-log_sum + half_self(r) + half_self(s));
    (ot, sdiv)
}

/// `sqrt S(mu_s, mu_r) - sqrt S(mu_s, mu_m) - sqrt S(mu_m, mu_r)` divided by
/// `sqrt eps`; positive values break the triangle inequality.
pub fn two_dirac_triangle_gap(s: f64, m: f64, r: f64, eps: f64) -> f64 {
    let d = |x: f64, y: f64| two_dirac_values(x, y, eps).1.max(0.0).sqrt();
    (d(s, r) - d(s, m) - d(m, r)) / eps.sqrt()
}

/// Triangle gap for `mu_0, mu_r, mu_{2r}` at `r = sqrt eps`.
pub fn triangle_gap(eps: f64) -> f64 {
    let r = eps.sqrt();
    two_dirac_triangle_gap(0.0, r, 2.0 * r, eps)
}

/// Two-point space with `d(x1, x2) = r` and mass `m` on `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointState {
    pub r: f64,
    pub m: f64,
    pub epsilon: f64,
    pub b: f64,
    pub m2: f64,
    /// Mass moved from `x1` to `x2` by the self-transport plan.
    pub p: f64,
    pub lambda2: f64,
}

impl TwoPointState {
    pub fn new(r: f64, m: f64, epsilon: f64) -> Result<Self> {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::DegenerateMass(m));
        }
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("distance {r} must be positive")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::NonPositiveEpsilon(epsilon));
        }
        let b = (-2.0 * r * r / epsilon).exp();
        let m2 = m * (1.0 - m);
        let p = (-b + (b * b + 4.0 * m2 * b * (1.0 - b)).sqrt()) / (2.0 * (1.0 - b));
        Ok(Self {
            r,
            m,
            epsilon,
            b,
            m2,
            p,
            lambda2: 1.0 - p / m2,
        })
    }
}

/// `g = (eps / 2) m_dot^2 (M^2 - p) / (p (2 M^2 - p))`.
pub fn two_point_tensor(state: &TwoPointState, m_dot: f64) -> f64 {
    let TwoPointState { m2, p, epsilon, .. } = *state;
    0.5 * epsilon * m_dot * m_dot * (m2 - p) / (p * (2.0 * m2 - p))
}

/// Radius above which [`nonconvexity_value`] exceeds one: `r* = sqrt(x eps / 4)`
/// with `x = 1 + exp(-x)`, about `0.5653 sqrt(eps)`. The simpler sufficient
/// condition `r > sqrt(eps / 2)` corresponds to `x > 2`.
pub fn nonconvexity_threshold(eps: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - 1.0 - f64::exp(-mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi) * eps / 4.0).sqrt()
}

/// Tensor of `mu_r` for the symmetric spreading velocity `+-1`:
/// `1 + kappa / (1 + kappa) ((8 r^2 / eps) / (1 + kappa) - 2)`, `kappa = exp(-4 r^2 / eps)`.
pub fn nonconvexity_value(r: f64, eps: f64) -> f64 {
    let k = (-4.0 * r * r / eps).exp();
    1.0 + k / (1.0 + k) * ((8.0 * r * r / eps) / (1.0 + k) - 2.0)
}
