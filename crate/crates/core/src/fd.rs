//! Finite-difference Hessians of the Sinkhorn divergence along vertical
//! (weight) and horizontal (point motion) perturbations.

use crate::error::{Error, Result};
use crate::sinkhorn::{cloud_divergence, sinkhorn_divergence, Cloud, SolverOptions};
use crate::space::{Measure, TangentVector};

/// Extrapolates `D(h) = (s(h) + s(-h)) / (2 h^2)` over `h0, h0/2, h0/4`,
/// cancelling the `h^2` and `h^4` error terms.
pub fn richardson_second_difference(h0: f64, mut s: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut d = [0.0; 3];
    for (k, dk) in d.iter_mut().enumerate() {
        let h = h0 / f64::powi(2.0, k as i32);
        *dk = (s(h)? + s(-h)?) / (2.0 * h * h);
    }
    let r1 = (4.0 * d[1] - d[0]) / 3.0;
    let r2 = (4.0 * d[2] - d[1]) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Largest step keeping `mu + t b` nonnegative, halved, and capped at 1e-2.
pub fn vertical_step(mu: &Measure, b: &TangentVector) -> f64 {
    let mut h: f64 = 1e-2;
    for (w, v) in mu.weights().iter().zip(b.weights().iter()) {
        if *v != 0.0 {
            h = h.min(0.5 * w / v.abs());
        }
    }
    h
}

/// Limit of `S(mu, mu + t b) / t^2`, which equals `g_mu(b, b)`.
pub fn vertical_hessian(mu: &Measure, b: &TangentVector, opts: &SolverOptions) -> Result<f64> {
    let h0 = vertical_step(mu, b);
    if !(h0 > 0.0) {
        return Err(Error::SupportViolation(
            b.weights()
                .iter()
                .zip(mu.weights().iter())
                .position(|(v, w)| *v != 0.0 && *w <= 0.0)
                .unwrap_or(0),
        ));
    }
    richardson_second_difference(h0, |t| {
        let w: Vec<f64> = mu
            .weights()
            .iter()
            .zip(b.weights().iter())
            .map(|(a, v)| (a + t * v).max(0.0))
            .collect();
        let nu = Measure::normalized(mu.space().clone(), w, 1e-9)?;
        sinkhorn_divergence(mu, &nu, opts)
    })
}

/// Limit of `S(mu, (id + t v)_# mu) / t^2` for velocities `v` per atom.
pub fn horizontal_hessian(cloud: &Cloud, v: &[Vec<f64>], epsilon: f64, h0: f64, opts: &SolverOptions) -> Result<f64> {
    if v.len() != cloud.points.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.points.len(),
            found: v.len(),
        });
    }
    richardson_second_difference(h0, |t| {
        cloud_divergence(cloud, &cloud.pushed(v, t), epsilon, opts).map(|d| d.value)
    })
}

/// `|sum_i mu_i v_i|^2`, the large-regularization limit of the tensor.
pub fn mean_velocity_sq(cloud: &Cloud, v: &[Vec<f64>]) -> f64 {
    let d = v.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for (w, vi) in cloud.weights.iter().zip(v) {
        for (mk, x) in m.iter_mut().zip(vi) {
            *mk += w * x;
        }
    }
    m.iter().map(|x| x * x).sum()
}

/// `|v|^2_{L^2(mu)}`.
pub fn velocity_sq(cloud: &Cloud, v: &[Vec<f64>]) -> f64 {
    cloud
        .weights
        .iter()
        .zip(v)
        .map(|(w, vi)| w * vi.iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// FD horizontal tensor at the given `epsilon` next to its `epsilon -> inf`
/// limit `|sum_i mu_i v_i|^2`. The Sinkhorn tolerance is floored at
/// `1e-14 eps`.
pub fn tensor_eps_infinity_check(
    cloud: &Cloud,
    v: &[Vec<f64>],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<(f64, f64)> {
    let scale = cloud
        .points
        .iter()
        .flat_map(|p| cloud.points.iter().map(move |q| crate::space::sq_dist(p, q)))
        .fold(0.0, f64::max)
        .sqrt()
        .max(1.0);
    let vmax = v
        .iter()
        .map(|vi| vi.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
        .max(1e-300);
    let h0 = 1e-2 * scale / vmax;
    // Potentials are of size eps, so their roundoff floor grows with it.
    let opts = SolverOptions {
        tol: opts.tol.max(1e-14 * epsilon),
        ..*opts
    };
    let g = horizontal_hessian(cloud, v, epsilon, h0, &opts)?;
    Ok((g, mean_velocity_sq(cloud, v)))
}
