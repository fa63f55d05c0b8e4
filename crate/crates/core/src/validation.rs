//! Self-checks comparing independent routes to the same quantity.
//!
//! Each [`Check`] records the worst observed discrepancy against its
//! tolerance. [`criterion`] evaluates one numbered acceptance item and
//! [`run_suite`] bundles them per module.

use std::str::FromStr;

use serde::Serialize;

use crate::closed_forms::*;
use crate::error::{Error, Result};
use crate::fd::{horizontal_hessian, tensor_eps_infinity_check, velocity_sq, vertical_hessian};
use crate::geodesics::{path_energy, solve_geodesic, solve_particle_geodesic, GeodesicOptions, Init, Path};
use crate::quadrature::integrate;
use crate::random::Instances;
use crate::sinkhorn::{cloud_divergence, divergence, ot_eps, sinkhorn_divergence, Cloud, SolverOptions};
use crate::space::{mmd_sq, rkhs_inner, GroundSpace, Measure, TangentVector};
use crate::tensor::{contraction_bound, map_a, map_a_inverse, map_b, norm_equivalence_constant, self_transport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst discrepancy observed, in the units of `tolerance`.
    pub error: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, error: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: error <= tolerance,
            error,
            tolerance,
            detail,
        }
    }

    fn failed(name: &str, err: Error) -> Self {
        Self {
            name: name.into(),
            passed: false,
            error: f64::INFINITY,
            tolerance: 0.0,
            detail: format!("error: {err}"),
        }
    }

    fn from_result(name: &str, r: Result<Check>) -> Self {
        r.unwrap_or_else(|e| Self::failed(name, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Core,
    Sinkhorn,
    Tensor,
    Geodesics,
    ClosedForms,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "core" => Suite::Core,
            "sinkhorn" => Suite::Sinkhorn,
            "tensor" => Suite::Tensor,
            "geodesics" => Suite::Geodesics,
            "closed_forms" | "closed-forms" => Suite::ClosedForms,
            "all" => Suite::All,
            _ => return Err(Error::InvalidArgument(format!("unknown suite '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Titles of the numbered acceptance criteria.
pub const CRITERIA: [&str; 13] = [
    "triangle inequality gap",
    "two-Dirac closed forms",
    "Hessian identity",
    "tensor equivalences",
    "spectral bounds",
    "RKHS embedding",
    "mean decomposition",
    "Gaussian suite",
    "geodesic solver",
    "two-point space",
    "nonconvexity",
    "scaling identity",
    "large-epsilon limit",
];

fn tight() -> SolverOptions {
    SolverOptions::with_tol(1e-13)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Joint space holding `mu_r` and `mu_s` for the two-Dirac family.
fn two_dirac_generic(r: f64, s: f64, eps: f64) -> Result<(f64, f64)> {
    let space = GroundSpace::line(&[-r, r, -s, s], eps)?;
    let a = Measure::new(space.clone(), vec![0.5, 0.5, 0.0, 0.0])?;
    let b = Measure::new(space, vec![0.0, 0.0, 0.5, 0.5])?;
    let d = divergence(&a, &b, &tight())?;
    Ok((d.cross.dual_value(&a, &b), d.value))
}

/// Evaluates acceptance criterion `id` (1-based).
pub fn criterion(id: usize, seed: u64) -> Check {
    let name = format!("{id:02} {}", CRITERIA.get(id.wrapping_sub(1)).unwrap_or(&"unknown"));
    let r = match id {
        1 => c01_triangle(),
        2 => c02_two_dirac(),
        3 => c03_hessian(seed),
        4 => c04_equivalences(seed),
        5 => c05_spectral(seed),
        6 => c06_embedding(seed),
        7 => c07_mean_decomposition(seed),
        8 => c08_gaussians(),
        9 => c09_geodesics(seed),
        10 => c10_two_point(),
        11 => c11_nonconvexity(),
        12 => c12_scaling(seed),
        13 => c13_large_eps(seed),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    let mut c = Check::from_result(&name, r);
    c.name = name;
    c
}

fn c01_triangle() -> Result<Check> {
    let closed = triangle_gap(1.0);
    let sq = |a: &Measure, b: &Measure| sinkhorn_divergence(a, b, &tight()).map(|s| s.max(0.0).sqrt());
    let space = GroundSpace::line(&[-2.0, -1.0, 0.0, 1.0, 2.0], 1.0)?;
    let m0 = Measure::dirac(space.clone(), 2)?;
    let m1 = Measure::new(space.clone(), vec![0.0, 0.5, 0.0, 0.5, 0.0])?;
    let m2 = Measure::new(space, vec![0.5, 0.0, 0.0, 0.0, 0.5])?;
    let generic = sq(&m0, &m2)? - sq(&m0, &m1)? - sq(&m1, &m2)?;
    let err = (closed - generic).abs().max((closed - 0.093).abs());
    Ok(Check::new(
        "",
        err,
        1e-3,
        format!("closed form {closed:.9}, generic {generic:.9}"),
    ))
}

fn c02_two_dirac() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for eps in [0.25, 1.0, 4.0] {
        let h = 2.0 * f64::sqrt(eps) / 19.0;
        for i in 0..20 {
            for j in 0..20 {
                let (r, s) = (i as f64 * h, j as f64 * h);
                let (ot, sd) = two_dirac_values(r, s, eps);
                let (got, gsd) = two_dirac_generic(r, s, eps)?;
                worst = worst
                    .max((ot - got).abs() / ot.abs().max(1.0))
                    .max((sd - gsd).abs() / sd.abs().max(1.0));
            }
        }
    }
    Ok(Check::new(
        "",
        worst,
        1e-10,
        "1200 grid cells, error relative to max(1, |value|)".into(),
    ))
}

fn random_instance(ins: &mut Instances) -> Result<(Measure, TangentVector)> {
    let n = ins.index(2, 8);
    let d = ins.index(1, 3);
    let eps = ins.uniform(0.5, 2.0);
    let space = ins.space(n, d, eps)?;
    let mu = ins.measure(&space)?;
    let b = ins.tangent(&space)?;
    Ok((mu, b))
}

fn c03_hessian(seed: u64) -> Result<Check> {
    let mut ins = Instances::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let (mu, b) = random_instance(&mut ins)?;
        let g = self_transport(&mu, &tight())?.metric_tensor(&b)?;
        let fd = vertical_hessian(&mu, &b, &tight())?;
        worst = worst.max(rel(fd, g));
    }
    Ok(Check::new("", worst, 1e-4, "25 random spaces, relative error".into()))
}

fn c04_equivalences(seed: u64) -> Result<Check> {
    let mut ins = Instances::new(seed.wrapping_add(1));
    let mut worst_eq: f64 = 0.0;
    let mut worst_bound: f64 = 0.0;
    for _ in 0..25 {
        let (mu, b) = random_instance(&mut ins)?;
        let space = mu.space().clone();
        let eps = space.epsilon();
        let st = self_transport(&mu, &tight())?;
        let g = st.metric_tensor(&b)?;
        let bd = st.beta_dot_from_mu_dot(&b)?;
        let gt = st.tilde_metric_tensor(&bd)?;
        worst_eq = worst_eq.max(rel(gt, g));
        let norm = rkhs_inner(&space, bd.weights(), bd.weights())?;
        let c = norm_equivalence_constant(&space);
        let hb = b.weights().dot(&(&st.h * b.weights()));
        let q = contraction_bound(&space);
        // Violations relative to the compared quantity; zero when bounds hold.
        let viol = [
            (0.5 * eps * norm - gt) / gt,
            (gt - c * 0.5 * eps * norm) / gt,
            (hb - 2.0 * g / eps) / hb,
            (2.0 * g / eps - hb / (1.0 - q * q)) / hb,
        ];
        for v in viol {
            worst_bound = worst_bound.max(v.max(0.0) / 1e-9);
        }
    }
    let worst = (worst_eq / 1e-9).max(worst_bound);
    Ok(Check::new(
        "",
        worst,
        1.0,
        format!("tilde vs tensor rel {worst_eq:.3e}; sandwich violations scaled by 1e-9: {worst_bound:.3e}"),
    ))
}

fn c05_spectral(seed: u64) -> Result<Check> {
    let mut ins = Instances::new(seed.wrapping_add(2));
    let (mut gap_min, mut q_viol, mut row_err) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for k in 0..25 {
        let (mu, _) = random_instance(&mut ins)?;
        let mu = if k % 5 == 0 {
            let space = ins.space(10, 2, 1.0)?;
            ins.measure(&space)?
        } else {
            mu
        };
        let st = self_transport(&mu, &tight())?;
        let rep = st.spectral_report();
        if rep.eigenvalues.len() > 1 {
            gap_min = gap_min.min(rep.eigenvalues[0] - rep.eigenvalues[1]);
        }
        q_viol = q_viol.max(rep.eigenvalues.get(1).cloned().unwrap_or(0.0) - rep.q_bound);
        row_err = row_err.max((rep.eigenvalues[0] - 1.0).abs());
        for i in 0..st.k.nrows() {
            row_err = row_err.max((st.k.row(i).sum() - 1.0).abs());
        }
    }
    let err = [
        if gap_min > 1e-8 { 0.0 } else { f64::INFINITY },
        (q_viol / 1e-9).max(0.0),
        row_err / 1e-10,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(Check::new(
        "",
        err,
        1.0,
        format!("min gap {gap_min:.3e}, max lambda2 - q {q_viol:.3e}, row-sum/top-eigenvalue error {row_err:.3e}"),
    ))
}

fn c06_embedding(seed: u64) -> Result<Check> {
    let mut ins = Instances::new(seed.wrapping_add(3));
    let (mut norm_err, mut f_min, mut trip) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..25 {
        let (mu, _) = random_instance(&mut ins)?;
        let st = self_transport(&mu, &tight())?;
        let alpha = map_a(&st);
        let space = mu.space();
        norm_err = norm_err.max((mmd_sq(space, alpha.weights())? - 1.0).abs());
        // B(mu) values agree with the kernel expansion of A(mu).
        let vals = map_b(&st);
        trip = trip.max((alpha.kernel_values() - vals.weights()).amax());
        f_min = f_min.min(st.f.min());
        let back = map_a_inverse(space.clone(), alpha.weights())?;
        trip = trip.max((back.weights() - mu.weights()).amax());
        let again = map_a(&self_transport(&back, &tight())?);
        trip = trip.max((again.weights() - alpha.weights()).amax());
    }
    let err = (norm_err / 1e-9).max((-f_min / 1e-9).max(0.0)).max(trip / 1e-8);
    Ok(Check::new(
        "",
        err,
        1.0,
        format!("|B|^2 - 1: {norm_err:.3e}, min f: {f_min:.3e}, round trip: {trip:.3e}"),
    ))
}

fn center(c: &Cloud) -> Cloud {
    let m = c.mean();
    let shift: Vec<Vec<f64>> = c.points.iter().map(|_| m.iter().map(|x| -x).collect()).collect();
    c.pushed(&shift, 1.0)
}

fn c07_mean_decomposition(seed: u64) -> Result<Check> {
    let mut ins = Instances::new(seed.wrapping_add(4));
    let mut pyth: f64 = 0.0;
    let mut orth: f64 = 0.0;
    for _ in 0..10 {
        let n = ins.index(2, 6);
        let d = ins.index(1, 3);
        let eps = ins.uniform(0.5, 2.0);
        let w = |ins: &mut Instances| -> Vec<f64> {
            let v: Vec<f64> = (0..n).map(|_| ins.uniform(0.2, 1.0)).collect();
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        };
        let x = Cloud::new(ins.points(n, d), w(&mut ins))?;
        let y = Cloud::new(ins.points(n, d), w(&mut ins))?;
        let s = cloud_divergence(&x, &y, eps, &tight())?.value;
        let sc = cloud_divergence(&center(&x), &center(&y), eps, &tight())?.value;
        let dm: f64 = x.mean().iter().zip(y.mean()).map(|(a, b)| (a - b).powi(2)).sum();
        pyth = pyth.max((s - dm - sc).abs());

        let u: Vec<f64> = (0..d).map(|_| ins.uniform(-1.0, 1.0)).collect();
        let raw = ins.vectors(n, d);
        let mut wv = vec![0.0; d];
        for (wi, r) in x.weights.iter().zip(&raw) {
            wv.iter_mut().zip(r).for_each(|(a, b)| *a += wi * b);
        }
        let centered: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| r.iter().zip(&wv).map(|(a, b)| a - b).collect())
            .collect();
        let full: Vec<Vec<f64>> = centered
            .iter()
            .map(|r| r.iter().zip(&u).map(|(a, b)| a + b).collect())
            .collect();
        let g_full = horizontal_hessian(&x, &full, eps, 1e-2, &tight())?;
        let g_cent = horizontal_hessian(&x, &centered, eps, 1e-2, &tight())?;
        let uu: f64 = u.iter().map(|a| a * a).sum();
        orth = orth.max((g_full - uu - g_cent).abs() / g_full.abs().max(1.0));
    }
    let err = (pyth / 1e-8).max(orth / 1e-3);
    Ok(Check::new(
        "",
        err,
        1.0,
        format!("Pythagoras abs {pyth:.3e}; tensor orthogonality rel {orth:.3e}"),
    ))
}

/// Grid discretization of `N(0, v)` on `[-6 sd, 6 sd]` with 400 points.
fn discretized_gaussians(v0: f64, v1: f64, eps: f64) -> Result<(Measure, Measure)> {
    let half = 6.0 * v0.max(v1).sqrt();
    let xs: Vec<f64> = (0..400).map(|k| -half + 2.0 * half * k as f64 / 399.0).collect();
    let space = GroundSpace::line(&xs, eps)?;
    let gm = |v: f64| -> Result<Measure> {
        let w: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * v)).exp()).collect();
        let s: f64 = w.iter().sum();
        Measure::new(space.clone(), w.iter().map(|x| x / s).collect())
    };
    Ok((gm(v0)?, gm(v1)?))
}

fn c08_gaussians() -> Result<Check> {
    let eps = 1.0;
    let mut fd_err: f64 = 0.0;
    for v in [0.05, 0.3, 1.0, 4.0] {
        // Second derivative of h -> S(v, v + h) at 0, Richardson over h.
        let g0 = Gaussian1D::centered(v)?;
        let d2 = |h: f64| -> f64 {
            let s = |x: f64| {
                gaussian_sinkhorn(
                    g0,
                    Gaussian1D {
                        mean: 0.0,
                        variance: v + x,
                    },
                    eps,
                )
            };
            (s(h) + s(-h)) / (h * h)
        };
        let h = 1e-2 * v;
        let r1 = (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
        fd_err = fd_err.max(rel(r1, 2.0 * gaussian_metric(v, eps)));
    }
    let mut shape_ok = true;
    let mut energy_err: f64 = 0.0;
    for (v0, v1) in [(0.01, 2.0), (3.0, 0.1), (0.5, 0.6)] {
        let ts: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let vs: Vec<f64> = ts
            .iter()
            .map(|&t| gaussian_geodesic(v0, v1, t, eps).map(|p| p.0))
            .collect::<Result<_>>()?;
        for w in vs.windows(3) {
            let mono = if v1 > v0 {
                w[1] >= w[0] && w[2] >= w[1]
            } else {
                w[1] <= w[0] && w[2] <= w[1]
            };
            let convex = w[0] - 2.0 * w[1] + w[2] >= -1e-12;
            shape_ok &= mono && convex;
        }
        let d_hat = gaussian_geodesic(v0, v1, 0.0, eps)?.1;
        let vt = |t: f64| {
            gaussian_geodesic(v0, v1, t.clamp(0.0, 1.0), eps)
                .map(|p| p.0)
                .unwrap_or(f64::NAN)
        };
        // Richardson-corrected central difference for the speed.
        let speed = |t: f64| {
            let h = 1e-3 * t.min(1.0 - t).min(1.0);
            let d = |h: f64| (vt(t + h) - vt(t - h)) / (2.0 * h);
            (4.0 * d(0.5 * h) - d(h)) / 3.0
        };
        let e = integrate(|t| gaussian_metric(vt(t), eps) * speed(t).powi(2), 0.0, 1.0, 1e-9)?;
        energy_err = energy_err.max(rel(e, d_hat * d_hat));
    }
    let mut disc_err: f64 = 0.0;
    for (v0, v1) in [(0.2, 0.5), (1.0, 1.0), (0.3, 1.2)] {
        let (a, b) = discretized_gaussians(v0, v1, eps)?;
        let generic = ot_eps(&a, &b, &SolverOptions::with_tol(1e-11))?;
        disc_err = disc_err.max(rel(generic, gaussian_ot_eps(v0, v1, eps)));
    }
    let err = (fd_err / 1e-6)
        .max(energy_err / 1e-6)
        .max(disc_err / 1e-3)
        .max(if shape_ok { 0.0 } else { f64::INFINITY });
    Ok(Check::new(
        "",
        err,
        1.0,
        format!(
            "metric vs FD {fd_err:.3e}; convex+monotone {shape_ok}; energy vs d^2 {energy_err:.3e}; discretized OT {disc_err:.3e}"
        ),
    ))
}

fn c09_geodesics(seed: u64) -> Result<Check> {
    let xs: Vec<f64> = (0..=32).map(|k| k as f64 / 32.0).collect();
    let space = GroundSpace::line(&xs, 1.0)?;
    let m0 = Measure::dirac(space.clone(), 0)?;
    let m1 = Measure::dirac(space, 32)?;
    let opts = GeodesicOptions {
        init: Init::Displacement,
        ..GeodesicOptions::default()
    };
    let dirac = solve_geodesic(&m0, &m1, &opts)?;
    let mut monotone = dirac.history.windows(2).all(|w| w[1] <= w[0]);
    let mut lb_viol = (dirac.lower_bound - dirac.ds_estimate).max(0.0);
    let dirac_err = (dirac.ds_estimate - 1.0).abs();

    let mut ins = Instances::new(seed.wrapping_add(5));
    let mut trans_err: f64 = 0.0;
    for _ in 0..3 {
        let n = ins.index(1, 4);
        let d = ins.index(1, 2);
        let x0 = Cloud::new(ins.points(n, d), vec![1.0 / n as f64; n])?;
        let u: Vec<f64> = (0..d).map(|_| ins.uniform(-1.0, 1.0)).collect();
        let shift: Vec<Vec<f64>> = (0..n).map(|_| u.clone()).collect();
        let x1 = x0.pushed(&shift, 1.0);
        let res = solve_particle_geodesic(
            &x0,
            &x1,
            1.0,
            &GeodesicOptions {
                steps: 8,
                ..GeodesicOptions::default()
            },
        )?;
        monotone &= res.history.windows(2).all(|w| w[1] <= w[0]);
        let un = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        trans_err = trans_err.max(rel(res.ds_estimate, un));
    }
    for _ in 0..3 {
        let n = ins.index(3, 5);
        let eps = ins.uniform(0.5, 2.0);
        let space = ins.space(n, 1, eps)?;
        let a = ins.measure(&space)?;
        let b = ins.measure(&space)?;
        let res = solve_geodesic(
            &a,
            &b,
            &GeodesicOptions {
                steps: 8,
                max_iter: 300,
                ..GeodesicOptions::default()
            },
        )?;
        monotone &= res.history.windows(2).all(|w| w[1] <= w[0]);
        lb_viol = lb_viol.max(res.lower_bound - res.ds_estimate);
    }
    let err = (dirac_err / 0.05)
        .max(trans_err / 0.05)
        .max(lb_viol.max(0.0) / 1e-6)
        .max(if monotone { 0.0 } else { f64::INFINITY });
    Ok(Check::new(
        "",
        err,
        1.0,
        format!(
            "Dirac estimate {:.6}; translation rel {trans_err:.3e}; lower-bound violation {lb_viol:.3e}; monotone {monotone}",
            dirac.ds_estimate
        ),
    ))
}

fn c10_two_point() -> Result<Check> {
    let mut generic_err: f64 = 0.0;
    for &(r, m, eps) in &[(0.3, 0.5, 1.0), (0.8, 0.2, 0.7), (1.5, 0.9, 2.0), (0.1, 0.35, 0.5)] {
        let space = GroundSpace::line(&[0.0, r], eps)?;
        let mu = Measure::new(space.clone(), vec![m, 1.0 - m])?;
        let b = TangentVector::new(space, vec![1.0, -1.0])?;
        let g = self_transport(&mu, &tight())?.metric_tensor(&b)?;
        let state = TwoPointState::new(r, m, eps)?;
        generic_err = generic_err.max(rel(g, two_point_tensor(&state, 1.0)));
    }
    let mut small_err: f64 = 0.0;
    for &(r, eps) in &[(0.1, 1.0), (0.05, 1.0), (0.1, 4.0)] {
        let space = GroundSpace::line(&[0.0, r], eps)?;
        let a = Measure::dirac(space.clone(), 0)?;
        let b = Measure::dirac(space, 1)?;
        let e = path_energy(&Path::linear(&a, &b, 64)?, &tight())?;
        small_err = small_err.max(rel(e, r * r));
    }
    // log g against r^2 / eps over r / sqrt(eps) in [2, 3].
    let eps = 1.0;
    let pts: Vec<(f64, f64)> = (0..=10)
        .map(|k| {
            let r = 2.0 + 0.1 * k as f64;
            let g = two_point_tensor(&TwoPointState::new(r, 0.5, eps).unwrap(), 1.0);
            (r * r / eps, g.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let slope_err = (slope - 1.0).abs();
    let err = (generic_err / 1e-10).max(small_err / 0.1).max(slope_err / 0.05);
    Ok(Check::new(
        "",
        err,
        1.0,
        format!("generic vs closed {generic_err:.3e}; small-r energy rel {small_err:.3e}; log-slope {slope:.6}"),
    ))
}

fn c11_nonconvexity() -> Result<Check> {
    let eps: f64 = 1.0;
    let thr = (eps / 2.0).sqrt();
    let exact = nonconvexity_threshold(eps);
    // Literal criterion: value > 1 exactly when r > sqrt(eps / 2).
    let (mut iff_ok, mut implication_ok, mut exact_ok) = (true, true, true);
    let mut counter = Vec::new();
    for k in 0..200 {
        let r = 3.0 * (k as f64 + 0.5) / 200.0;
        let above = nonconvexity_value(r, eps) > 1.0;
        if above != (r > thr) {
            iff_ok = false;
            counter.push(r);
        }
        implication_ok &= !(r > thr) || above;
        exact_ok &= above == (r > exact);
    }
    let mut fd_err: f64 = 0.0;
    for r in [0.3, 0.6, 1.0, 1.5] {
        let c = Cloud::new(vec![vec![-r], vec![r]], vec![0.5, 0.5])?;
        let v = vec![vec![-1.0], vec![1.0]];
        let g = horizontal_hessian(&c, &v, eps, 1e-2, &tight())?;
        fd_err = fd_err.max((g - nonconvexity_value(r, eps)).abs());
        // The same limit from the closed-form divergence of the family.
        let d2 = |h: f64| (two_dirac_values(r, r + h, eps).1 + two_dirac_values(r, r - h, eps).1) / (2.0 * h * h);
        fd_err = fd_err.max((d2(1e-3) - nonconvexity_value(r, eps)).abs());
    }
    let err = (fd_err / 1e-3).max(if iff_ok { 0.0 } else { f64::INFINITY });
    let range = match (counter.first(), counter.last()) {
        (Some(a), Some(b)) => format!(
            " ({} scan points in [{a:.4}, {b:.4}] are above 1 but below sqrt(eps/2))",
            counter.len()
        ),
        _ => String::new(),
    };
    Ok(Check::new(
        "",
        err,
        1.0,
        format!(
            "iff sqrt(eps/2) {iff_ok}{range}; implication r > sqrt(eps/2) => value > 1 {implication_ok}; \
             iff exact threshold {exact:.6} {exact_ok}; FD vs formula {fd_err:.3e}"
        ),
    ))
}

fn c12_scaling(seed: u64) -> Result<Check> {
    let mut ins = Instances::new(seed.wrapping_add(6));
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = ins.index(2, 7);
        let d = ins.index(1, 3);
        let eps = ins.uniform(0.2, 3.0);
        let pts = ins.points(n, d);
        let space = GroundSpace::sqeuclidean(pts.clone(), eps)?;
        let a = ins.measure(&space)?;
        let b = ins.measure(&space)?;
        let s = sinkhorn_divergence(&a, &b, &tight())?;
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x / eps.sqrt()).collect()).collect();
        let unit = GroundSpace::sqeuclidean(scaled, 1.0)?;
        let s1 = sinkhorn_divergence(&a.on_space(unit.clone())?, &b.on_space(unit)?, &tight())?;
        worst = worst.max((s - eps * s1).abs());
    }
    Ok(Check::new(
        "",
        worst,
        1e-9,
        "10 random instances, absolute error".into(),
    ))
}

fn c13_large_eps(seed: u64) -> Result<Check> {
    let mut ins = Instances::new(seed.wrapping_add(7));
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let n = ins.index(2, 6);
        let d = ins.index(1, 3);
        let w: Vec<f64> = (0..n).map(|_| ins.uniform(0.2, 1.0)).collect();
        let s: f64 = w.iter().sum();
        let c = Cloud::new(ins.points(n, d), w.iter().map(|x| x / s).collect())?;
        let v = ins.vectors(n, d);
        let eps = 1e3 * c.measure(1.0)?.space().cost_sup();
        let (g, lim) = tensor_eps_infinity_check(&c, &v, eps, &tight())?;
        worst = worst.max((g - lim).abs() / velocity_sq(&c, &v));
    }
    Ok(Check::new(
        "",
        worst,
        0.05,
        "5 random clouds, error over |v|^2_L2".into(),
    ))
}

/// Checks that belong to the core module rather than a numbered criterion.
fn core_checks(seed: u64) -> Vec<Check> {
    let r = (|| -> Result<Vec<Check>> {
        let mut ins = Instances::new(seed.wrapping_add(8));
        let (mut eig, mut ident, mut trans) = (f64::INFINITY, 0.0f64, 0.0f64);
        let mut eig_scaled: f64 = 0.0;
        for k in 0..10 {
            let n = 5 * (k + 1);
            let d = ins.index(1, 3);
            let pts = ins.points(n, d);
            let space = GroundSpace::sqeuclidean(pts.clone(), ins.uniform(0.2, 2.0))?;
            let lmin = space.gram_min_eigenvalue();
            eig = eig.min(lmin);
            eig_scaled = eig_scaled.max(-lmin / (1e-10 * n as f64));
            let a = ins.tangent(&space)?;
            ident = ident.max((mmd_sq(&space, a.weights())? - rkhs_inner(&space, a.weights(), a.weights())?).abs());
            let u: Vec<f64> = (0..d).map(|_| ins.uniform(-3.0, 3.0)).collect();
            let moved: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| p.iter().zip(&u).map(|(x, y)| x + y).collect())
                .collect();
            let other = GroundSpace::sqeuclidean(moved, space.epsilon())?;
            trans = trans.max((mmd_sq(&space, a.weights())? - mmd_sq(&other, a.weights())?).abs());
        }
        Ok(vec![
            Check::new(
                "core: Gibbs matrix positive semidefinite",
                eig_scaled,
                1.0,
                format!("min eigenvalue {eig:.3e}"),
            ),
            Check::new("core: mmd equals rkhs inner product", ident, 0.0, String::new()),
            Check::new("core: mmd translation invariance", trans, 1e-12, String::new()),
        ])
    })();
    r.unwrap_or_else(|e| vec![Check::failed("core", e)])
}

fn sinkhorn_checks(seed: u64) -> Vec<Check> {
    let r = (|| -> Result<Vec<Check>> {
        let mut ins = Instances::new(seed.wrapping_add(9));
        let (mut sym, mut self_zero, mut bound) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
        for _ in 0..10 {
            let (mu, _) = random_instance(&mut ins)?;
            let nu = ins.measure(mu.space())?;
            let ab = sinkhorn_divergence(&mu, &nu, &tight())?;
            let ba = sinkhorn_divergence(&nu, &mu, &tight())?;
            sym = sym.max((ab - ba).abs());
            self_zero = self_zero.max(sinkhorn_divergence(&mu, &mu, &tight())?.abs());
            let d = divergence(&mu, &nu, &tight())?;
            let cmax = mu.space().cost_sup();
            bound = bound
                .max(d.cross.f.amax() - 1.5 * cmax)
                .max(d.cross.g.amax() - 1.5 * cmax);
        }
        Ok(vec![
            Check::new("sinkhorn: symmetry", sym, 1e-10, String::new()),
            Check::new("sinkhorn: S(mu, mu) = 0", self_zero, 1e-10, String::new()),
            Check::new("sinkhorn: |f| <= 3/2 |c|", bound.max(0.0), 1e-9, String::new()),
        ])
    })();
    r.unwrap_or_else(|e| vec![Check::failed("sinkhorn", e)])
}

fn suite_criteria(suite: Suite) -> Vec<usize> {
    match suite {
        Suite::Core => vec![],
        Suite::Sinkhorn => vec![1, 2, 7, 12],
        Suite::Tensor => vec![3, 4, 5, 6, 13],
        Suite::Geodesics => vec![9],
        Suite::ClosedForms => vec![8, 10, 11],
        Suite::All => (1..=13).collect(),
    }
}

/// Runs one suite. `All` covers every numbered criterion plus the module checks.
pub fn run_suite(suite: Suite, seed: u64) -> Report {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Core | Suite::All) {
        checks.extend(core_checks(seed));
    }
    if matches!(suite, Suite::Sinkhorn | Suite::All) {
        checks.extend(sinkhorn_checks(seed));
    }
    for id in suite_criteria(suite) {
        checks.push(criterion(id, seed));
    }
    Report {
        suite,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
