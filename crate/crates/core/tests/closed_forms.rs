use approx::assert_abs_diff_eq;
use sinkgeo::closed_forms::*;
use sinkgeo::quadrature::{integrate, newton_bisect};
use sinkgeo::sinkhorn::{cloud_divergence, Cloud};
use sinkgeo::{divergence, ot_eps, Error, GroundSpace, Measure, SolverOptions};

const LN2: f64 = std::f64::consts::LN_2;

fn tight() -> SolverOptions {
    SolverOptions::with_tol(1e-13)
}

fn gauss(v: f64) -> Gaussian1D {
    Gaussian1D::centered(v).unwrap()
}

#[test]
fn quadrature_on_known_integrals() {
    assert_abs_diff_eq!(
        integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-13).unwrap(),
        2.0,
        epsilon = 1e-13
    );
    assert_abs_diff_eq!(
        integrate(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, 1e-13).unwrap(),
        std::f64::consts::FRAC_PI_4,
        epsilon = 1e-14
    );
    assert_abs_diff_eq!(
        integrate(f64::sqrt, 0.0, 1.0, 1e-12).unwrap(),
        2.0 / 3.0,
        epsilon = 1e-11
    );
    assert_abs_diff_eq!(
        integrate(f64::exp, 1.0, 0.0, 1e-13).unwrap(),
        1.0 - std::f64::consts::E,
        epsilon = 1e-13
    );
    let root = newton_bisect(|x| Ok(x * x - 2.0), |x| 2.0 * x, 0.0, 2.0, 1e-15).unwrap();
    assert_abs_diff_eq!(root, std::f64::consts::SQRT_2, epsilon = 1e-14);
}

#[test]
fn gaussian_f_series_and_inverse() {
    // F(x) = x - x^3 / 12 + O(x^5).
    let x = 1e-2;
    assert_abs_diff_eq!(gaussian_f(x).unwrap(), x - x * x * x / 12.0, epsilon = 1e-11);
    assert_abs_diff_eq!(gaussian_f(-x).unwrap(), -gaussian_f(x).unwrap(), epsilon = 0.0);
    for x in [0.0, 0.3, 2.0, 17.0, 400.0] {
        let y = gaussian_f(x).unwrap();
        assert_abs_diff_eq!(gaussian_f_inverse(y).unwrap(), x, epsilon = 1e-9 * x.max(1.0));
    }
}

#[test]
fn gaussian_ot_examples() {
    assert_eq!(gaussian_kappa(0.0, 0.0, 1.0), 2.0);
    assert_abs_diff_eq!(gaussian_ot_eps(0.0, 0.0, 0.7), 0.0, epsilon = 1e-15);
    let eps = 0.8;
    let v = eps / 4.0;
    let k = 1.0 + 2f64.sqrt();
    assert_abs_diff_eq!(gaussian_kappa(v, v, eps), k, epsilon = 1e-15);
    let expect = eps / 2.0 - eps / 2.0 * (k - k.ln() + LN2 - 2.0);
    assert_abs_diff_eq!(gaussian_ot_eps(v, v, eps), expect, epsilon = 1e-15);
}

fn discretized(xs: &[f64], v: f64, space: &std::sync::Arc<GroundSpace>) -> Measure {
    let w: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * v)).exp()).collect();
    let s: f64 = w.iter().sum();
    Measure::new(space.clone(), w.iter().map(|x| x / s).collect()).unwrap()
}

#[test]
fn gaussian_ot_matches_discretized_solver() {
    for (v0, v1, eps) in [(0.5, 1.5, 1.0), (1.0, 0.25, 0.5)] {
        let half = 6.0 * f64::max(v0, v1).sqrt();
        let xs: Vec<f64> = (0..400).map(|k| -half + 2.0 * half * k as f64 / 399.0).collect();
        let space = GroundSpace::line(&xs, eps).unwrap();
        let a = discretized(&xs, v0, &space);
        let b = discretized(&xs, v1, &space);
        let generic = ot_eps(&a, &b, &SolverOptions::with_tol(1e-11)).unwrap();
        let closed = gaussian_ot_eps(v0, v1, eps);
        assert!((generic - closed).abs() <= 1e-3 * closed.abs(), "{generic} vs {closed}");
    }
}

#[test]
fn gaussian_sinkhorn_examples() {
    let g = Gaussian1D::new(0.4, 2.0).unwrap();
    assert_abs_diff_eq!(gaussian_sinkhorn(g, g, 1.0), 0.0, epsilon = 1e-14);
    let h = Gaussian1D::new(-1.1, 2.0).unwrap();
    assert_abs_diff_eq!(gaussian_sinkhorn(g, h, 1.0), 1.5 * 1.5, epsilon = 1e-13);
    assert!(Gaussian1D::new(0.0, -1.0).is_err());
}

#[test]
fn gaussian_triangle_counterexample() {
    let eps = 1.0;
    let v = 20.0;
    let s = |a: f64, b: f64| gaussian_sinkhorn(gauss(eps * a / 4.0), gauss(eps * b / 4.0), eps);
    let delta = Gaussian1D::centered(0.0).unwrap();
    let s0 = |a: f64| gaussian_sinkhorn(delta, gauss(eps * a / 4.0), eps);
    let psi = |x: f64| {
        let zeta = 4.0 / eps * s0(x);
        let xi = 4.0 / eps * s(x, v);
        let r = (1.0 + v * x).sqrt();
        2.0 * (1.0 + r).ln() - 2.0 * r - 2.0 * LN2 + 2.0 + 2.0 * zeta + 2.0 * (zeta * xi).sqrt()
    };
    // zeta agrees with its displayed form.
    let x: f64 = 0.3;
    let q = (1.0 + x * x).sqrt();
    assert_abs_diff_eq!(4.0 / eps * s0(x), q - (1.0 + q).ln() + LN2 - 1.0, epsilon = 1e-13);
    assert_abs_diff_eq!(psi(0.0), 0.0, epsilon = 1e-13);
    let w = (1.0 + v * v).sqrt();
    let slope = -v / 2.0 + (w - 1.0 + LN2 - (1.0 + w).ln()).sqrt();
    assert!(slope < 0.0);
    // psi(x) / x = slope + O(x); one extrapolation step removes the O(x) term.
    let h = 1e-3;
    assert_abs_diff_eq!(2.0 * psi(h / 2.0) / (h / 2.0) - psi(h) / h, slope, epsilon = 1e-3);
    // The triangle inequality fails for the triple itself.
    let x = 1e-3;
    assert!(s0(v).sqrt() > s0(x).sqrt() + s(x, v).sqrt());
}

#[test]
fn gaussian_metric_examples() {
    assert_abs_diff_eq!(gaussian_metric(0.0, 0.5), 2.0, epsilon = 1e-15);
    let v = 1e4;
    assert!((gaussian_metric(v, 1.0) * 4.0 * v - 1.0).abs() < 1e-8);
    for (v, eps) in [(0.3, 1.0), (2.0, 0.5), (0.01, 2.0)] {
        let s = |d: f64| gaussian_sinkhorn(gauss(v), gauss(v + d), eps);
        let h = 1e-2 * v.max(0.1);
        let d = |h: f64| (s(h) - 2.0 * s(0.0) + s(-h)) / (h * h);
        let second = (4.0 * d(h / 2.0) - d(h)) / 3.0;
        assert!(
            (second - 2.0 * gaussian_metric(v, eps)).abs() <= 1e-6 * second.max(1.0),
            "v = {v}"
        );
    }
}

#[test]
fn gaussian_geodesic_endpoints_and_shape() {
    let (v0, v1, eps) = (0.1, 3.0, 1.0);
    assert_eq!(gaussian_geodesic(v0, v1, 0.0, eps).unwrap().0, v0);
    assert_eq!(gaussian_geodesic(v0, v1, 1.0, eps).unwrap().0, v1);
    let (vt, d) = gaussian_geodesic(0.7, 0.7, 0.4, eps).unwrap();
    assert_abs_diff_eq!(vt, 0.7, epsilon = 1e-12);
    assert_eq!(d, 0.0);
    let vs: Vec<f64> = (0..=50)
        .map(|k| gaussian_geodesic(v0, v1, k as f64 / 50.0, eps).unwrap().0)
        .collect();
    for k in 1..50 {
        assert!(vs[k] > vs[k - 1]);
        assert!(vs[k + 1] - 2.0 * vs[k] + vs[k - 1] >= -1e-12);
    }
    assert!(gaussian_geodesic(v0, v1, 1.5, eps).is_err());
}

#[test]
fn gaussian_geodesic_energy_equals_distance_squared() {
    for (v0, v1, eps) in [(0.1, 3.0, 1.0), (2.0, 0.05, 0.5)] {
        let d = gaussian_geodesic(v0, v1, 0.5, eps).unwrap().1;
        let vt = |t: f64| gaussian_geodesic(v0, v1, t, eps).unwrap().0;
        // Richardson-combined midpoint sums; nodes stay clear of t = 0, 1.
        let h = 1e-5;
        let integrand = |t: f64| {
            let d1 = (vt(t + h) - vt(t - h)) / (2.0 * h);
            let d2 = (vt(t + h / 2.0) - vt(t - h / 2.0)) / h;
            let dv = (4.0 * d2 - d1) / 3.0;
            gaussian_metric(vt(t), eps) * dv * dv
        };
        let midpoint = |n: usize| (0..n).map(|k| integrand((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        let energy = (4.0 * midpoint(2000) - midpoint(1000)) / 3.0;
        assert!(
            (energy - d * d).abs() <= 1e-6 * (d * d).max(1.0),
            "{energy} vs {}",
            d * d
        );
    }
}

#[test]
fn wasserstein_interpolation() {
    assert_abs_diff_eq!(wasserstein_gaussian_variance(1.0, 4.0, 0.5), 2.25, epsilon = 1e-15);
}

#[test]
fn two_dirac_examples() {
    let (_, s) = two_dirac_values(0.7, 0.7, 1.3);
    assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
    let eps: f64 = 2.0;
    let (_, s) = two_dirac_values(eps.sqrt(), 0.0, eps);
    let expect = 1.0 - 0.5 * LN2 + 0.5 * (1.0 + (-4.0f64).exp()).ln();
    assert_abs_diff_eq!(s / eps, expect, epsilon = 1e-15);
    assert_abs_diff_eq!(s / eps, 0.662_499, epsilon = 1e-5);
}

#[test]
fn two_dirac_matches_generic_solver() {
    for (r, eps) in [(0.5, 1.0), (1.3, 0.25), (2.0, 4.0)] {
        let space = GroundSpace::line(&[-r, 0.0, r], eps).unwrap();
        let a = Measure::new(space.clone(), vec![0.5, 0.0, 0.5]).unwrap();
        let b = Measure::new(space, vec![0.0, 1.0, 0.0]).unwrap();
        let d = divergence(&a, &b, &tight()).unwrap();
        let (ot, s) = two_dirac_values(r, 0.0, eps);
        assert_abs_diff_eq!(d.cross.dual_value(&a, &b), ot, epsilon = 1e-10);
        assert_abs_diff_eq!(d.value, s, epsilon = 1e-10);
    }
}

#[test]
fn triangle_gap_values() {
    let gap = triangle_gap(1.0);
    assert_abs_diff_eq!(gap, 0.093, epsilon = 1e-3);
    assert_abs_diff_eq!(triangle_gap(0.37), gap, epsilon = 1e-9);
    let generic = |x: f64, y: f64| {
        let space = GroundSpace::line(&[-x, x, -y, y], 1.0).unwrap();
        let a = Measure::new(space.clone(), vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let b = Measure::new(space, vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        divergence(&a, &b, &tight()).unwrap().value.max(0.0).sqrt()
    };
    let recomputed = generic(0.0, 2.0) - generic(0.0, 1.0) - generic(1.0, 2.0);
    assert_abs_diff_eq!(recomputed, gap, epsilon = 1e-8);
}

#[test]
fn two_point_state_rejects_degenerate_input() {
    assert!(matches!(
        TwoPointState::new(1.0, 0.0, 1.0),
        Err(Error::DegenerateMass(_))
    ));
    assert!(matches!(
        TwoPointState::new(1.0, 1.0, 1.0),
        Err(Error::DegenerateMass(_))
    ));
    assert!(TwoPointState::new(0.0, 0.5, 1.0).is_err());
}

#[test]
fn two_point_small_distance() {
    let eps = 1.0;
    for r in [0.01, 0.03, 0.1] {
        let st = TwoPointState::new(r, 0.4, eps).unwrap();
        let g = two_point_tensor(&st, 1.0);
        assert!((g - r * r).abs() <= 2.0 * r.powi(4) / eps, "r = {r}: {g}");
    }
}

#[test]
fn two_point_large_distance() {
    let eps: f64 = 0.5;
    for x in [2.0, 2.5, 3.0, 3.5] {
        let r = x * eps.sqrt();
        let st = TwoPointState::new(r, 0.5, eps).unwrap();
        let g = two_point_tensor(&st, 1.0);
        let lead = (r * r / eps).exp();
        assert!(
            (2.0 * g / eps - lead).abs() < 2.0,
            "x = {x}: {} vs {lead}",
            2.0 * g / eps
        );
    }
}

#[test]
fn nonconvexity_closed_form_values() {
    let eps = 1.0;
    let k = (-2.0f64).exp();
    let expect = 1.0 + k / (1.0 + k) * (4.0 / (1.0 + k) - 2.0);
    assert_abs_diff_eq!(nonconvexity_value((eps / 2.0f64).sqrt(), eps), expect, epsilon = 1e-15);
    assert!(expect > 1.0);
    assert_abs_diff_eq!(nonconvexity_value(30.0, eps), 1.0, epsilon = 1e-12);
}

#[test]
fn nonconvexity_sign_change_at_threshold() {
    for eps in [0.5, 1.0, 3.0] {
        let r = nonconvexity_threshold(eps);
        let x = 4.0 * r * r / eps;
        assert_abs_diff_eq!(x, 1.0 + (-x).exp(), epsilon = 1e-14);
        assert!(nonconvexity_value(r * (1.0 - 1e-6), eps) < 1.0);
        assert!(nonconvexity_value(r * (1.0 + 1e-6), eps) > 1.0);
        assert!(r < (eps / 2.0).sqrt());
        // Beyond the sufficient radius the value stays above one until kappa underflows.
        for k in 0..20 {
            let s = (eps / 2.0).sqrt() * (1.0 + 0.1 * k as f64);
            assert!(nonconvexity_value(s, eps) > 1.0);
        }
    }
}

#[test]
fn nonconvexity_matches_second_differences() {
    let eps = 1.0;
    for r in [0.3, 0.6, 1.0] {
        let cloud = Cloud::new(vec![vec![-r], vec![r]], vec![0.5, 0.5]).unwrap();
        let v = vec![vec![-1.0], vec![1.0]];
        let s = |t: f64| {
            cloud_divergence(&cloud, &cloud.pushed(&v, t), eps, &tight())
                .unwrap()
                .value
        };
        let h = 1e-2 * r;
        let d1 = (s(h) + s(-h)) / (2.0 * h * h);
        let d2 = (s(h / 2.0) + s(-h / 2.0)) / (0.5 * h * h);
        let fd = (4.0 * d2 - d1) / 3.0;
        assert_abs_diff_eq!(fd, nonconvexity_value(r, eps), epsilon = 1e-3);
    }
}
