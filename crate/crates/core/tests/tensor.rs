use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use sinkgeo::closed_forms::{two_point_tensor, TwoPointState};
use sinkgeo::fd::tensor_eps_infinity_check;
use sinkgeo::random::Instances;
use sinkgeo::sinkhorn::Cloud;
use sinkgeo::tensor::{contraction_bound, map_a, map_a_inverse, map_b, norm_equivalence_constant};
use sinkgeo::{
    self_transport, sinkhorn_divergence, solve_potentials, Error, GroundSpace, Measure, SignedVector, SolverOptions,
    TangentVector,
};

fn tight() -> SolverOptions {
    SolverOptions::with_tol(1e-13)
}

fn full_support(ins: &mut Instances, n: usize, d: usize, eps: f64) -> Measure {
    let s = ins.space(n, d, eps).unwrap();
    ins.measure(&s).unwrap()
}

fn centered(x: &DVector<f64>, mu: &Measure) -> DVector<f64> {
    x.add_scalar(-mu.weights().dot(x))
}

fn shifted(mu: &Measure, b: &TangentVector, t: f64) -> Measure {
    let w: Vec<f64> = mu
        .weights()
        .iter()
        .zip(b.weights().iter())
        .map(|(a, v)| a + t * v)
        .collect();
    Measure::normalized(mu.space().clone(), w, 1e-9).unwrap()
}

#[test]
fn dirac_self_transport() {
    let s = GroundSpace::line(&[0.0, 1.0], 1.0).unwrap();
    let mu = Measure::dirac(s.clone(), 0).unwrap();
    let st = self_transport(&mu, &tight()).unwrap();
    assert_eq!(st.f[0], 0.0);
    assert_eq!(st.k[(0, 0)], 1.0);
    assert_eq!(st.h[(0, 0)], 1.0);
    assert_eq!(st.eigenvalues().as_slice(), &[1.0]);
    assert_eq!(st.spectral_report().eigenvalues, vec![1.0]);
    assert_eq!(map_a(&st).weights().as_slice(), &[1.0, 0.0]);
    // Values of B are the gibbs column of the atom.
    let b = map_b(&st);
    assert_abs_diff_eq!(b.weights()[0], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(b.weights()[1], s.gibbs()[(1, 0)], epsilon = 1e-15);
    let zero = DVector::from_vec(vec![0.3, 0.0]);
    assert_eq!(st.pseudo_solve(&zero).unwrap()[0], 0.0);
}

#[test]
fn symmetric_pair_potential_and_coefficients() {
    for (r, eps) in [(0.5, 1.0), (1.0, 0.5), (0.1, 2.0)] {
        let s = GroundSpace::line(&[-r, r], eps).unwrap();
        let mu = Measure::uniform(s);
        let st = self_transport(&mu, &tight()).unwrap();
        let f = 0.5 * eps * (std::f64::consts::LN_2 - (1.0 + (-4.0 * r * r / eps).exp()).ln());
        assert_abs_diff_eq!(st.f[0], f, epsilon = 1e-12);
        assert_abs_diff_eq!(st.f[1], f, epsilon = 1e-12);
        let alpha = map_a(&st);
        assert_abs_diff_eq!(alpha.weights()[0], 0.5 * (f / eps).exp(), epsilon = 1e-12);
    }
}

#[test]
fn structural_invariants_on_random_instances() {
    let mut ins = Instances::new(17);
    for _ in 0..10 {
        let n = ins.index(1, 8);
        let d = ins.index(1, 3);
        let eps = ins.uniform(0.2, 2.0);
        let mu = full_support(&mut ins, n, d, eps);
        let st = self_transport(&mu, &tight()).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(st.k.row(i).sum(), 1.0, epsilon = 1e-10);
            assert!(st.f[i] >= -1e-9);
            assert!(st.f[i].abs() <= 1.5 * mu.space().cost_sup() + 1e-9);
        }
        assert_abs_diff_eq!(st.h.clone(), st.h.transpose(), epsilon = 1e-15);
        let alpha = map_a(&st);
        let norm = alpha.weights().dot(&(mu.space().gibbs() * alpha.weights()));
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
        let ev = st.eigenvalues();
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-10);
        if n > 1 {
            assert!(1.0 - ev[1] > 1e-8);
            assert!(ev[1] <= contraction_bound(mu.space()) + 1e-9);
        }
        assert!(ev.iter().all(|l| *l >= -1e-12 && *l <= 1.0 + 1e-12));
    }
}

#[test]
fn pseudo_solve_matches_svd_least_squares() {
    let mut ins = Instances::new(31);
    for _ in 0..5 {
        let mu = full_support(&mut ins, 3, 2, 0.7);
        let st = self_transport(&mu, &tight()).unwrap();
        let v = DVector::from_vec(vec![
            ins.uniform(-1.0, 1.0),
            ins.uniform(-1.0, 1.0),
            ins.uniform(-1.0, 1.0),
        ]);
        // (I - K^2) x = v - <mu, v> 1 together with <mu, x> = 0.
        let m = DMatrix::identity(3, 3) - &st.k * &st.k;
        let mut sys = DMatrix::zeros(4, 3);
        sys.view_mut((0, 0), (3, 3)).copy_from(&m);
        for j in 0..3 {
            sys[(3, j)] = mu.weights()[j];
        }
        let mut rhs = DVector::zeros(4);
        rhs.rows_mut(0, 3).copy_from(&v.add_scalar(-mu.weights().dot(&v)));
        let oracle = sys.pseudo_inverse(1e-14).unwrap() * rhs;
        let x = st.pseudo_solve(&v).unwrap();
        assert_abs_diff_eq!(x, oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(
            st.pseudo_solve(&DVector::from_element(3, 2.5)).unwrap(),
            DVector::zeros(3),
            epsilon = 1e-12
        );
    }
}

#[test]
fn other_solves_invert_their_operators() {
    let mut ins = Instances::new(8);
    let mu = full_support(&mut ins, 5, 2, 0.5);
    let st = self_transport(&mu, &tight()).unwrap();
    let v = DVector::from_fn(5, |i, _| (i as f64).sin());
    let x = st.solve_i_plus_k(&v).unwrap();
    assert_abs_diff_eq!(&x + &st.k * &x, v, epsilon = 1e-10);
    let y = st.solve_i_minus_k(&v).unwrap();
    let lhs = &y - &st.k * &y;
    assert_abs_diff_eq!(lhs, v.add_scalar(-mu.weights().dot(&v)), epsilon = 1e-10);
}

#[test]
fn potential_derivative_matches_cross_potential_differences() {
    let s = GroundSpace::line(&[-0.5, 0.5], 1.0).unwrap();
    let mu = Measure::uniform(s.clone());
    let b = TangentVector::new(s, vec![1.0, -1.0]).unwrap();
    let st = self_transport(&mu, &tight()).unwrap();
    let d = st.potential_derivative(&b).unwrap();
    let h = 1e-4;
    let fp = solve_potentials(&mu, &shifted(&mu, &b, h), &tight()).unwrap().f;
    let fm = solve_potentials(&mu, &shifted(&mu, &b, -h), &tight()).unwrap().f;
    let fd = centered(&((fp - fm) / (2.0 * h)), &mu);
    assert_abs_diff_eq!(d, fd, epsilon = 1e-5);
    // Same linear algebra as the tensor.
    assert_abs_diff_eq!(
        st.metric_tensor(&b).unwrap(),
        -0.5 * b.weights().dot(&d),
        epsilon = 1e-14
    );
    let zero = TangentVector::new(mu.space().clone(), vec![0.0, 0.0]).unwrap();
    assert_eq!(st.potential_derivative(&zero).unwrap(), DVector::zeros(2));
}

#[test]
fn tensor_matches_second_differences() {
    let mut ins = Instances::new(41);
    for _ in 0..4 {
        let mu = full_support(&mut ins, 5, 2, 1.0);
        let b = ins.tangent(mu.space()).unwrap();
        let g = self_transport(&mu, &tight()).unwrap().metric_tensor(&b).unwrap();
        let scale = mu
            .weights()
            .iter()
            .zip(b.weights().iter())
            .filter(|(_, v)| **v != 0.0)
            .map(|(w, v)| 0.5 * w / v.abs())
            .fold(1.0f64, f64::min);
        let q = |t: f64| sinkhorn_divergence(&mu, &shifted(&mu, &b, t), &tight()).unwrap() / (t * t);
        let ts = [1e-2 * scale, 5e-3 * scale, 2.5e-3 * scale];
        let d: Vec<f64> = ts.iter().map(|t| 0.5 * (q(*t) + q(-*t))).collect();
        let r1 = (4.0 * d[1] - d[0]) / 3.0;
        let r2 = (4.0 * d[2] - d[1]) / 3.0;
        let fd = (16.0 * r2 - r1) / 15.0;
        assert!((g - fd).abs() <= 1e-4 * g, "g = {g}, fd = {fd}");
    }
}

#[test]
fn two_point_tensor_and_spectrum() {
    for (r, m, eps) in [(1.0, 0.3, 1.0), (0.4, 0.5, 0.5), (2.0, 0.8, 3.0)] {
        let s = GroundSpace::line(&[0.0, r], eps).unwrap();
        let mu = Measure::new(s.clone(), vec![m, 1.0 - m]).unwrap();
        let st = self_transport(&mu, &tight()).unwrap();
        let closed = TwoPointState::new(r, m, eps).unwrap();
        let b = TangentVector::new(s, vec![0.7, -0.7]).unwrap();
        assert_abs_diff_eq!(
            st.metric_tensor(&b).unwrap(),
            two_point_tensor(&closed, 0.7),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(st.lambda2(), closed.lambda2, epsilon = 1e-10);
    }
}

#[test]
fn zero_tangent_gives_zero() {
    let mut ins = Instances::new(1);
    let mu = full_support(&mut ins, 4, 1, 1.0);
    let st = self_transport(&mu, &tight()).unwrap();
    let zero = TangentVector::new(mu.space().clone(), vec![0.0; 4]).unwrap();
    assert_eq!(st.metric_tensor(&zero).unwrap(), 0.0);
    let bd = st.beta_dot_from_mu_dot(&zero).unwrap();
    assert_eq!(bd.weights(), &DVector::zeros(4));
    assert_eq!(st.tilde_metric_tensor(&bd).unwrap(), 0.0);
}

#[test]
fn beta_dot_matches_coefficient_differences() {
    let mut ins = Instances::new(23);
    for _ in 0..3 {
        let mu = full_support(&mut ins, 4, 2, 0.8);
        let b = ins.tangent(mu.space()).unwrap();
        let st = self_transport(&mu, &tight()).unwrap();
        let bd = st.beta_dot_from_mu_dot(&b).unwrap();
        let h = 1e-4;
        let ap = map_a(&self_transport(&shifted(&mu, &b, h), &tight()).unwrap());
        let am = map_a(&self_transport(&shifted(&mu, &b, -h), &tight()).unwrap());
        let diff = (ap.weights() - am.weights()) / (2.0 * h) - bd.weights();
        let err = diff.dot(&(mu.space().gibbs() * &diff)).max(0.0).sqrt();
        assert!(err < 1e-5, "H_c error {err}");
        assert!(st.tangency(&bd).unwrap().abs() < 1e-10);
    }
}

#[test]
fn tilde_tensor_equals_tensor_with_sandwiches() {
    let mut ins = Instances::new(29);
    for _ in 0..10 {
        let n = ins.index(2, 7);
        let eps = ins.uniform(0.5, 2.0);
        let mu = full_support(&mut ins, n, 2, eps);
        let b = ins.tangent(mu.space()).unwrap();
        let st = self_transport(&mu, &tight()).unwrap();
        let g = st.metric_tensor(&b).unwrap();
        let bd = st.beta_dot_from_mu_dot(&b).unwrap();
        let gt = st.tilde_metric_tensor(&bd).unwrap();
        assert!((g - gt).abs() <= 1e-9 * g.max(1.0));
        let norm = bd.weights().dot(&bd.kernel_values());
        let c = norm_equivalence_constant(mu.space());
        assert!(0.5 * eps * norm <= gt * (1.0 + 1e-9));
        assert!(gt <= c * 0.5 * eps * norm * (1.0 + 1e-9));
        let hb = b.weights().dot(&(&st.h * b.weights()));
        let q = contraction_bound(mu.space());
        assert!(hb <= 2.0 / eps * g * (1.0 + 1e-9));
        assert!(2.0 / eps * g <= hb / (1.0 - q * q) * (1.0 + 1e-9));
    }
}

#[test]
fn non_tangent_velocity_is_rejected() {
    let mut ins = Instances::new(3);
    let mu = full_support(&mut ins, 3, 1, 1.0);
    let st = self_transport(&mu, &tight()).unwrap();
    let radial = SignedVector::new(mu.space().clone(), map_a(&st).weights().iter().copied().collect()).unwrap();
    assert!(matches!(st.tilde_metric_tensor(&radial), Err(Error::NotTangent(_))));
}

#[test]
fn tangent_off_support_is_rejected() {
    let s = GroundSpace::line(&[0.0, 1.0, 2.0], 1.0).unwrap();
    let mu = Measure::new(s.clone(), vec![0.5, 0.5, 0.0]).unwrap();
    let st = self_transport(&mu, &tight()).unwrap();
    let b = TangentVector::new(s, vec![1.0, 0.0, -1.0]).unwrap();
    assert!(matches!(st.metric_tensor(&b), Err(Error::SupportViolation(2))));
}

#[test]
fn embedding_round_trips() {
    let mut ins = Instances::new(37);
    for _ in 0..10 {
        let n = ins.index(1, 8);
        let eps = ins.uniform(0.3, 2.0);
        let mu = full_support(&mut ins, n, 2, eps);
        let st = self_transport(&mu, &tight()).unwrap();
        let back = map_a_inverse(mu.space().clone(), map_a(&st).weights()).unwrap();
        assert_abs_diff_eq!(back.weights(), mu.weights(), epsilon = 1e-8);
        // B values are the kernel values of the A coefficients.
        assert_abs_diff_eq!(
            map_a(&st).kernel_values(),
            map_b(&st).weights().clone(),
            epsilon = 1e-10
        );
    }
}

#[test]
fn large_epsilon_keeps_only_the_mean_motion() {
    let cloud = Cloud::new(vec![vec![0.0], vec![1.0], vec![2.5]], vec![0.2, 0.5, 0.3]).unwrap();
    let u = vec![vec![0.7]; 3];
    let (g, limit) = tensor_eps_infinity_check(&cloud, &u, 2.0, &tight()).unwrap();
    assert_abs_diff_eq!(limit, 0.49, epsilon = 1e-15);
    assert_abs_diff_eq!(g, 0.49, epsilon = 1e-6);

    let sym = Cloud::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let v = vec![vec![-1.0], vec![1.0]];
    let eps = 1e3 * 4.0;
    let (g, limit) = tensor_eps_infinity_check(&sym, &v, eps, &tight()).unwrap();
    assert_eq!(limit, 0.0);
    assert!(g.abs() <= 0.05);

    let dirac = Cloud::dirac(vec![1.0, 2.0]);
    let w = vec![vec![0.3, -0.4]];
    let (g, limit) = tensor_eps_infinity_check(&dirac, &w, 0.1, &tight()).unwrap();
    assert_eq!(limit, 0.25);
    assert_abs_diff_eq!(g, 0.25, epsilon = 1e-9);
}
