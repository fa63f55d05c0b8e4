use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use sinkgeo::{mmd_sq, rkhs_inner, CostKind, Error, GroundSpace, Measure, SignedVector, TangentVector};

const E: f64 = std::f64::consts::E;

#[test]
fn single_point_gibbs_is_one() {
    let s = GroundSpace::line(&[0.0], 1.0).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s.gibbs()[(0, 0)], 1.0);
}

#[test]
fn two_point_cost_and_gibbs() {
    let s = GroundSpace::line(&[0.0, 1.0], 1.0).unwrap();
    assert_eq!(s.cost(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    assert_abs_diff_eq!(s.gibbs()[(0, 1)], 1.0 / E, epsilon = 1e-15);
    assert_eq!(s.gibbs()[(1, 1)], 1.0);
}

#[test]
fn symmetric_pair_gibbs_entry() {
    let s = GroundSpace::line(&[-1.0, 1.0], 1.0).unwrap();
    assert_abs_diff_eq!(s.gibbs()[(0, 1)], 0.018_315_638_888_734_18, epsilon = 1e-15);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(matches!(
        GroundSpace::line(&[0.0], 0.0),
        Err(Error::NonPositiveEpsilon(_))
    ));
    assert!(matches!(GroundSpace::line(&[], 1.0), Err(Error::EmptySpace)));
    let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
    assert!(matches!(
        GroundSpace::from_cost(asym, 1.0),
        Err(Error::NonSymmetricCost { .. })
    ));
    let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
    assert!(matches!(
        GroundSpace::from_cost(neg, 1.0),
        Err(Error::NegativeCost { .. })
    ));
    let ragged = GroundSpace::build(vec![vec![0.0], vec![0.0, 1.0]], CostKind::SqEuclidean, 1.0);
    assert!(matches!(ragged, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn measures_and_tangents_validate_mass() {
    let s = GroundSpace::line(&[0.0, 1.0], 1.0).unwrap();
    assert!(Measure::new(s.clone(), vec![0.5, 0.6]).is_err());
    assert!(Measure::new(s.clone(), vec![1.5, -0.5]).is_err());
    assert!(Measure::new(s.clone(), vec![0.25, 0.75]).is_ok());
    assert!(matches!(
        TangentVector::new(s.clone(), vec![1.0, -0.5]),
        Err(Error::UnbalancedTangent(_))
    ));
    assert!(TangentVector::new(s, vec![1.0, -1.0]).is_ok());
}

#[test]
fn mmd_examples() {
    let one = GroundSpace::line(&[0.0], 1.0).unwrap();
    assert_eq!(mmd_sq(&one, &DVector::from_vec(vec![1.0])).unwrap(), 1.0);
    let two = GroundSpace::line(&[0.0, 1.0], 1.0).unwrap();
    assert_eq!(mmd_sq(&two, &DVector::zeros(2)).unwrap(), 0.0);
    let v = mmd_sq(&two, &DVector::from_vec(vec![1.0, -1.0])).unwrap();
    assert_abs_diff_eq!(v, 2.0 - 2.0 / E, epsilon = 1e-15);
    assert_abs_diff_eq!(v, 1.264_241_117_657_115_4, epsilon = 1e-15);
}

#[test]
fn rkhs_inner_examples() {
    let one = GroundSpace::line(&[0.0], 1.0).unwrap();
    let e1 = DVector::from_vec(vec![1.0]);
    assert_eq!(rkhs_inner(&one, &e1, &e1).unwrap(), 1.0);
    let two = GroundSpace::line(&[0.0, 1.0], 1.0).unwrap();
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 1.0]);
    assert_abs_diff_eq!(rkhs_inner(&two, &u, &v).unwrap(), 1.0 / E, epsilon = 1e-16);
    let b = DVector::from_vec(vec![0.3, -0.3]);
    assert_abs_diff_eq!(
        rkhs_inner(&two, &b, &b).unwrap(),
        mmd_sq(&two, &b).unwrap(),
        epsilon = 1e-16
    );
}

#[test]
fn kernel_values_are_gram_products() {
    let s = GroundSpace::line(&[0.0, 1.0, 3.0], 2.0).unwrap();
    let w = SignedVector::new(s.clone(), vec![1.0, -2.0, 0.5]).unwrap();
    let k = w.kernel_values();
    for i in 0..3 {
        let x = s.points()[i][0];
        let expect: f64 = [(0.0, 1.0), (1.0, -2.0), (3.0, 0.5)]
            .iter()
            .map(|(y, a)| a * (-(x - y) * (x - y) / 2.0).exp())
            .sum();
        assert_abs_diff_eq!(k[i], expect, epsilon = 1e-14);
    }
}

#[test]
fn mean_of_measure() {
    let s = GroundSpace::sqeuclidean(vec![vec![0.0, 0.0], vec![2.0, 4.0]], 1.0).unwrap();
    let m = Measure::new(s, vec![0.75, 0.25]).unwrap();
    assert_eq!(m.mean().unwrap(), vec![0.5, 1.0]);
}

#[test]
fn explicit_cost_reports_gram_sign() {
    // Cost of an ultrametric tree: exp(-c) is positive definite.
    let c = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
    let s = GroundSpace::from_cost(c, 1.0).unwrap();
    assert!(s.gram_is_psd());
    assert!(!s.is_sqeuclidean());
    // Equal-cost pair with zero cost off the diagonal gives a singular Gram matrix.
    let c = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]);
    let s = GroundSpace::from_cost(c, 1.0).unwrap();
    assert_abs_diff_eq!(s.gram_min_eigenvalue(), 0.0, epsilon = 1e-14);
}
