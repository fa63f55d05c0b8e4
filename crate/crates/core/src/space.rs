//! Ground spaces, measures and the kernel norms built on the Gibbs kernel.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// How the cost matrix of a [`GroundSpace`] is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    /// `c(x, y) = |x - y|^2`, diagonal set to exactly zero.
    SqEuclidean,
    /// A user supplied symmetric nonnegative matrix.
    Explicit(DMatrix<f64>),
}

/// A finite metric-like space carrying a cost, a regularization and the
/// Gibbs kernel `exp(-c / epsilon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSpace {
    points: Vec<Vec<f64>>,
    cost: DMatrix<f64>,
    epsilon: f64,
    gibbs: DMatrix<f64>,
    sqeuclidean: bool,
}

impl GroundSpace {
    pub fn build(points: Vec<Vec<f64>>, cost: CostKind, epsilon: f64) -> Result<Arc<Self>> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::NonPositiveEpsilon(epsilon));
        }
        let (cost, sqeuclidean) = match cost {
            CostKind::SqEuclidean => {
                let n = points.len();
                if n == 0 {
                    return Err(Error::EmptySpace);
                }
                let d = points[0].len();
                for p in &points {
                    if p.len() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            found: p.len(),
                        });
                    }
                }
                let c = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { sq_dist(&points[i], &points[j]) });
                (c, true)
            }
            CostKind::Explicit(c) => {
                let n = c.nrows();
                if n == 0 {
                    return Err(Error::EmptySpace);
                }
                if c.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: c.ncols(),
                    });
                }
                if !points.is_empty() && points.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: points.len(),
                    });
                }
                for i in 0..n {
                    for j in 0..n {
                        if !(c[(i, j)] >= 0.0) {
                            return Err(Error::NegativeCost { i, j });
                        }
                        if c[(i, j)] != c[(j, i)] {
                            return Err(Error::NonSymmetricCost { i, j });
                        }
                    }
                }
                (c, false)
            }
        };
        let gibbs = cost.map(|c| (-c / epsilon).exp());
        Ok(Arc::new(Self {
            points,
            cost,
            epsilon,
            gibbs,
            sqeuclidean,
        }))
    }

    /// Squared Euclidean space on the given points.
    pub fn sqeuclidean(points: Vec<Vec<f64>>, epsilon: f64) -> Result<Arc<Self>> {
        Self::build(points, CostKind::SqEuclidean, epsilon)
    }

    /// Points on the real line.
    pub fn line(xs: &[f64], epsilon: f64) -> Result<Arc<Self>> {
        Self::sqeuclidean(xs.iter().map(|&x| vec![x]).collect(), epsilon)
    }

    pub fn from_cost(cost: DMatrix<f64>, epsilon: f64) -> Result<Arc<Self>> {
        Self::build(Vec::new(), CostKind::Explicit(cost), epsilon)
    }

    /// Same points and cost, different regularization.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Arc<Self>> {
        if self.sqeuclidean {
            Self::sqeuclidean(self.points.clone(), epsilon)
        } else {
            Self::build(self.points.clone(), CostKind::Explicit(self.cost.clone()), epsilon)
        }
    }

    pub fn len(&self) -> usize {
        self.cost.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cost(&self) -> &DMatrix<f64> {
        &self.cost
    }

    pub fn gibbs(&self) -> &DMatrix<f64> {
        &self.gibbs
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn is_sqeuclidean(&self) -> bool {
        self.sqeuclidean
    }

    /// Ambient dimension, zero when only a cost matrix was given.
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// `sup c` over all pairs.
    pub fn cost_sup(&self) -> f64 {
        self.cost.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Gibbs matrix. Negative values beyond
    /// roundoff mean the kernel is not positive definite.
    pub fn gram_min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(self.gibbs.clone());
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// True if the Gram eigen-check passes at the `-1e-10 n` level.
    pub fn gram_is_psd(&self) -> bool {
        self.gram_min_eigenvalue() >= -1e-10 * self.len() as f64
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Probability measure on a ground space.
#[derive(Debug, Clone)]
pub struct Measure {
    space: Arc<GroundSpace>,
    weights: DVector<f64>,
}

impl Measure {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn new(space: Arc<GroundSpace>, weights: Vec<f64>) -> Result<Self> {
        space.check_len(weights.len())?;
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "weight {} at index {i} is not a nonnegative number",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self {
            space,
            weights: DVector::from_vec(weights),
        })
    }

    /// Rescales weights whose total is within `tol` of one.
    pub fn normalized(space: Arc<GroundSpace>, weights: Vec<f64>, tol: f64) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !((total - 1.0).abs() <= tol) {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not within {tol:e} of 1"
            )));
        }
        Self::new(space, weights.iter().map(|w| w / total).collect())
    }

    pub fn dirac(space: Arc<GroundSpace>, i: usize) -> Result<Self> {
        let mut w = vec![0.0; space.len()];
        *w.get_mut(i).ok_or(Error::DimensionMismatch {
            expected: space.len(),
            found: i + 1,
        })? = 1.0;
        Self::new(space, w)
    }

    pub fn uniform(space: Arc<GroundSpace>) -> Self {
        let n = space.len();
        Self {
            weights: DVector::from_element(n, 1.0 / n as f64),
            space,
        }
    }

    pub fn space(&self) -> &Arc<GroundSpace> {
        &self.space
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Indices with strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// `sum_i w_i x_i`; needs point coordinates.
    pub fn mean(&self) -> Result<Vec<f64>> {
        let pts = self.space.points();
        if pts.is_empty() {
            return Err(Error::NotSqEuclidean);
        }
        let mut m = vec![0.0; self.space.dim()];
        for (p, w) in pts.iter().zip(self.weights.iter()) {
            for (mk, pk) in m.iter_mut().zip(p) {
                *mk += w * pk;
            }
        }
        Ok(m)
    }

    /// Same weights moved to another space of equal size.
    pub fn on_space(&self, space: Arc<GroundSpace>) -> Result<Self> {
        space.check_len(self.weights.len())?;
        Ok(Self {
            space,
            weights: self.weights.clone(),
        })
    }
}

/// Balanced signed measure, the tangent space of the probability simplex.
#[derive(Debug, Clone)]
pub struct TangentVector {
    space: Arc<GroundSpace>,
    weights: DVector<f64>,
}

impl TangentVector {
    /// Total mass must vanish within `1e-12`.
    pub fn new(space: Arc<GroundSpace>, weights: Vec<f64>) -> Result<Self> {
        space.check_len(weights.len())?;
        let total: f64 = weights.iter().sum();
        if !(total.abs() <= 1e-12) {
            return Err(Error::UnbalancedTangent(total));
        }
        Ok(Self {
            space,
            weights: DVector::from_vec(weights),
        })
    }

    /// Removes the mean so the vector becomes balanced.
    pub fn balanced(space: Arc<GroundSpace>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len() as f64;
        let m = weights.iter().sum::<f64>() / n;
        Self::new(space, weights.iter().map(|w| w - m).collect())
    }

    /// `b = nu - mu` for two measures on one space.
    pub fn between(mu: &Measure, nu: &Measure) -> Result<Self> {
        mu.space.check_len(nu.weights.len())?;
        Ok(Self {
            space: mu.space.clone(),
            weights: &nu.weights - &mu.weights,
        })
    }

    pub fn space(&self) -> &Arc<GroundSpace> {
        &self.space
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            space: self.space.clone(),
            weights: &self.weights * s,
        }
    }
}

/// Arbitrary signed vector indexed by the points of a space: kernel
/// coefficients or function values, depending on context.
#[derive(Debug, Clone)]
pub struct SignedVector {
    space: Arc<GroundSpace>,
    weights: DVector<f64>,
}

impl SignedVector {
    pub fn new(space: Arc<GroundSpace>, weights: Vec<f64>) -> Result<Self> {
        space.check_len(weights.len())?;
        Ok(Self {
            space,
            weights: DVector::from_vec(weights),
        })
    }

    pub(crate) fn from_dvector(space: Arc<GroundSpace>, weights: DVector<f64>) -> Self {
        Self { space, weights }
    }

    pub fn space(&self) -> &Arc<GroundSpace> {
        &self.space
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Pointwise values `G w` of the kernel expansion with these coefficients.
    pub fn kernel_values(&self) -> DVector<f64> {
        self.space.gibbs() * &self.weights
    }
}

/// Squared MMD norm `a^T K_c a` of a signed weight vector.
pub fn mmd_sq(space: &GroundSpace, a: &DVector<f64>) -> Result<f64> {
    rkhs_inner(space, a, a)
}

/// RKHS inner product `u^T K_c v` of two kernel expansions.
pub fn rkhs_inner(space: &GroundSpace, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    space.check_len(u.len())?;
    space.check_len(v.len())?;
    Ok(u.dot(&(space.gibbs() * v)))
}
