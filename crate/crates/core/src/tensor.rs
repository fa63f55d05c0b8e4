//! Self-transport operators, the Hessian metric tensor and its RKHS form.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sinkhorn::{solve_potentials, SolverOptions};
use crate::space::{GroundSpace, Measure, SignedVector, TangentVector};

/// Threshold below which `1 - lambda_2` counts as a second unit eigenvalue.
const GAP_FLOOR: f64 = 1e-12;

/// Everything derived from the self-potential `f_{mu,mu}`.
///
/// `h[(i, j)] = exp((f_i + f_j - c_ij) / eps)` and `k = h diag(mu)`.
/// Spectral data lives on the support `D^{1/2} H D^{1/2} = U diag(lambda) U^T`.
#[derive(Debug, Clone)]
pub struct SelfTransport {
    mu: Measure,
    support: Vec<usize>,
    pub f: DVector<f64>,
    pub a: DVector<f64>,
    pub beta: DVector<f64>,
    pub h: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub residual: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    sqrt_mu: DVector<f64>,
}

/// Eigenvalues of the symmetrized self-transport kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    /// Sorted in decreasing order.
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    pub q_bound: f64,
}

pub fn self_transport(mu: &Measure, opts: &SolverOptions) -> Result<SelfTransport> {
    let pot = solve_potentials(mu, mu, opts)?;
    let space = mu.space();
    let eps = space.epsilon();
    let c = space.cost();
    let n = space.len();
    let f = pot.f;
    let a = f.map(|v| (v / eps).exp());
    let beta = f.map(|v| (-v / eps).exp());
    let h = DMatrix::from_fn(n, n, |i, j| ((f[i] + f[j] - c[(i, j)]) / eps).exp());
    let w = mu.weights();
    let k = DMatrix::from_fn(n, n, |i, j| h[(i, j)] * w[j]);
    let support = mu.support();
    let s = support.len();
    let sqrt_mu = DVector::from_iterator(s, support.iter().map(|&i| w[i].sqrt()));
    let m = DMatrix::from_fn(s, s, |p, q| sqrt_mu[p] * h[(support[p], support[q])] * sqrt_mu[q]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let eigenvalues = DVector::from_iterator(s, order.iter().map(|&o| eig.eigenvalues[o]));
    let mut eigenvectors = DMatrix::zeros(s, s);
    for (col, &o) in order.iter().enumerate() {
        let mut u = eig.eigenvectors.column(o).into_owned();
        if col == 0 && u.dot(&sqrt_mu) < 0.0 {
            u = -u;
        }
        eigenvectors.set_column(col, &u);
    }
    Ok(SelfTransport {
        mu: mu.clone(),
        support,
        f,
        a,
        beta,
        h,
        k,
        residual: pot.residual,
        eigenvalues,
        eigenvectors,
        sqrt_mu,
    })
}

/// Which eigenmodes a spectral function acts on.
#[derive(Clone, Copy, PartialEq)]
enum Modes {
    All,
    Quotient,
}

impl SelfTransport {
    pub fn measure(&self) -> &Measure {
        &self.mu
    }

    pub fn space(&self) -> &Arc<GroundSpace> {
        self.mu.space()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn epsilon(&self) -> f64 {
        self.space().epsilon()
    }

    /// `lambda_2`, or 0 on a single point.
    pub fn lambda2(&self) -> f64 {
        if self.eigenvalues.len() > 1 {
            self.eigenvalues[1]
        } else {
            0.0
        }
    }

    /// `x = sum_k phi(lambda_k) r_k l_k^T v` with right eigenvectors
    /// `r_k = D^{-1/2} u_k` and left eigenvectors `l_k = D^{1/2} u_k` of `K`.
    /// Only support entries of `v` are read; the result vanishes off support.
    fn spectral_apply(&self, v: &DVector<f64>, modes: Modes, phi: impl Fn(f64) -> f64) -> Result<DVector<f64>> {
        self.space().check_len(v.len())?;
        let s = self.support.len();
        if modes == Modes::Quotient && s > 1 && 1.0 - self.eigenvalues[1] < GAP_FLOOR {
            return Err(Error::SingularBeyondGauge(self.eigenvalues[1]));
        }
        let vs = DVector::from_iterator(s, self.support.iter().enumerate().map(|(p, &i)| self.sqrt_mu[p] * v[i]));
        let mut xs = DVector::zeros(s);
        let start = if modes == Modes::Quotient { 1 } else { 0 };
        for k in start..s {
            let u = self.eigenvectors.column(k);
            xs += u * (phi(self.eigenvalues[k]) * u.dot(&vs));
        }
        let mut x = DVector::zeros(v.len());
        for (p, &i) in self.support.iter().enumerate() {
            x[i] = xs[p] / self.sqrt_mu[p];
        }
        Ok(x)
    }

    /// `(I - K^2)^dagger v` on the quotient by constants, normalized to zero
    /// `mu`-mean.
    pub fn pseudo_solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.spectral_apply(v, Modes::Quotient, |l| 1.0 / (1.0 - l * l))
    }

    /// `(I - K)^{-1} v` on the quotient by constants.
    pub fn solve_i_minus_k(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.spectral_apply(v, Modes::Quotient, |l| 1.0 / (1.0 - l))
    }

    /// `(I + K)^{-1} v`, invertible on all modes.
    pub fn solve_i_plus_k(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.spectral_apply(v, Modes::All, |l| 1.0 / (1.0 + l))
    }

    /// `H b` restricted to the support.
    fn h_apply(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(b.len());
        for &i in &self.support {
            out[i] = self.support.iter().map(|&j| self.h[(i, j)] * b[j]).sum();
        }
        out
    }

    fn check_tangent(&self, b: &TangentVector) -> Result<()> {
        self.space().check_len(b.weights().len())?;
        let w = self.mu.weights();
        match b.weights().iter().enumerate().find(|(i, v)| **v != 0.0 && w[*i] <= 0.0) {
            Some((i, _)) => Err(Error::SupportViolation(i)),
            None => Ok(()),
        }
    }

    /// Time derivative of `f_{mu, mu + s b}` at `s = 0`, `-eps (I - K^2)^dagger H b`.
    pub fn potential_derivative(&self, b: &TangentVector) -> Result<DVector<f64>> {
        self.check_tangent(b)?;
        let x = self.pseudo_solve(&self.h_apply(b.weights()))?;
        Ok(x * -self.epsilon())
    }

    /// `g_mu(b, b) = (eps / 2) b^T (I - K^2)^dagger H b`.
    pub fn metric_tensor(&self, b: &TangentVector) -> Result<f64> {
        self.check_tangent(b)?;
        let x = self.pseudo_solve(&self.h_apply(b.weights()))?;
        Ok(0.5 * self.epsilon() * b.weights().dot(&x))
    }

    /// Kernel coefficients of `dB/dt` for `mu_t = mu + t b`.
    ///
    /// With `w = (I + K)^{-1} H b`, the velocity has values `w / a` on the
    /// support and coefficients `a (b - mu w)`.
    pub fn beta_dot_from_mu_dot(&self, b: &TangentVector) -> Result<SignedVector> {
        self.check_tangent(b)?;
        let w = self.solve_i_plus_k(&self.h_apply(b.weights()))?;
        let mu = self.mu.weights();
        let mut coef = DVector::zeros(w.len());
        for &i in &self.support {
            coef[i] = self.a[i] * (b.weights()[i] - mu[i] * w[i]);
        }
        Ok(SignedVector::from_dvector(self.space().clone(), coef))
    }

    /// `<beta_dot, B(mu)>` in the RKHS, for `beta_dot` given by coefficients.
    pub fn tangency(&self, beta_dot: &SignedVector) -> Result<f64> {
        self.space().check_len(beta_dot.weights().len())?;
        Ok(beta_dot.weights().dot(&self.beta))
    }

    /// `(eps / 2)(|beta_dot|^2 + 2 <a beta_dot, (I - K)^{-1} a beta_dot>_{L^2(mu)})`.
    pub fn tilde_metric_tensor(&self, beta_dot: &SignedVector) -> Result<f64> {
        let t = self.tangency(beta_dot)?;
        if t.abs() > 1e-8 {
            return Err(Error::NotTangent(t));
        }
        let vals = beta_dot.kernel_values();
        let norm_sq = beta_dot.weights().dot(&vals);
        let mut y = DVector::zeros(vals.len());
        for &i in &self.support {
            y[i] = self.a[i] * vals[i];
        }
        let z = self.solve_i_minus_k(&y)?;
        let mu = self.mu.weights();
        let cross: f64 = self.support.iter().map(|&i| mu[i] * y[i] * z[i]).sum();
        Ok(0.5 * self.epsilon() * (norm_sq + 2.0 * cross))
    }

    pub fn spectral_report(&self) -> SpectralReport {
        let eigenvalues: Vec<f64> = self.eigenvalues.iter().cloned().collect();
        let gap = 1.0 - self.lambda2();
        let q_bound = contraction_bound(self.space());
        SpectralReport {
            eigenvalues,
            gap,
            q_bound,
        }
    }

    /// Eigenvalues of `D^{1/2} H D^{1/2}` in decreasing order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }
}

/// `q = 1 - exp(-4 |c|_inf / eps)`.
pub fn contraction_bound(space: &GroundSpace) -> f64 {
    1.0 - (-4.0 * space.cost_sup() / space.epsilon()).exp()
}

/// `C = 1 + 2 exp(11 |c|_inf / (2 eps))`, the constant comparing the tilde
/// tensor with the RKHS norm.
pub fn norm_equivalence_constant(space: &GroundSpace) -> f64 {
    1.0 + 2.0 * (5.5 * space.cost_sup() / space.epsilon()).exp()
}

/// `A(mu) = exp(f / eps) mu`, the kernel coefficients of `B(mu)`.
pub fn map_a(st: &SelfTransport) -> SignedVector {
    let w = st.a.component_mul(st.measure().weights());
    SignedVector::from_dvector(st.space().clone(), w)
}

/// Values `exp(-f / eps)` of `B(mu)` at every point.
pub fn map_b(st: &SelfTransport) -> SignedVector {
    SignedVector::from_dvector(st.space().clone(), st.beta.clone())
}

/// `A^{-1}(alpha)_i = alpha_i (K_c alpha)_i`.
pub fn map_a_inverse(space: Arc<GroundSpace>, alpha: &DVector<f64>) -> Result<Measure> {
    space.check_len(alpha.len())?;
    if let Some(i) = alpha.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::NotInImage(format!("negative coefficient at {i}")));
    }
    let vals = space.gibbs() * alpha;
    let norm_sq = alpha.dot(&vals);
    if (norm_sq - 1.0).abs() > 1e-6 {
        return Err(Error::NotInImage(format!("RKHS norm squared {norm_sq}")));
    }
    let w: Vec<f64> = alpha.iter().zip(vals.iter()).map(|(a, v)| a * v).collect();
    Measure::normalized(space, w, 1e-6)
}
