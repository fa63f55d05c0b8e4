//! Schrödinger potentials, entropic transport values, plans and the
//! Sinkhorn divergence.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{GroundSpace, Measure};

/// Stopping rule for the fixed-point iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on the sup-norm change of `g` between two sweeps.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Dual pair solving `f = T(g, nu)`, `g = T(f, mu)`, extended to every point
/// of the space.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    /// Index where `f` and `g` agree after gauge fixing.
    pub gauge_index: usize,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Potentials {
    /// `<mu, f> + <nu, g>`.
    pub fn dual_value(&self, mu: &Measure, nu: &Measure) -> f64 {
        mu.weights().dot(&self.f) + nu.weights().dot(&self.g)
    }
}

/// Entropic optimal coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub matrix: DMatrix<f64>,
    pub value: f64,
}

/// Log-sum-exp soft minimum over the support `src` for every target index.
fn soft_min(space: &GroundSpace, f: &DVector<f64>, src: &[usize], log_w: &[f64], targets: &[usize]) -> Vec<f64> {
    let eps = space.epsilon();
    let c = space.cost();
    let mut z = vec![0.0; src.len()];
    targets
        .iter()
        .map(|&y| {
            let mut zmax = f64::NEG_INFINITY;
            for (k, &i) in src.iter().enumerate() {
                z[k] = (f[i] - c[(i, y)]) / eps + log_w[k];
                zmax = zmax.max(z[k]);
            }
            let s: f64 = z.iter().map(|zk| (zk - zmax).exp()).sum();
            -eps * (zmax + s.ln())
        })
        .collect()
}

/// `T_eps(f, mu)(y) = -eps log sum_i exp((f_i - c(x_i, y)) / eps) mu_i`,
/// evaluated at every point. Entries of `f` off the support are ignored.
pub fn t_eps(f: &DVector<f64>, mu: &Measure) -> Result<DVector<f64>> {
    let space = mu.space();
    space.check_len(f.len())?;
    let src = mu.support();
    let log_w: Vec<f64> = src.iter().map(|&i| mu.weights()[i].ln()).collect();
    let all: Vec<usize> = (0..space.len()).collect();
    Ok(DVector::from_vec(soft_min(space, f, &src, &log_w, &all)))
}

pub(crate) fn same_space(a: &Arc<GroundSpace>, b: &Arc<GroundSpace>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "measures live on different ground spaces".into(),
        ))
    }
}

/// Solves the Schrödinger system by alternating soft-min sweeps in the
/// log domain. For `mu == nu` the symmetric averaged iteration is used so
/// that `f == g` holds exactly.
pub fn solve_potentials(mu: &Measure, nu: &Measure, opts: &SolverOptions) -> Result<Potentials> {
    same_space(mu.space(), nu.space())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if mu.weights() == nu.weights() {
        return solve_self(mu, opts);
    }
    let space = mu.space();
    let n = space.len();
    let (sm, sn) = (mu.support(), nu.support());
    let lm: Vec<f64> = sm.iter().map(|&i| mu.weights()[i].ln()).collect();
    let ln: Vec<f64> = sn.iter().map(|&i| nu.weights()[i].ln()).collect();
    let mut f = DVector::zeros(n);
    let mut g = DVector::zeros(n);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        for (&i, v) in sm.iter().zip(soft_min(space, &g, &sn, &ln, &sm)) {
            f[i] = v;
        }
        residual = 0.0;
        for (&j, v) in sn.iter().zip(soft_min(space, &f, &sm, &lm, &sn)) {
            residual = f64::max(residual, (v - g[j]).abs());
            g[j] = v;
        }
        if residual <= opts.tol {
            break;
        }
        if iterations % NEWTON_EVERY == 0 && sm.len() + sn.len() <= NEWTON_MAX_SIZE && iterations < opts.max_iter {
            // Well-separated clusters leave a mass-transfer mode that plain sweeps
            // contract at rate 1 - O(exp(-c / eps)). A Newton step removes it;
            // it is kept only if the sweep that follows lowers the residual.
            if let Some(gn) = newton_g(space, &f, &g, &sm, &sn, &lm, &ln) {
                iterations += 1;
                let ft = soft_min(space, &gn, &sn, &ln, &sm);
                let mut ftf = f.clone();
                for (&i, v) in sm.iter().zip(ft) {
                    ftf[i] = v;
                }
                let gt = soft_min(space, &ftf, &sm, &lm, &sn);
                let rt = sn.iter().zip(&gt).fold(0.0, |r: f64, (&j, v)| r.max((v - gn[j]).abs()));
                if rt < residual {
                    f = ftf;
                    for (&j, v) in sn.iter().zip(gt) {
                        g[j] = v;
                    }
                    residual = rt;
                    if residual <= opts.tol {
                        break;
                    }
                }
            }
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let f_full = DVector::from_vec(soft_min(space, &g, &sn, &ln, &all));
    let g_full = DVector::from_vec(soft_min(space, &f, &sm, &lm, &all));
    let lambda = 0.5 * (g_full[0] - f_full[0]);
    let pot = Potentials {
        f: f_full.add_scalar(lambda),
        g: g_full.add_scalar(-lambda),
        gauge_index: 0,
        residual,
        iterations,
        converged: residual <= opts.tol,
    };
    finish(pot)
}

const NEWTON_EVERY: usize = 25;
const NEWTON_MAX_SIZE: usize = 400;

/// One Newton step on `f = S(g)`, `g = S(f)` restricted to the supports,
/// returning the updated `g`. The Jacobian `[[I, P], [Q, I]]` has the gauge
/// direction `(1, -1)` in its kernel, which the extra row pins.
fn newton_g(
    space: &GroundSpace,
    f: &DVector<f64>,
    g: &DVector<f64>,
    sm: &[usize],
    sn: &[usize],
    lm: &[f64],
    ln: &[f64],
) -> Option<DVector<f64>> {
    let (p, q) = (sm.len(), sn.len());
    let eps = space.epsilon();
    let c = space.cost();
    let sf = soft_min(space, g, sn, ln, sm);
    let sg = soft_min(space, f, sm, lm, sn);
    let mut jac = DMatrix::zeros(p + q + 1, p + q);
    let mut rhs = DVector::zeros(p + q + 1);
    for (a, &i) in sm.iter().enumerate() {
        jac[(a, a)] = 1.0;
        rhs[a] = sf[a] - f[i];
        for (b, &j) in sn.iter().enumerate() {
            // row-stochastic weights of the soft-min defining f_i
            jac[(a, p + b)] = ((g[j] - c[(i, j)] + sf[a]) / eps + ln[b]).exp();
        }
    }
    for (b, &j) in sn.iter().enumerate() {
        jac[(p + b, p + b)] = 1.0;
        rhs[p + b] = sg[b] - g[j];
        for (a, &i) in sm.iter().enumerate() {
            jac[(p + b, a)] = ((f[i] - c[(i, j)] + sg[b]) / eps + lm[a]).exp();
        }
    }
    for a in 0..p {
        jac[(p + q, a)] = 1.0;
    }
    for b in 0..q {
        jac[(p + q, p + b)] = -1.0;
    }
    let delta = jac.svd(true, true).solve(&rhs, 1e-13).ok()?;
    if !delta.iter().all(|d| d.is_finite()) {
        return None;
    }
    let mut out = g.clone();
    for (b, &j) in sn.iter().enumerate() {
        out[j] += delta[p + b];
    }
    Some(out)
}

fn solve_self(mu: &Measure, opts: &SolverOptions) -> Result<Potentials> {
    let space = mu.space();
    let n = space.len();
    let s = mu.support();
    let lw: Vec<f64> = s.iter().map(|&i| mu.weights()[i].ln()).collect();
    let mut f = DVector::zeros(n);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let t = soft_min(space, &f, &s, &lw, &s);
        residual = 0.0;
        for (&i, v) in s.iter().zip(t) {
            residual = f64::max(residual, (v - f[i]).abs());
            f[i] = 0.5 * (f[i] + v);
        }
        if residual <= opts.tol {
            break;
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let f_full = DVector::from_vec(soft_min(space, &f, &s, &lw, &all));
    let pot = Potentials {
        g: f_full.clone(),
        f: f_full,
        gauge_index: 0,
        residual,
        iterations,
        converged: residual <= opts.tol,
    };
    finish(pot)
}

fn finish(pot: Potentials) -> Result<Potentials> {
    if pot.converged {
        Ok(pot)
    } else {
        Err(Error::MaxIterationsExceeded {
            iterations: pot.iterations,
            residual: pot.residual,
            best: Box::new(pot),
        })
    }
}

/// `OT_eps(mu, nu)` together with the potentials it was read from.
pub fn ot_eps_with_potentials(mu: &Measure, nu: &Measure, opts: &SolverOptions) -> Result<(f64, Potentials)> {
    let p = solve_potentials(mu, nu, opts)?;
    Ok((p.dual_value(mu, nu), p))
}

pub fn ot_eps(mu: &Measure, nu: &Measure, opts: &SolverOptions) -> Result<f64> {
    ot_eps_with_potentials(mu, nu, opts).map(|(v, _)| v)
}

/// `pi = exp((f + g - c) / eps) mu (x) nu`.
pub fn plan(mu: &Measure, nu: &Measure, pot: &Potentials) -> Result<Coupling> {
    same_space(mu.space(), nu.space())?;
    if !pot.converged {
        return Err(Error::NotConverged);
    }
    let space = mu.space();
    let eps = space.epsilon();
    let c = space.cost();
    let (a, b) = (mu.weights(), nu.weights());
    let n = space.len();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if a[i] > 0.0 && b[j] > 0.0 {
            ((pot.f[i] + pot.g[j] - c[(i, j)]) / eps).exp() * a[i] * b[j]
        } else {
            0.0
        }
    });
    Ok(Coupling {
        matrix,
        value: pot.dual_value(mu, nu),
    })
}

/// The three transport problems behind one Sinkhorn divergence.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub value: f64,
    pub cross: Potentials,
    pub self_mu: Potentials,
    pub self_nu: Potentials,
}

impl Divergence {
    pub fn iterations(&self) -> usize {
        self.cross.iterations + self.self_mu.iterations + self.self_nu.iterations
    }

    pub fn residual(&self) -> f64 {
        self.cross
            .residual
            .max(self.self_mu.residual)
            .max(self.self_nu.residual)
    }

    /// First variation in the first argument, `f_{mu,nu} - f_{mu,mu}`.
    pub fn grad_mu(&self) -> DVector<f64> {
        &self.cross.f - &self.self_mu.f
    }

    /// First variation in the second argument, `g_{mu,nu} - f_{nu,nu}`.
    pub fn grad_nu(&self) -> DVector<f64> {
        &self.cross.g - &self.self_nu.f
    }
}

pub fn divergence(mu: &Measure, nu: &Measure, opts: &SolverOptions) -> Result<Divergence> {
    let cross = solve_potentials(mu, nu, opts)?;
    let self_mu = solve_potentials(mu, mu, opts)?;
    let self_nu = solve_potentials(nu, nu, opts)?;
    let value = cross.dual_value(mu, nu) - 0.5 * self_mu.dual_value(mu, mu) - 0.5 * self_nu.dual_value(nu, nu);
    Ok(Divergence {
        value,
        cross,
        self_mu,
        self_nu,
    })
}

/// `S_eps(mu, nu) = OT(mu, nu) - OT(mu, mu) / 2 - OT(nu, nu) / 2`.
pub fn sinkhorn_divergence(mu: &Measure, nu: &Measure, opts: &SolverOptions) -> Result<f64> {
    divergence(mu, nu, opts).map(|d| d.value)
}

/// Gradient of `mu -> S_eps(mu, nu)`: pairing with a balanced `b` gives the
/// directional derivative.
pub fn grad_s_eps(mu: &Measure, nu: &Measure, opts: &SolverOptions) -> Result<DVector<f64>> {
    divergence(mu, nu, opts).map(|d| d.grad_mu())
}

/// Weighted point cloud in R^d, used when atoms move instead of weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Cloud {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        Ok(Self { points, weights })
    }

    pub fn dirac(x: Vec<f64>) -> Self {
        Self {
            points: vec![x],
            weights: vec![1.0],
        }
    }

    /// `(id + t v)_# self`.
    pub fn pushed(&self, v: &[Vec<f64>], t: f64) -> Self {
        let points = self
            .points
            .iter()
            .zip(v)
            .map(|(p, vi)| p.iter().zip(vi).map(|(a, b)| a + t * b).collect())
            .collect();
        Self {
            points,
            weights: self.weights.clone(),
        }
    }

    pub fn measure(&self, epsilon: f64) -> Result<Measure> {
        let space = GroundSpace::sqeuclidean(self.points.clone(), epsilon)?;
        Measure::normalized(space, self.weights.clone(), 1e-12)
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.points.first().map_or(0, Vec::len);
        let mut m = vec![0.0; d];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (mk, pk) in m.iter_mut().zip(p) {
                *mk += w * pk;
            }
        }
        m
    }
}

/// Sinkhorn divergence between two clouds with gradients in the point
/// positions.
#[derive(Debug, Clone)]
pub struct CloudDivergence {
    pub value: f64,
    pub grad_x: Vec<Vec<f64>>,
    pub grad_y: Vec<Vec<f64>>,
}

/// Joint measures of `x` and `y` on the union of their points.
pub fn joint_measures(x: &Cloud, y: &Cloud, epsilon: f64) -> Result<(Measure, Measure)> {
    let (n, m) = (x.points.len(), y.points.len());
    let mut pts = x.points.clone();
    pts.extend(y.points.iter().cloned());
    let space = GroundSpace::sqeuclidean(pts, epsilon)?;
    let mut a = x.weights.clone();
    a.extend(std::iter::repeat_n(0.0, m));
    let mut b = vec![0.0; n];
    b.extend(y.weights.iter().cloned());
    Ok((
        Measure::normalized(space.clone(), a, 1e-12)?,
        Measure::normalized(space, b, 1e-12)?,
    ))
}

fn plan_force(pi: &DMatrix<f64>, from: &[Vec<f64>], to: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    from.iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut gr = vec![0.0; xi.len()];
            for (j, yj) in to.iter().enumerate() {
                let w = pi[(i, j)];
                if w != 0.0 {
                    for (k, gk) in gr.iter_mut().enumerate() {
                        *gk += scale * w * 2.0 * (xi[k] - yj[k]);
                    }
                }
            }
            gr
        })
        .collect()
}

/// Value and position gradients of `S_eps` between two clouds, from the
/// envelope theorem applied to each transport problem.
pub fn cloud_divergence(x: &Cloud, y: &Cloud, epsilon: f64, opts: &SolverOptions) -> Result<CloudDivergence> {
    let n = x.points.len();
    let (mu, nu) = joint_measures(x, y, epsilon)?;
    let cross = solve_potentials(&mu, &nu, opts)?;
    let pi = plan(&mu, &nu, &cross)?.matrix;
    let pi_xy = pi.view((0, n), (n, y.points.len())).into_owned();
    let mx = x.measure(epsilon)?;
    let my = y.measure(epsilon)?;
    let px = solve_potentials(&mx, &mx, opts)?;
    let py = solve_potentials(&my, &my, opts)?;
    let pi_xx = plan(&mx, &mx, &px)?.matrix;
    let pi_yy = plan(&my, &my, &py)?.matrix;
    let value = cross.dual_value(&mu, &nu) - 0.5 * px.dual_value(&mx, &mx) - 0.5 * py.dual_value(&my, &my);
    let mut grad_x = plan_force(&pi_xy, &x.points, &y.points, 1.0);
    for (g, h) in grad_x.iter_mut().zip(plan_force(&pi_xx, &x.points, &x.points, -1.0)) {
        g.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let mut grad_y = plan_force(&pi_xy.transpose(), &y.points, &x.points, 1.0);
    for (g, h) in grad_y.iter_mut().zip(plan_force(&pi_yy, &y.points, &y.points, -1.0)) {
        g.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    Ok(CloudDivergence { value, grad_x, grad_y })
}
