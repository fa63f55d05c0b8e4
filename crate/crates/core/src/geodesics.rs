//! Discrete paths, path energies, the chain-of-divergences geodesic solver,
//! distance bounds and Schrödinger bridge marginals.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sinkhorn::{cloud_divergence, divergence, plan, same_space, solve_potentials, Cloud, SolverOptions};
use crate::space::{sq_dist, GroundSpace, Measure, TangentVector};
use crate::tensor::{map_a, norm_equivalence_constant, self_transport};

/// Measures on one ground space at uniform times `k / N`.
#[derive(Debug, Clone)]
pub struct Path {
    space: Arc<GroundSpace>,
    steps: Vec<Measure>,
}

impl Path {
    pub fn new(steps: Vec<Measure>) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least two steps".into()));
        }
        let space = steps[0].space().clone();
        for s in &steps[1..] {
            same_space(&space, s.space())?;
        }
        Ok(Self { space, steps })
    }

    /// `(1 - t) mu0 + t mu1` at `t = k / n`.
    pub fn linear(mu0: &Measure, mu1: &Measure, n: usize) -> Result<Self> {
        same_space(mu0.space(), mu1.space())?;
        let steps = (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                let w = mu0.weights() * (1.0 - t) + mu1.weights() * t;
                Measure::normalized(mu0.space().clone(), w.iter().cloned().collect(), 1e-9)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(steps)
    }

    pub fn space(&self) -> &Arc<GroundSpace> {
        &self.space
    }

    pub fn steps(&self) -> &[Measure] {
        &self.steps
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.intervals() as f64;
        (0..self.steps.len()).map(|k| k as f64 / n).collect()
    }

    pub fn reversed(&self) -> Self {
        let mut steps = self.steps.clone();
        steps.reverse();
        Self {
            space: self.space.clone(),
            steps,
        }
    }
}

/// Energy `int g_{mu_t}(mu_dot, mu_dot) dt` by the midpoint rule: on each
/// interval the tangent `N (w_{k+1} - w_k)` is measured at `(w_k + w_{k+1}) / 2`.
pub fn path_energy(path: &Path, opts: &SolverOptions) -> Result<f64> {
    let n = path.intervals() as f64;
    let mut total = 0.0;
    for pair in path.steps.windows(2) {
        let (w0, w1) = (pair[0].weights(), pair[1].weights());
        if w0 == w1 {
            continue;
        }
        let mid = Measure::normalized(path.space.clone(), ((w0 + w1) * 0.5).iter().cloned().collect(), 1e-9)?;
        let diff: Vec<f64> = (w1 - w0).iter().map(|d| d * n).collect();
        let b = TangentVector::balanced(path.space.clone(), diff)?;
        let st = self_transport(&mid, opts)?;
        total += st.metric_tensor(&b)? / n;
    }
    Ok(total)
}

/// `N sum_k S_eps(rho_k, rho_{k+1})`.
pub fn chain_objective(path: &Path, opts: &SolverOptions) -> Result<f64> {
    let n = path.intervals() as f64;
    let mut total = 0.0;
    for pair in path.steps.windows(2) {
        if pair[0].weights() != pair[1].weights() {
            total += n * divergence(&pair[0], &pair[1], opts)?.value;
        }
    }
    Ok(total)
}

/// Starting path for the descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Linear interpolation of weights.
    Linear,
    /// Great-circle interpolation of `A(mu)` on the unit sphere of the RKHS.
    ArcBeta,
    /// Mass of each plan entry deposited at the point nearest to
    /// `(1 - t) x_i + t y_j`; needs coordinates.
    Displacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicOptions {
    /// Number of intervals `N`.
    pub steps: usize,
    pub init: Init,
    pub max_iter: usize,
    /// Relative decrease of the chain value over `window` iterations that
    /// counts as converged.
    pub rel_tol: f64,
    pub window: usize,
    /// Lower bound on initial weights before renormalization.
    pub floor: f64,
    pub sinkhorn: SolverOptions,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            steps: 16,
            init: Init::Linear,
            max_iter: 5000,
            rel_tol: 1e-9,
            window: 10,
            floor: 1e-12,
            sinkhorn: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicResult {
    pub path: Path,
    /// Midpoint-rule metric energy of the final path.
    pub energy: f64,
    pub chain_value: f64,
    pub ds_estimate: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Chain value after every accepted step, starting with the initial path.
    pub history: Vec<f64>,
    /// Energy and chain value differ by more than 5%.
    pub discrepancy: bool,
}

fn floored(space: &Arc<GroundSpace>, w: &DVector<f64>, floor: f64) -> Result<Measure> {
    let v: Vec<f64> = w.iter().map(|x| x.max(floor)).collect();
    let total: f64 = v.iter().sum();
    Measure::normalized(space.clone(), v.iter().map(|x| x / total).collect(), 1e-9)
}

fn initial_path(mu0: &Measure, mu1: &Measure, o: &GeodesicOptions) -> Result<Vec<Measure>> {
    let space = mu0.space();
    let n = o.steps;
    let mut steps = Vec::with_capacity(n + 1);
    steps.push(mu0.clone());
    match o.init {
        Init::Linear => {
            for k in 1..n {
                let t = k as f64 / n as f64;
                let w = mu0.weights() * (1.0 - t) + mu1.weights() * t;
                steps.push(floored(space, &w, o.floor)?);
            }
        }
        Init::ArcBeta => {
            let g = space.gibbs();
            let a0 = map_a(&self_transport(mu0, &o.sinkhorn)?).weights().clone();
            let a1 = map_a(&self_transport(mu1, &o.sinkhorn)?).weights().clone();
            let theta = a0.dot(&(g * &a1)).clamp(-1.0, 1.0).acos();
            for k in 1..n {
                let t = k as f64 / n as f64;
                let alpha = if theta < 1e-12 {
                    &a0 * (1.0 - t) + &a1 * t
                } else {
                    (&a0 * ((1.0 - t) * theta).sin() + &a1 * (t * theta).sin()) / theta.sin()
                };
                let w = alpha.component_mul(&(g * &alpha));
                steps.push(floored(space, &w, o.floor)?);
            }
        }
        Init::Displacement => {
            let pts = space.points();
            if pts.is_empty() {
                return Err(Error::NotSqEuclidean);
            }
            let pot = solve_potentials(mu0, mu1, &o.sinkhorn)?;
            let pi = plan(mu0, mu1, &pot)?.matrix;
            for k in 1..n {
                let t = k as f64 / n as f64;
                let mut w = DVector::zeros(space.len());
                for i in 0..space.len() {
                    for j in 0..space.len() {
                        let m = pi[(i, j)];
                        if m == 0.0 {
                            continue;
                        }
                        let z: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| (1.0 - t) * a + t * b).collect();
                        let near = (0..pts.len())
                            .min_by(|&p, &q| sq_dist(&pts[p], &z).total_cmp(&sq_dist(&pts[q], &z)))
                            .expect("nonempty space");
                        w[near] += m;
                    }
                }
                steps.push(floored(space, &w, o.floor)?);
            }
        }
    }
    steps.push(mu1.clone());
    Ok(steps)
}

/// Chain value and its gradient with respect to each step's weights.
fn chain_with_gradient(steps: &[Measure], opts: &SolverOptions) -> Result<(f64, Vec<DVector<f64>>)> {
    let n = (steps.len() - 1) as f64;
    let mut grads: Vec<DVector<f64>> = steps.iter().map(|s| DVector::zeros(s.weights().len())).collect();
    let mut total = 0.0;
    for k in 0..steps.len() - 1 {
        if steps[k].weights() == steps[k + 1].weights() {
            continue;
        }
        let d = divergence(&steps[k], &steps[k + 1], opts)?;
        total += n * d.value;
        grads[k] += d.grad_mu() * n;
        grads[k + 1] += d.grad_nu() * n;
    }
    Ok((total, grads))
}

/// Entropic mirror step `w <- w exp(-eta grad)`, renormalized.
fn mirror_step(mu: &Measure, grad: &DVector<f64>, eta: f64) -> Result<Measure> {
    let w = mu.weights();
    let logits: Vec<f64> = w
        .iter()
        .zip(grad.iter())
        .map(|(wi, gi)| {
            if *wi > 0.0 {
                wi.ln() - eta * gi
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let lmax = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - lmax).exp()).collect();
    let total: f64 = e.iter().sum();
    let v: Vec<f64> = e
        .iter()
        .zip(w.iter())
        .map(|(x, wi)| if *wi > 0.0 { (x / total).max(1e-300) } else { 0.0 })
        .collect();
    let total: f64 = v.iter().sum();
    Measure::normalized(mu.space().clone(), v.iter().map(|x| x / total).collect(), 1e-9)
}

fn converged_by_window(history: &[f64], o: &GeodesicOptions) -> bool {
    let len = history.len();
    if len > o.window {
        let old = history[len - 1 - o.window];
        let new = history[len - 1];
        old <= 0.0 || (old - new) / old < o.rel_tol
    } else {
        false
    }
}

/// Minimizes the chain objective over interior steps with backtracking
/// entropic mirror descent, then reports the metric energy and bounds.
pub fn solve_geodesic(mu0: &Measure, mu1: &Measure, o: &GeodesicOptions) -> Result<GeodesicResult> {
    same_space(mu0.space(), mu1.space())?;
    if o.steps < 2 {
        return Err(Error::InvalidArgument("need at least two intervals".into()));
    }
    let mut steps = initial_path(mu0, mu1, o)?;
    let (mut value, mut grads) = chain_with_gradient(&steps, &o.sinkhorn)?;
    let mut history = vec![value];
    let mut eta = 1.0;
    let mut iterations = 0;
    let mut converged = value == 0.0;
    while !converged && iterations < o.max_iter {
        iterations += 1;
        let mut accepted = None;
        while eta > 1e-16 {
            let trial: Vec<Measure> = steps
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    if k == 0 || k == steps.len() - 1 {
                        Ok(s.clone())
                    } else {
                        mirror_step(s, &grads[k], eta)
                    }
                })
                .collect::<Result<_>>()?;
            // Armijo test against the first-order prediction.
            let predicted: f64 = (1..steps.len() - 1)
                .map(|k| grads[k].dot(&(steps[k].weights() - trial[k].weights())))
                .sum();
            let (v, g) = chain_with_gradient(&trial, &o.sinkhorn)?;
            if v < value && value - v >= 1e-4 * predicted {
                accepted = Some((trial, v, g));
                break;
            }
            eta *= 0.5;
        }
        match accepted {
            Some((trial, v, g)) => {
                steps = trial;
                value = v;
                grads = g;
                history.push(value);
                eta = (2.0 * eta).min(1e6);
                converged = converged_by_window(&history, o);
            }
            None => converged = true,
        }
    }
    let path = Path::new(steps)?;
    let energy = path_energy(&path, &o.sinkhorn)?;
    let (lower_bound, upper_bound) = ds_bounds(mu0, mu1, &o.sinkhorn)?;
    let scale = value.abs().max(energy.abs());
    Ok(GeodesicResult {
        energy,
        chain_value: value,
        ds_estimate: value.max(0.0).sqrt(),
        lower_bound,
        upper_bound,
        iterations,
        converged,
        history,
        discrepancy: scale > 0.0 && (energy - value).abs() > 0.05 * scale,
        path,
    })
}

/// `sqrt(eps/2) |beta0 - beta1| <= d_S <= (pi/2) sqrt(eps C / 2) |beta0 - beta1|`.
pub fn ds_bounds(mu0: &Measure, mu1: &Measure, opts: &SolverOptions) -> Result<(f64, f64)> {
    same_space(mu0.space(), mu1.space())?;
    let norm = beta_distance(mu0, mu1, opts)?;
    let space = mu0.space();
    let eps = space.epsilon();
    let c = norm_equivalence_constant(space);
    Ok((
        (0.5 * eps).sqrt() * norm,
        0.5 * std::f64::consts::PI * (0.5 * eps * c).sqrt() * norm,
    ))
}

/// `|B(mu0) - B(mu1)|` in the RKHS, via the Gram form on `A`-weights.
pub fn beta_distance(mu0: &Measure, mu1: &Measure, opts: &SolverOptions) -> Result<f64> {
    let a0 = map_a(&self_transport(mu0, opts)?);
    let a1 = map_a(&self_transport(mu1, opts)?);
    let d = a0.weights() - a1.weights();
    let sq = d.dot(&(mu0.space().gibbs() * &d));
    Ok(sq.max(0.0).sqrt())
}

/// Geodesic between weighted clouds whose atoms move; the weights stay fixed.
#[derive(Debug, Clone)]
pub struct ParticleGeodesic {
    pub clouds: Vec<Cloud>,
    pub chain_value: f64,
    pub ds_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

fn particle_chain(clouds: &[Cloud], eps: f64, opts: &SolverOptions) -> Result<(f64, Vec<Vec<Vec<f64>>>)> {
    let n = (clouds.len() - 1) as f64;
    let mut grads: Vec<Vec<Vec<f64>>> = clouds
        .iter()
        .map(|c| c.points.iter().map(|p| vec![0.0; p.len()]).collect())
        .collect();
    let mut total = 0.0;
    for k in 0..clouds.len() - 1 {
        let d = cloud_divergence(&clouds[k], &clouds[k + 1], eps, opts)?;
        total += n * d.value;
        for (g, h) in grads[k].iter_mut().zip(&d.grad_x) {
            g.iter_mut().zip(h).for_each(|(a, b)| *a += n * b);
        }
        for (g, h) in grads[k + 1].iter_mut().zip(&d.grad_y) {
            g.iter_mut().zip(h).for_each(|(a, b)| *a += n * b);
        }
    }
    Ok((total, grads))
}

/// Chain minimization over atom positions. Atom `i` of `x0` travels to
/// atom `i` of `x1`; the initial path moves atoms on straight lines.
pub fn solve_particle_geodesic(x0: &Cloud, x1: &Cloud, epsilon: f64, o: &GeodesicOptions) -> Result<ParticleGeodesic> {
    if x0.weights != x1.weights {
        return Err(Error::InvalidArgument(
            "endpoint clouds must carry equal weights".into(),
        ));
    }
    let n = o.steps;
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two intervals".into()));
    }
    let velocity: Vec<Vec<f64>> = x0
        .points
        .iter()
        .zip(&x1.points)
        .map(|(p, q)| q.iter().zip(p).map(|(a, b)| a - b).collect())
        .collect();
    let mut clouds: Vec<Cloud> = (0..=n).map(|k| x0.pushed(&velocity, k as f64 / n as f64)).collect();
    clouds[n] = x1.clone();
    let (mut value, mut grads) = particle_chain(&clouds, epsilon, &o.sinkhorn)?;
    let mut history = vec![value];
    let mut eta = 1.0 / n as f64;
    let mut iterations = 0;
    let mut converged = value == 0.0;
    while !converged && iterations < o.max_iter {
        iterations += 1;
        let gnorm: f64 = grads[1..n].iter().flatten().flatten().map(|x| x * x).sum();
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        while eta > 1e-16 {
            let trial: Vec<Cloud> = clouds
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    if k == 0 || k == n {
                        c.clone()
                    } else {
                        let v: Vec<Vec<f64>> = grads[k].iter().map(|g| g.iter().map(|x| -x).collect()).collect();
                        c.pushed(&v, eta)
                    }
                })
                .collect();
            let (v, g) = particle_chain(&trial, epsilon, &o.sinkhorn)?;
            if v < value && value - v >= 1e-4 * eta * gnorm {
                accepted = Some((trial, v, g));
                break;
            }
            eta *= 0.5;
        }
        match accepted {
            Some((trial, v, g)) => {
                clouds = trial;
                value = v;
                grads = g;
                history.push(value);
                eta *= 2.0;
                converged = converged_by_window(&history, o);
            }
            None => converged = true,
        }
    }
    Ok(ParticleGeodesic {
        clouds,
        chain_value: value,
        ds_estimate: value.max(0.0).sqrt(),
        iterations,
        converged,
        history,
    })
}

/// Density at `query` of the Schrödinger bridge marginal at time `t`: the
/// mixture of `N((1 - t) x_i + t y_j, t (1 - t) eps / 2)` over the plan.
pub fn bridge_marginal(
    mu0: &Measure,
    mu1: &Measure,
    t: f64,
    query: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let comps = bridge_components(mu0, mu1, t, opts)?;
    let space = mu0.space();
    let d = space.dim();
    let var = 0.5 * t * (1.0 - t) * space.epsilon();
    let norm = (2.0 * std::f64::consts::PI * var).powf(-0.5 * d as f64);
    Ok(query
        .iter()
        .map(|q| {
            if q.len() != d {
                return f64::NAN;
            }
            comps
                .iter()
                .map(|(w, m)| w * norm * (-sq_dist(q, m) / (2.0 * var)).exp())
                .sum()
        })
        .collect())
}

/// Mixture weights (plan entries) and centers of the bridge marginal.
pub fn bridge_components(mu0: &Measure, mu1: &Measure, t: f64, opts: &SolverOptions) -> Result<Vec<(f64, Vec<f64>)>> {
    same_space(mu0.space(), mu1.space())?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("bridge time {t} outside (0, 1)")));
    }
    let space = mu0.space();
    if !space.is_sqeuclidean() {
        return Err(Error::NotSqEuclidean);
    }
    let pts = space.points();
    let pot = solve_potentials(mu0, mu1, opts)?;
    let pi = plan(mu0, mu1, &pot)?.matrix;
    let mut out = Vec::new();
    for i in 0..space.len() {
        for j in 0..space.len() {
            let w = pi[(i, j)];
            if w > 0.0 {
                let m = pts[i].iter().zip(&pts[j]).map(|(a, b)| (1.0 - t) * a + t * b).collect();
                out.push((w, m));
            }
        }
    }
    Ok(out)
}
