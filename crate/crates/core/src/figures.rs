//! Data tables behind the standard plots: Gaussian geodesics, the triangle
//! gap of symmetric Dirac pairs, nonconvexity curves and the two-point space.

use rayon::prelude::*;

use crate::closed_forms::*;
use crate::error::Result;
use crate::fd::horizontal_hessian;
use crate::sinkhorn::{plan, solve_potentials, Cloud, SolverOptions};
use crate::space::{GroundSpace, Measure, TangentVector};
use crate::tensor::self_transport;

/// A named numeric table with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, params: Vec<(&str, String)>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            params: params.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV with a `#` line of parameters, a column header, and values
    /// printed with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("# {} {}\n", self.name, params.join(" ")));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format_f64(*x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn discretized(xs: &[f64], space: &std::sync::Arc<GroundSpace>, v: f64) -> Result<Measure> {
    let w: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * v)).exp()).collect();
    let s: f64 = w.iter().sum();
    Measure::new(space.clone(), w.iter().map(|x| x / s).collect())
}

/// Variances of the bridge marginals at times `ts` between two discretized
/// centered Gaussians. The plan is solved once and reused for every `t`.
pub fn bridge_variances(v0: f64, v1: f64, ts: &[f64], eps: f64, opts: &SolverOptions) -> Result<Vec<f64>> {
    let half = 6.0 * v0.max(v1).sqrt();
    let xs = linspace(-half, half, 400);
    let space = GroundSpace::line(&xs, eps)?;
    let a = discretized(&xs, &space, v0)?;
    let b = discretized(&xs, &space, v1)?;
    let pi = plan(&a, &b, &solve_potentials(&a, &b, opts)?)?.matrix;
    Ok(ts
        .iter()
        .map(|&t| {
            let (mut m1, mut m2) = (0.0, 0.0);
            for (i, x) in xs.iter().enumerate() {
                for (j, y) in xs.iter().enumerate() {
                    let z = (1.0 - t) * x + t * y;
                    m1 += pi[(i, j)] * z;
                    m2 += pi[(i, j)] * z * z;
                }
            }
            m2 - m1 * m1 + 0.5 * t * (1.0 - t) * eps
        })
        .collect())
}

/// Variance curves `t -> v_t` for the Sinkhorn geodesic, the Wasserstein
/// geodesic and the Schrödinger bridge between centered Gaussians.
pub fn gaussians(eps: f64, pairs: &[(f64, f64)], samples: usize) -> Result<Table> {
    let mut table = Table::new(
        "gaussians",
        vec![("eps", format_f64(eps)), ("samples", samples.to_string())],
        &["v0", "v1", "t", "sinkhorn_vt", "wasserstein_vt", "bridge_vt", "d_hat"],
    );
    let opts = SolverOptions::with_tol(1e-11);
    for &(v0, v1) in pairs {
        let ts = linspace(0.0, 1.0, samples);
        let bridge = bridge_variances(v0, v1, &ts, eps, &opts)?;
        let rows: Vec<Result<Vec<f64>>> = ts
            .par_iter()
            .zip(bridge.par_iter())
            .map(|(&t, &br)| {
                let (vt, d) = gaussian_geodesic(v0, v1, t, eps)?;
                Ok(vec![v0, v1, t, vt, wasserstein_gaussian_variance(v0, v1, t), br, d])
            })
            .collect();
        for r in rows {
            table.rows.push(r?);
        }
    }
    Ok(table)
}

/// Gap `(sqrt S(mu_s, mu_r) - sqrt S(mu_s, mu_m) - sqrt S(mu_m, mu_r)) / sqrt eps`
/// with intermediate `m = sqrt eps`, over `s, r in [0, max sqrt eps]`.
pub fn triangle_heatmap(eps: f64, max: f64, cells: usize) -> Table {
    let mut table = Table::new(
        "triangle_heatmap",
        vec![
            ("eps", format_f64(eps)),
            ("intermediate", format_f64(eps.sqrt())),
            ("max", format_f64(max)),
            ("cells", cells.to_string()),
        ],
        &["s", "r", "gap"],
    );
    let grid = linspace(0.0, max * eps.sqrt(), cells);
    let m = eps.sqrt();
    for &s in &grid {
        for &r in &grid {
            table.rows.push(vec![s, r, two_dirac_triangle_gap(s, m, r, eps)]);
        }
    }
    table
}

/// Gap for `s = 0` and intermediate `t in [0, r]`, for several `r`.
pub fn triangle_lineplot(eps: f64, radii: &[f64], samples: usize) -> Table {
    let mut table = Table::new(
        "triangle_lineplot",
        vec![("eps", format_f64(eps)), ("s", "0".into())],
        &["r", "t", "gap"],
    );
    for &r in radii {
        let r = r * eps.sqrt();
        for t in linspace(0.0, r, samples) {
            table.rows.push(vec![r, t, two_dirac_triangle_gap(0.0, t, r, eps)]);
        }
    }
    table
}

/// Tensor of `m delta_{-r} + (1 - m) delta_r` with the atoms moving apart
/// at unit speed, from the FD Hessian, for each `eps` and `m`.
pub fn nonconvexity_mass(eps_list: &[f64], r: f64, samples: usize) -> Result<Table> {
    let mut table = Table::new(
        "nonconvexity_mass",
        vec![("r", format_f64(r)), ("samples", samples.to_string())],
        &["eps", "m", "g"],
    );
    let opts = SolverOptions::with_tol(1e-13);
    for &eps in eps_list {
        let ms: Vec<f64> = (1..samples + 1).map(|k| k as f64 / (samples + 1) as f64).collect();
        let rows: Vec<Result<Vec<f64>>> = ms
            .par_iter()
            .map(|&m| {
                let c = Cloud::new(vec![vec![-r], vec![r]], vec![m, 1.0 - m])?;
                let v = vec![vec![-1.0], vec![1.0]];
                let g = horizontal_hessian(&c, &v, eps, 1e-2 * r.max(1e-3), &opts)?;
                Ok(vec![eps, m, g])
            })
            .collect();
        for row in rows {
            table.rows.push(row?);
        }
    }
    Ok(table)
}

/// Closed-form tensor of `mu_r` against `r / sqrt eps`.
pub fn nonconvexity_radius(eps: f64, max: f64, samples: usize) -> Table {
    let mut table = Table::new(
        "nonconvexity_radius",
        vec![
            ("eps", format_f64(eps)),
            ("m", "0.5".into()),
            ("threshold", format_f64(nonconvexity_threshold(eps) / eps.sqrt())),
        ],
        &["r_over_sqrt_eps", "g"],
    );
    for x in linspace(0.0, max, samples) {
        table.rows.push(vec![x, nonconvexity_value(x * eps.sqrt(), eps)]);
    }
    table
}

/// Closed-form and generic tensor on the two-point space.
pub fn two_point(eps: f64, radii: &[f64], samples: usize) -> Result<Table> {
    let mut table = Table::new(
        "twopoint",
        vec![("eps", format_f64(eps)), ("m_dot", "1".into())],
        &["r", "m", "p", "lambda2", "g", "g_generic"],
    );
    let opts = SolverOptions::with_tol(1e-13);
    for &r in radii {
        let r = r * eps.sqrt();
        let space = GroundSpace::line(&[0.0, r], eps)?;
        let b = TangentVector::new(space.clone(), vec![1.0, -1.0])?;
        for k in 1..=samples {
            let m = k as f64 / (samples + 1) as f64;
            let st = TwoPointState::new(r, m, eps)?;
            let mu = Measure::new(space.clone(), vec![m, 1.0 - m])?;
            let generic = self_transport(&mu, &opts)?.metric_tensor(&b)?;
            table
                .rows
                .push(vec![r, m, st.p, st.lambda2, two_point_tensor(&st, 1.0), generic]);
        }
    }
    Ok(table)
}
