//! JSON formats for spaces, measures and tangents.
//!
//! ```json
//! {"points": [[0.0], [1.0]], "cost": "sqeuclidean", "epsilon": 1.0}
//! {"points": [[0.0], [1.0]], "weights": [0.25, 0.75]}
//! ```

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{CostKind, GroundSpace, Measure, TangentVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub cost: CostSpec,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SpaceFile {
    pub fn build(&self) -> Result<Arc<GroundSpace>> {
        let kind = match &self.cost {
            CostSpec::Named(name) if name == "sqeuclidean" => CostKind::SqEuclidean,
            CostSpec::Named(name) => return Err(Error::InvalidArgument(format!("unknown cost '{name}'"))),
            CostSpec::Matrix(rows) => {
                let n = rows.len();
                if let Some(r) = rows.iter().find(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: r.len(),
                    });
                }
                CostKind::Explicit(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        };
        GroundSpace::build(self.points.clone(), kind, self.epsilon)
    }

    pub fn from_space(space: &GroundSpace) -> Self {
        let cost = if space.is_sqeuclidean() {
            CostSpec::Named("sqeuclidean".into())
        } else {
            let c = space.cost();
            CostSpec::Matrix((0..c.nrows()).map(|i| c.row(i).iter().cloned().collect()).collect())
        };
        Self {
            points: space.points().to_vec(),
            cost,
            epsilon: space.epsilon(),
        }
    }
}

impl WeightsFile {
    /// Weights laid out on the points of `space`. Points listed in the file
    /// are matched to space points within `1e-12`; without points the
    /// weights are taken in space order.
    pub fn dense_weights(&self, space: &GroundSpace) -> Result<Vec<f64>> {
        if self.points.is_empty() {
            space.check_len(self.weights.len())?;
            return Ok(self.weights.clone());
        }
        if self.points.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                found: self.weights.len(),
            });
        }
        let mut w = vec![0.0; space.len()];
        for (p, wi) in self.points.iter().zip(&self.weights) {
            let idx = space
                .points()
                .iter()
                .position(|q| q.len() == p.len() && q.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-12))
                .ok_or_else(|| Error::InvalidMeasure(format!("point {p:?} is not in the space")))?;
            w[idx] += wi;
        }
        Ok(w)
    }

    pub fn measure(&self, space: Arc<GroundSpace>) -> Result<Measure> {
        let w = self.dense_weights(&space)?;
        Measure::normalized(space, w, 1e-6)
    }

    /// Total mass within `1e-9` of zero is accepted; the residue is taken
    /// off the largest entry so the support is unchanged.
    pub fn tangent(&self, space: Arc<GroundSpace>) -> Result<TangentVector> {
        let mut w = self.dense_weights(&space)?;
        let total: f64 = w.iter().sum();
        if total.abs() > 1e-9 {
            return Err(Error::UnbalancedTangent(total));
        }
        if let Some(i) = (0..w.len()).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())) {
            w[i] -= total;
        }
        TangentVector::new(space, w)
    }

    pub fn from_measure(mu: &Measure) -> Self {
        Self {
            points: mu.space().points().to_vec(),
            weights: mu.weights().iter().cloned().collect(),
        }
    }
}

pub fn parse_space(json: &str) -> Result<Arc<GroundSpace>> {
    let f: SpaceFile = serde_json::from_str(json).map_err(|e| Error::Parse(format!("space JSON: {e}")))?;
    f.build()
}

pub fn parse_measure(json: &str, space: Arc<GroundSpace>) -> Result<Measure> {
    let f: WeightsFile = serde_json::from_str(json).map_err(|e| Error::Parse(format!("measure JSON: {e}")))?;
    f.measure(space)
}

pub fn parse_tangent(json: &str, space: Arc<GroundSpace>) -> Result<TangentVector> {
    let f: WeightsFile = serde_json::from_str(json).map_err(|e| Error::Parse(format!("tangent JSON: {e}")))?;
    f.tangent(space)
}
