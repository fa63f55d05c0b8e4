//! Seeded random instances for property checks and validation suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::space::{GroundSpace, Measure, TangentVector};

/// Deterministic generator of spaces, measures and tangents.
pub struct Instances {
    rng: ChaCha8Rng,
}

impl Instances {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.random_range(lo..=hi_inclusive)
    }

    /// `n` points in `[-1, 1]^d`.
    pub fn points(&mut self, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| self.uniform(-1.0, 1.0)).collect())
            .collect()
    }

    pub fn space(&mut self, n: usize, d: usize, epsilon: f64) -> Result<Arc<GroundSpace>> {
        GroundSpace::sqeuclidean(self.points(n, d), epsilon)
    }

    /// Fully supported measure with weights bounded away from zero.
    pub fn measure(&mut self, space: &Arc<GroundSpace>) -> Result<Measure> {
        let w: Vec<f64> = (0..space.len()).map(|_| self.uniform(0.2, 1.0)).collect();
        let total: f64 = w.iter().sum();
        Measure::normalized(space.clone(), w.iter().map(|x| x / total).collect(), 1e-9)
    }

    /// Balanced tangent with entries of order one.
    pub fn tangent(&mut self, space: &Arc<GroundSpace>) -> Result<TangentVector> {
        let w: Vec<f64> = (0..space.len()).map(|_| self.uniform(-1.0, 1.0)).collect();
        TangentVector::balanced(space.clone(), w)
    }

    pub fn vectors(&mut self, n: usize, d: usize) -> Vec<Vec<f64>> {
        self.points(n, d)
    }
}
