//! Entropic optimal transport and the Riemannian geometry induced by the
//! Sinkhorn divergence on discrete probability measures.
//!
//! ```
//! use sinkgeo::{GroundSpace, Measure, SolverOptions, sinkhorn_divergence};
//!
//! let space = GroundSpace::line(&[0.0, 1.0], 1.0).unwrap();
//! let a = Measure::dirac(space.clone(), 0).unwrap();
//! let b = Measure::dirac(space, 1).unwrap();
//! let s = sinkhorn_divergence(&a, &b, &SolverOptions::default()).unwrap();
//! assert!((s - 1.0).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_forms;
pub mod error;
pub mod fd;
pub mod figures;
pub mod geodesics;
pub mod io;
pub mod quadrature;
pub mod random;
pub mod sinkhorn;
pub mod space;
pub mod tensor;

pub use error::{Error, Result};
pub use geodesics::{
    chain_objective, ds_bounds, path_energy, solve_geodesic, GeodesicOptions, GeodesicResult, Init, Path,
};
pub use sinkhorn::{
    divergence, grad_s_eps, ot_eps, plan, sinkhorn_divergence, solve_potentials, t_eps, Cloud, Coupling, Potentials,
    SolverOptions,
};
pub use space::{mmd_sq, rkhs_inner, CostKind, GroundSpace, Measure, SignedVector, TangentVector};
pub use tensor::{self_transport, SelfTransport, SpectralReport};
pub mod validation;
