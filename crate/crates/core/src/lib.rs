//! Numerical solver for the Dirichlet problem of the Lagrangian mean
//! curvature equation `Σ arctan λᵢ(D²u) = ψ(x)` on convex planar domains.
//!
//! * [`phase`]: the phase operator on symmetric matrices and its algebra.
//! * [`geometry`]: domains, grids, boundary data, barriers, mollification.
//! * [`fd`]: discrete Hessians, residuals, linearization, wide stencils.
//! * [`continuity`]: homotopy in the phase with damped Newton.
//! * [`perron`]: monotone two-sided iteration for constant phase, envelopes
//!   and the discrete comparison check.
//! * [`runner`]: configuration, experiments and serialization.

pub mod error;
pub mod fd;
pub mod geometry;
pub mod phase;
pub mod sparse;
pub mod report;
pub mod continuity;
pub mod perron;
pub mod runner;

pub use error::{Error, Result};
