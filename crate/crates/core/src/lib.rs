//! Orthogonality in finite-dimensional `l^p` spaces.
//!
//! Metric projections, norming functionals, orthogonality defects, spans of
//! sphere normals along sections, and numerical certificates for subspaces
//! that admit no orthogonal complement of a given dimension.

pub mod borsuk;
pub mod counterexample;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod normal_span;
pub mod projection;
pub mod quadrature;
pub mod seed;
pub mod subspace;

pub use error::{Error, Result};
pub use lp::{Space, SpaceKind};
pub use subspace::{GammaParam, Subspace};
