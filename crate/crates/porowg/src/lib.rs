//! Weak Galerkin (WG) discretization of Biot poroelasticity and linear
//! elasticity on uniform quad/hex meshes, together with block triangular
//! Schur complement preconditioners whose GMRES iteration counts stay
//! bounded under locking (`lambda -> inf`, or `c0 = 0` with small
//! `kappa*dt`).
//!
//! The crate is organized around the solver pipeline:
//!
//! - [`mesh`]: uniform axis-aligned meshes of the unit square/cube and the
//!   interior/facet degree-of-freedom maps of the lowest-order WG spaces.
//! - [`wg`]: local AC0/AT0 bases, discrete weak gradients and divergences
//!   as small dense element matrices.
//! - [`assembly`]: global CSR blocks (A1, B, Mp, Ap, D, ...) and right-hand
//!   sides, with Dirichlet elimination.
//! - [`problems`]: manufactured elasticity/poroelasticity problems and Lame
//!   parameter conversion.
//! - [`sparse`]: CSR kernels, threshold-dropping incomplete Cholesky, PCG
//!   and restarted GMRES.
//! - [`precond`]: the two- and three-field block triangular preconditioners
//!   and the top-level solve drivers.
//! - [`spectrum`]: dense verification oracle (Schur complement bounds,
//!   inf-sup constant, eigenvalue cluster structure).
//! - [`mod@bench`]: parameter sweeps, CSV/markdown reporting, solver presets.
//! - [`mm`]: MatrixMarket import/export.

pub mod assembly;
pub mod bench;
pub mod dense;
pub mod mesh;
pub mod mm;
pub mod precond;
pub mod problems;
pub mod sparse;
pub mod spectrum;
pub mod wg;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incomplete Cholesky breakdown at column {col} (pivot {pivot:.3e})")]
    IcBreakdown { col: usize, pivot: f64 },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("structural failure: {0}")]
    Structural(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
