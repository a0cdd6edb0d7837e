//! In-repo sparse kernels: CSR storage, SpMV, threshold-dropping incomplete
//! Cholesky, preconditioned CG, and restarted GMRES with modified
//! Gram-Schmidt. All kernels are single-threaded and deterministic (fixed
//! summation order), so repeated runs are bit-identical.

mod csr;
mod gmres;
mod ichol;
mod pcg;

pub use csr::CsrMatrix;
pub use gmres::{gmres, GmresResult};
pub use ichol::{ichol_t, IcPreconditioner};
pub use pcg::{pcg, PcgResult};

/// Abstract linear operator `y = A x`.
pub trait LinOp {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Operator wrapper around a closure.
pub struct FnOp<F: Fn(&[f64], &mut [f64])> {
    pub rows: usize,
    pub cols: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinOp for FnOp<F> {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Identity preconditioner (no-op).
pub struct IdentityOp(pub usize);

impl LinOp for IdentityOp {
    fn nrows(&self) -> usize {
        self.0
    }
    fn ncols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Which residual the iteration is stopped on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualMeasure {
    /// `||M^{-1}(b - Ax)|| / ||M^{-1}b|| <= tol` (the MATLAB `gmres` style).
    Preconditioned,
    /// `||b - Ax|| <= tol * ||b||`.
    True,
    /// `||M^{-1}(b - Ax)|| <= tol * ||b||`: the preconditioned residual
    /// measured against the unpreconditioned right-hand side norm (the
    /// deal.II `SolverGMRES` convention with left preconditioning).
    PreconditionedVsRhs,
}

/// Iterative solver settings.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Relative tolerance (> 0).
    pub tol: f64,
    /// GMRES restart length (>= 1).
    pub restart: usize,
    /// Cap on total iterations across restarts.
    pub max_iters: usize,
    pub measure: ResidualMeasure,
}

impl SolverConfig {
    pub fn new(tol: f64, restart: usize, max_iters: usize, measure: ResidualMeasure) -> Self {
        assert!(tol > 0.0, "tol must be positive");
        assert!(restart >= 1, "restart must be >= 1");
        SolverConfig {
            tol,
            restart,
            max_iters,
            measure,
        }
    }

    /// 2D experiment profile: tol 1e-6, restart 30, preconditioned residual.
    pub fn profile_2d() -> Self {
        SolverConfig::new(1e-6, 30, 2000, ResidualMeasure::Preconditioned)
    }

    /// 3D experiment profile: tol 1e-3, restart 28, preconditioned
    /// residual measured against the right-hand side norm.
    pub fn profile_3d() -> Self {
        SolverConfig::new(1e-3, 28, 2000, ResidualMeasure::PreconditionedVsRhs)
    }

    /// Tight fixed tolerance for inner solves inside preconditioners.
    pub fn inner() -> Self {
        SolverConfig::new(1e-10, 100, 10000, ResidualMeasure::Preconditioned)
    }
}

// Shared small vector helpers (fixed evaluation order).

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}
