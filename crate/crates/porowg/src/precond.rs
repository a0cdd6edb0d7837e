//! Block upper triangular Schur complement preconditioners and the
//! top-level solve drivers.
//!
//! The two-field system is preconditioned by
//! `P2 = [eps A1 + A0, (alpha eps/mu) B^T; 0, -(eps/mu) D]` (or its DLU
//! variant with `D` replaced by an incomplete Cholesky factorization). The
//! leading block is inverted by rewriting the elasticity problem
//! `(eps A1 + A0) u = b` as a saddle system in `(eps u, w)` with
//! `w = -Mp^{-1} Bcirc u`, preconditioned by
//! `P2e = [A1, -Bcirc^T; 0, -Mp]`. The three-field system uses
//! `P3 = [A1, 0, -Bcirc^T; 0, -(mu/alpha^2) Dtt, 0; 0, 0, -Mp]`.
//!
//! Inner solves run to a fixed tight tolerance (1e-10) so each
//! preconditioner acts as a numerically constant operator and standard
//! (non-flexible) GMRES applies.

use crate::assembly::{AssembledBlocks, ProblemParams, Rhs};
use crate::sparse::{
    gmres, pcg, CsrMatrix, GmresResult, IcPreconditioner, LinOp, ResidualMeasure, SolverConfig,
};
use crate::Result;
use std::cell::Cell;

/// Drop tolerance used for every incomplete Cholesky factorization.
pub const IC_DROPTOL: f64 = 1e-3;

/// Fixed tolerance of the inner solves inside preconditioners.
pub const INNER_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondTag {
    P2,
    P2Dlu,
    P2e,
    P3,
    P3Dlu,
}

impl PrecondTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrecondTag::P2 => "p2",
            PrecondTag::P2Dlu => "p2dlu",
            PrecondTag::P2e => "p2e",
            PrecondTag::P3 => "p3",
            PrecondTag::P3Dlu => "p3dlu",
        }
    }

    pub fn parse(s: &str) -> Result<PrecondTag> {
        match s {
            "p2" => Ok(PrecondTag::P2),
            "p2dlu" => Ok(PrecondTag::P2Dlu),
            "p2e" => Ok(PrecondTag::P2e),
            "p3" => Ok(PrecondTag::P3),
            "p3dlu" => Ok(PrecondTag::P3Dlu),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown preconditioner tag '{other}'"
            ))),
        }
    }
}

/// Inner-solve statistics accumulated during one outer solve.
#[derive(Clone, Copy, Debug, Default)]
pub struct InnerStats {
    /// PCG iterations spent in A1 solves.
    pub a1_pcg_iters: usize,
    pub a1_solves: usize,
    /// PCG iterations spent in D (or Dtt) solves.
    pub d_pcg_iters: usize,
    pub d_solves: usize,
    /// GMRES iterations spent in nested elasticity block solves.
    pub elasticity_iters: usize,
    pub elasticity_solves: usize,
    /// Inner solves that missed their tolerance budget.
    pub failures: usize,
    pub inner_tol: f64,
    /// Extra outer iterations spent refining the returned iterate after
    /// the measured stopping test (not counted in `iterations`).
    pub polish_iters: usize,
}

/// Outcome of one preconditioned solve at one parameter point.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub precond: PrecondTag,
    pub dim: usize,
    pub n: usize,
    pub lambda: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub c0: f64,
    pub dt: f64,
    pub kappa: f64,
    /// Outer iterations (total preconditioned-matrix applications).
    pub iterations: usize,
    pub converged: bool,
    /// True relative residual of the original unpreconditioned system
    /// handed to GMRES (saddle, two-field, or three-field).
    pub true_relres: f64,
    /// For elasticity solves only: relative residual of the parent system
    /// `(eps A1 + A0) u = b`. The saddle residual controls it only up to a
    /// `1/eps` factor on the `w`-rows, so it is reported separately.
    pub parent_relres: Option<f64>,
    pub inner: InnerStats,
    pub wall_ms: f64,
    /// Whether the outer GMRES restarted at least once.
    pub restarted: bool,
    /// Whether any incomplete Cholesky factorization needed the diagonal
    /// shift retry.
    pub ic_shifted: bool,
}

impl SolveReport {
    fn from_gmres(
        tag: PrecondTag,
        params: &ProblemParams,
        n: usize,
        res: &GmresResult,
        tol: f64,
        inner: InnerStats,
        ic_shifted: bool,
    ) -> SolveReport {
        SolveReport {
            precond: tag,
            dim: params.dim,
            n,
            lambda: params.lambda,
            mu: params.mu,
            epsilon: params.epsilon,
            c0: params.c0,
            dt: params.dt,
            kappa: params.kappa,
            iterations: res.iterations,
            converged: res.converged && res.true_relres <= 10.0 * tol,
            true_relres: res.true_relres,
            parent_relres: None,
            inner,
            wall_ms: 0.0,
            restarted: res.restarted,
            ic_shifted,
        }
    }
}

// ---------------------------------------------------------------------------
// Generic block triangular preconditioner (saddle systems [A B^T; C -D])
// ---------------------------------------------------------------------------

/// `P_t^{-1}` for `P_t = [A, B^T; 0, -Shat]`: back substitution
/// `x2 = -Shat^{-1} r2`, `x1 = A^{-1}(r1 - B^T x2)`, with the minus sign
/// embedded so eigenvalues of the preconditioned matrix sit near +1.
pub struct BlockTriangularPrecond<'a> {
    pub apply_ainv: &'a dyn LinOp,
    pub bt: &'a dyn LinOp,
    pub apply_shatinv: &'a dyn LinOp,
}

pub fn make_block_triangular<'a>(
    apply_ainv: &'a dyn LinOp,
    bt: &'a dyn LinOp,
    apply_shatinv: &'a dyn LinOp,
) -> BlockTriangularPrecond<'a> {
    assert_eq!(apply_ainv.nrows(), bt.nrows());
    assert_eq!(apply_shatinv.nrows(), bt.ncols());
    BlockTriangularPrecond {
        apply_ainv,
        bt,
        apply_shatinv,
    }
}

impl LinOp for BlockTriangularPrecond<'_> {
    fn nrows(&self) -> usize {
        self.apply_ainv.nrows() + self.apply_shatinv.nrows()
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, r: &[f64], x: &mut [f64]) {
        let n1 = self.apply_ainv.nrows();
        let n2 = self.apply_shatinv.nrows();
        let (r1, r2) = r.split_at(n1);
        let mut x2 = vec![0.0; n2];
        self.apply_shatinv.apply(r2, &mut x2);
        for v in x2.iter_mut() {
            *v = -*v;
        }
        let mut t = vec![0.0; n1];
        self.bt.apply(&x2, &mut t);
        for (ti, ri) in t.iter_mut().zip(r1) {
            *ti = ri - *ti;
        }
        self.apply_ainv.apply(&t, &mut x[..n1]);
        x[n1..].copy_from_slice(&x2);
    }
}

// ---------------------------------------------------------------------------
// Inner solvers
// ---------------------------------------------------------------------------

/// `A1^{-1}` action by PCG with incomplete Cholesky (droptol 1e-3) to a
/// fixed tight tolerance.
pub struct A1Solver<'a> {
    a1: &'a CsrMatrix,
    ic: IcPreconditioner,
    cfg: SolverConfig,
    pub iters: Cell<usize>,
    pub solves: Cell<usize>,
    pub failures: Cell<usize>,
}

impl<'a> A1Solver<'a> {
    pub fn new(a1: &'a CsrMatrix, tol: f64) -> Result<A1Solver<'a>> {
        let ic = IcPreconditioner::new(a1, IC_DROPTOL)?;
        Ok(A1Solver {
            a1,
            ic,
            cfg: SolverConfig::new(tol, 1, 100_000, ResidualMeasure::True),
            iters: Cell::new(0),
            solves: Cell::new(0),
            failures: Cell::new(0),
        })
    }

    pub fn shifted(&self) -> bool {
        self.ic.shifted
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let res = pcg(self.a1, Some(&self.ic), b, &self.cfg);
        self.iters.set(self.iters.get() + res.iterations);
        self.solves.set(self.solves.get() + 1);
        if !res.converged {
            self.failures.set(self.failures.get() + 1);
        }
        x.copy_from_slice(&res.x);
    }
}

/// `(2,2)`-block inverse action: exact (PCG + IC to the inner tolerance)
/// or the DLU replacement `(L L^T)^{-1}`.
pub enum PressureBlockSolver {
    Exact {
        d: CsrMatrix,
        ic: IcPreconditioner,
        cfg: SolverConfig,
        iters: Cell<usize>,
        solves: Cell<usize>,
        failures: Cell<usize>,
    },
    Factored {
        ic: IcPreconditioner,
        solves: Cell<usize>,
    },
}

impl PressureBlockSolver {
    pub fn exact(d: CsrMatrix, tol: f64) -> Result<PressureBlockSolver> {
        let ic = IcPreconditioner::new(&d, IC_DROPTOL)?;
        Ok(PressureBlockSolver::Exact {
            d,
            ic,
            cfg: SolverConfig::new(tol, 1, 100_000, ResidualMeasure::True),
            iters: Cell::new(0),
            solves: Cell::new(0),
            failures: Cell::new(0),
        })
    }

    pub fn factored(d: &CsrMatrix) -> Result<PressureBlockSolver> {
        Ok(PressureBlockSolver::Factored {
            ic: IcPreconditioner::new(d, IC_DROPTOL)?,
            solves: Cell::new(0),
        })
    }

    pub fn shifted(&self) -> bool {
        match self {
            PressureBlockSolver::Exact { ic, .. } => ic.shifted,
            PressureBlockSolver::Factored { ic, .. } => ic.shifted,
        }
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        match self {
            PressureBlockSolver::Exact {
                d,
                ic,
                cfg,
                iters,
                solves,
                failures,
            } => {
                let res = pcg(d, Some(ic), b, cfg);
                iters.set(iters.get() + res.iterations);
                solves.set(solves.get() + 1);
                if !res.converged {
                    failures.set(failures.get() + 1);
                }
                x.copy_from_slice(&res.x);
            }
            PressureBlockSolver::Factored { ic, solves } => {
                ic.solve_into(b, x);
                solves.set(solves.get() + 1);
            }
        }
    }

    fn stats(&self) -> (usize, usize, usize) {
        match self {
            PressureBlockSolver::Exact {
                iters,
                solves,
                failures,
                ..
            } => (iters.get(), solves.get(), failures.get()),
            PressureBlockSolver::Factored { solves, .. } => (0, solves.get(), 0),
        }
    }
}

// ---------------------------------------------------------------------------
// Elasticity saddle system (eps A1 + A0) u = b
// ---------------------------------------------------------------------------

/// The saddle operator `A2e = [A1, -Bcirc^T; -Bcirc, -eps Mp]` acting on
/// `[eps u; w]`.
pub struct ElasticitySaddleOp<'a> {
    pub blocks: &'a AssembledBlocks,
    pub epsilon: f64,
}

impl LinOp for ElasticitySaddleOp<'_> {
    fn nrows(&self) -> usize {
        self.blocks.n_u_free + self.blocks.n_interior
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let b = self.blocks;
        let nu = b.n_u_free;
        let (xu, xw) = x.split_at(nu);
        let (yu, yw) = y.split_at_mut(nu);
        b.a1.spmv_into(xu, yu);
        b.bcirc.spmv_transpose_add(-1.0, xw, yu);
        b.bcirc.spmv_into(xu, yw);
        for (e, v) in yw.iter_mut().enumerate() {
            *v = -*v - self.epsilon * b.mp_diag[e] * xw[e];
        }
    }
}

/// `P2e = [A1, -Bcirc^T; 0, -Mp]`: `x2 = -Mp^{-1} r2`,
/// `x1 = A1^{-1}(r1 + Bcirc^T x2)` with the A1 action from PCG + IC.
pub struct P2ePrecond<'a> {
    pub blocks: &'a AssembledBlocks,
    pub a1s: &'a A1Solver<'a>,
}

impl LinOp for P2ePrecond<'_> {
    fn nrows(&self) -> usize {
        self.blocks.n_u_free + self.blocks.n_interior
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, r: &[f64], x: &mut [f64]) {
        let b = self.blocks;
        let nu = b.n_u_free;
        let (r1, r2) = r.split_at(nu);
        let (x1, x2) = x.split_at_mut(nu);
        for (e, v) in x2.iter_mut().enumerate() {
            *v = -r2[e] / b.mp_diag[e];
        }
        let mut t = r1.to_vec();
        b.bcirc.spmv_transpose_add(1.0, x2, &mut t);
        self.a1s.solve_into(&t, x1);
    }
}

/// Nested solver for the two-field leading block `(eps A1 + A0) u = b`,
/// via GMRES on the saddle reformulation preconditioned with `P2e`.
pub struct ElasticityBlockSolver<'a> {
    blocks: &'a AssembledBlocks,
    params: ProblemParams,
    a1s: A1Solver<'a>,
    cfg: SolverConfig,
    pub gmres_iters: Cell<usize>,
    pub solves: Cell<usize>,
    pub failures: Cell<usize>,
}

impl<'a> ElasticityBlockSolver<'a> {
    pub fn new(
        blocks: &'a AssembledBlocks,
        params: &ProblemParams,
        cfg: SolverConfig,
    ) -> Result<ElasticityBlockSolver<'a>> {
        Ok(ElasticityBlockSolver {
            blocks,
            params: *params,
            a1s: A1Solver::new(&blocks.a1, INNER_TOL)?,
            cfg,
            gmres_iters: Cell::new(0),
            solves: Cell::new(0),
            failures: Cell::new(0),
        })
    }

    pub fn ic_shifted(&self) -> bool {
        self.a1s.shifted()
    }

    pub fn a1_stats(&self) -> (usize, usize, usize) {
        (
            self.a1s.iters.get(),
            self.a1s.solves.get(),
            self.a1s.failures.get(),
        )
    }

    /// Solve `(eps A1 + A0) u = b`, returning the GMRES result on the
    /// saddle system alongside `u`.
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, GmresResult) {
        let blocks = self.blocks;
        let eps = self.params.epsilon;
        let nu = blocks.n_u_free;
        let ne = blocks.n_interior;
        let op = ElasticitySaddleOp {
            blocks,
            epsilon: eps,
        };
        let prec = P2ePrecond {
            blocks,
            a1s: &self.a1s,
        };
        let mut rhs = vec![0.0; nu + ne];
        rhs[..nu].copy_from_slice(b);
        let res = gmres(&op, Some(&prec), &rhs, &self.cfg);
        self.gmres_iters
            .set(self.gmres_iters.get() + res.iterations);
        self.solves.set(self.solves.get() + 1);
        if !res.converged {
            self.failures.set(self.failures.get() + 1);
        }
        let u: Vec<f64> = res.x[..nu].iter().map(|v| v / eps).collect();
        (u, res)
    }
}

// ---------------------------------------------------------------------------
// Two-field system and preconditioners
// ---------------------------------------------------------------------------

/// The scaled two-field operator
/// `A2 = [eps A1 + A0, (alpha eps/mu) B^T; (alpha eps/mu) B, -(eps/mu) D]`
/// over `[u; p]` (free dofs; A0 applied matrix-free).
pub struct TwoFieldOp<'a> {
    pub blocks: &'a AssembledBlocks,
    pub params: ProblemParams,
    pub d: CsrMatrix,
}

impl<'a> TwoFieldOp<'a> {
    pub fn new(blocks: &'a AssembledBlocks, params: &ProblemParams) -> TwoFieldOp<'a> {
        TwoFieldOp {
            blocks,
            params: *params,
            d: blocks.d_matrix(params),
        }
    }

    /// Scaled right-hand side `(eps/mu) [b1; b2]`.
    pub fn scaled_rhs(&self, rhs: &Rhs) -> Vec<f64> {
        let s = self.params.epsilon / self.params.mu;
        rhs.b1.iter().chain(rhs.b2.iter()).map(|v| s * v).collect()
    }
}

impl LinOp for TwoFieldOp<'_> {
    fn nrows(&self) -> usize {
        self.blocks.n_u_free + self.blocks.n_p_free
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let b = self.blocks;
        let p = &self.params;
        let nu = b.n_u_free;
        let ne = b.n_interior;
        let eps = p.epsilon;
        let coupling = p.alpha * eps / p.mu;
        let (xu, xp) = x.split_at(nu);
        let (yu, yp) = y.split_at_mut(nu);
        // y_u = eps A1 u + A0 u + (alpha eps/mu) Bcirc^T p_int
        b.a1.spmv_into(xu, yu);
        for v in yu.iter_mut() {
            *v *= eps;
        }
        let mut scratch = Vec::new();
        b.a0_apply_add(1.0, xu, yu, &mut scratch);
        b.bcirc.spmv_transpose_add(coupling, &xp[..ne], yu);
        // y_p = (alpha eps/mu) B u - (eps/mu) D p
        self.d.spmv_into(xp, yp);
        let sd = -eps / p.mu;
        for v in yp.iter_mut() {
            *v *= sd;
        }
        b.bcirc.spmv_add(coupling, xu, &mut yp[..ne].as_mut());
    }
}

/// `P2` / `P2,DLU`: back substitution with the leading block inverted by
/// the nested elasticity solve and the `(2,2)` block by PCG + IC (exact
/// variant) or an incomplete Cholesky replacement (DLU variant).
pub struct P2Precond<'a> {
    blocks: &'a AssembledBlocks,
    params: ProblemParams,
    dsolve: PressureBlockSolver,
    elast: ElasticityBlockSolver<'a>,
}

impl<'a> P2Precond<'a> {
    pub fn new(
        blocks: &'a AssembledBlocks,
        params: &ProblemParams,
        dlu: bool,
    ) -> Result<P2Precond<'a>> {
        let d = blocks.d_matrix(params);
        let dsolve = if dlu {
            PressureBlockSolver::factored(&d)?
        } else {
            PressureBlockSolver::exact(d, INNER_TOL)?
        };
        let elast = ElasticityBlockSolver::new(blocks, params, SolverConfig::inner())?;
        Ok(P2Precond {
            blocks,
            params: *params,
            dsolve,
            elast,
        })
    }

    pub fn ic_shifted(&self) -> bool {
        self.dsolve.shifted() || self.elast.ic_shifted()
    }

    pub fn stats(&self) -> InnerStats {
        let (a1i, a1s, a1f) = self.elast.a1_stats();
        let (di, ds, df) = self.dsolve.stats();
        InnerStats {
            a1_pcg_iters: a1i,
            a1_solves: a1s,
            d_pcg_iters: di,
            d_solves: ds,
            elasticity_iters: self.elast.gmres_iters.get(),
            elasticity_solves: self.elast.solves.get(),
            failures: a1f + df + self.elast.failures.get(),
            inner_tol: INNER_TOL,
            polish_iters: 0,
        }
    }
}

impl LinOp for P2Precond<'_> {
    fn nrows(&self) -> usize {
        self.blocks.n_u_free + self.blocks.n_p_free
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, r: &[f64], x: &mut [f64]) {
        let b = self.blocks;
        let p = &self.params;
        let nu = b.n_u_free;
        let ne = b.n_interior;
        let (r1, r2) = r.split_at(nu);
        let (x1, x2) = x.split_at_mut(nu);
        // x2 = -(mu/eps) D^{-1} r2
        self.dsolve.solve_into(r2, x2);
        let s = -p.mu / p.epsilon;
        for v in x2.iter_mut() {
            *v *= s;
        }
        // x1 = (eps A1 + A0)^{-1} (r1 - (alpha eps/mu) Bcirc^T x2_int)
        let mut t = r1.to_vec();
        b.bcirc
            .spmv_transpose_add(-p.alpha * p.epsilon / p.mu, &x2[..ne], &mut t);
        let (u, _) = self.elast.solve(&t);
        x1.copy_from_slice(&u);
    }
}

// ---------------------------------------------------------------------------
// Three-field system and preconditioners
// ---------------------------------------------------------------------------

/// The three-field operator over `[u; (alpha/mu) p; z]` with
/// `z = (1/eps) w - (alpha/mu) p_int` (total pressure block):
///
/// ```text
/// A3 = [ A1,      0,               -Bcirc^T        ]
///      [ 0,      -(mu/alpha^2) Dtt, -eps [Mp; 0]   ]
///      [ -Bcirc, -eps [Mp, 0],      -eps Mp        ]
/// ```
pub struct ThreeFieldOp<'a> {
    pub blocks: &'a AssembledBlocks,
    pub params: ProblemParams,
    pub dtt: CsrMatrix,
}

impl<'a> ThreeFieldOp<'a> {
    pub fn new(blocks: &'a AssembledBlocks, params: &ProblemParams) -> ThreeFieldOp<'a> {
        ThreeFieldOp {
            blocks,
            params: *params,
            dtt: blocks.d_tilde_tilde(params),
        }
    }

    /// Right-hand side `[b1/mu; b2/alpha; 0]`.
    pub fn scaled_rhs(&self, rhs: &Rhs) -> Vec<f64> {
        let p = &self.params;
        let mut out = Vec::with_capacity(self.nrows());
        out.extend(rhs.b1.iter().map(|v| v / p.mu));
        out.extend(rhs.b2.iter().map(|v| v / p.alpha));
        out.extend(std::iter::repeat(0.0).take(self.blocks.n_interior));
        out
    }
}

impl LinOp for ThreeFieldOp<'_> {
    fn nrows(&self) -> usize {
        self.blocks.n_u_free + self.blocks.n_p_free + self.blocks.n_interior
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let b = self.blocks;
        let p = &self.params;
        let nu = b.n_u_free;
        let np = b.n_p_free;
        let ne = b.n_interior;
        let eps = p.epsilon;
        let (xu, rest) = x.split_at(nu);
        let (xq, xz) = rest.split_at(np);
        let (yu, yrest) = y.split_at_mut(nu);
        let (yq, yz) = yrest.split_at_mut(np);
        // y_u = A1 u - Bcirc^T z
        b.a1.spmv_into(xu, yu);
        b.bcirc.spmv_transpose_add(-1.0, xz, yu);
        // y_q = -(mu/alpha^2) Dtt q - eps [Mp; 0] z
        self.dtt.spmv_into(xq, yq);
        let s = -p.mu / (p.alpha * p.alpha);
        for v in yq.iter_mut() {
            *v *= s;
        }
        for e in 0..ne {
            yq[e] -= eps * b.mp_diag[e] * xz[e];
        }
        // y_z = -Bcirc u - eps Mp q_int - eps Mp z
        b.bcirc.spmv_into(xu, yz);
        for e in 0..ne {
            yz[e] = -yz[e] - eps * b.mp_diag[e] * (xq[e] + xz[e]);
        }
    }
}

/// `P3` / `P3,DLU`: `x3 = -Mp^{-1} r3`, `x2 = -(alpha^2/mu) Dtt^{-1} r2`,
/// `x1 = A1^{-1}(r1 + Bcirc^T x3)`. `Mp` stays diagonal; `Dtt^{-1}` is PCG
/// + IC (exact) or the incomplete factor replacement (DLU); `A1^{-1}` is
/// PCG + IC.
pub struct P3Precond<'a> {
    blocks: &'a AssembledBlocks,
    params: ProblemParams,
    a1s: A1Solver<'a>,
    dsolve: PressureBlockSolver,
}

impl<'a> P3Precond<'a> {
    pub fn new(
        blocks: &'a AssembledBlocks,
        params: &ProblemParams,
        dlu: bool,
    ) -> Result<P3Precond<'a>> {
        let dtt = blocks.d_tilde_tilde(params);
        let dsolve = if dlu {
            PressureBlockSolver::factored(&dtt)?
        } else {
            PressureBlockSolver::exact(dtt, INNER_TOL)?
        };
        Ok(P3Precond {
            blocks,
            params: *params,
            a1s: A1Solver::new(&blocks.a1, INNER_TOL)?,
            dsolve,
        })
    }

    pub fn ic_shifted(&self) -> bool {
        self.dsolve.shifted() || self.a1s.shifted()
    }

    pub fn stats(&self) -> InnerStats {
        let (di, ds, df) = self.dsolve.stats();
        InnerStats {
            a1_pcg_iters: self.a1s.iters.get(),
            a1_solves: self.a1s.solves.get(),
            d_pcg_iters: di,
            d_solves: ds,
            elasticity_iters: 0,
            elasticity_solves: 0,
            failures: self.a1s.failures.get() + df,
            inner_tol: INNER_TOL,
            polish_iters: 0,
        }
    }
}

impl LinOp for P3Precond<'_> {
    fn nrows(&self) -> usize {
        self.blocks.n_u_free + self.blocks.n_p_free + self.blocks.n_interior
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, r: &[f64], x: &mut [f64]) {
        let b = self.blocks;
        let p = &self.params;
        let nu = b.n_u_free;
        let np = b.n_p_free;
        let ne = b.n_interior;
        let (r1, rest) = r.split_at(nu);
        let (r2, r3) = rest.split_at(np);
        // x3 = -Mp^{-1} r3
        let mut x3 = vec![0.0; ne];
        for e in 0..ne {
            x3[e] = -r3[e] / b.mp_diag[e];
        }
        // x2 = -(alpha^2/mu) Dtt^{-1} r2
        let mut x2 = vec![0.0; np];
        self.dsolve.solve_into(r2, &mut x2);
        let s = -p.alpha * p.alpha / p.mu;
        for v in x2.iter_mut() {
            *v *= s;
        }
        // x1 = A1^{-1}(r1 + Bcirc^T x3)
        let mut t = r1.to_vec();
        b.bcirc.spmv_transpose_add(1.0, &x3, &mut t);
        self.a1s.solve_into(&t, &mut x[..nu]);
        x[nu..nu + np].copy_from_slice(&x2);
        x[nu + np..].copy_from_slice(&x3);
    }
}

// ---------------------------------------------------------------------------
// Solve drivers
// ---------------------------------------------------------------------------

/// Solution of a poroelasticity solve over the free dofs.
#[derive(Clone, Debug)]
pub struct PoroSolution {
    pub u: Vec<f64>,
    /// Free pressure dofs (interior first, then interior facets).
    pub p: Vec<f64>,
}

/// When the measured (preconditioned) stopping test leaves the true
/// relative residual above `10 * tol` - which happens for the two-field
/// system under locking, where the block rows differ in scale by `1/eps` -
/// refine the iterate with a short correction solve `A dx = b - A x`. The
/// reported iteration count keeps the measured-stop semantics of the
/// experiment tables; the refinement cost is logged separately.
fn polish_iterate(
    op: &dyn LinOp,
    prec: &dyn LinOp,
    b: &[f64],
    res: &mut GmresResult,
    config: &SolverConfig,
) -> usize {
    if !res.converged || res.true_relres <= 10.0 * config.tol {
        return 0;
    }
    let n = b.len();
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut polish = 0usize;
    for _ in 0..3 {
        let mut r = vec![0.0; n];
        op.apply(&res.x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_r <= config.tol * norm_b {
            break;
        }
        // Bring the combined residual to ~tol * ||b||.
        let rel_target = (config.tol * norm_b / norm_r).min(0.5);
        let cfg = SolverConfig::new(rel_target, config.restart, 200, ResidualMeasure::True);
        let corr = gmres(op, Some(prec), &r, &cfg);
        polish += corr.iterations;
        for i in 0..n {
            res.x[i] += corr.x[i];
        }
        let mut rr = vec![0.0; n];
        op.apply(&res.x, &mut rr);
        let mut s2 = 0.0;
        for i in 0..n {
            let d = b[i] - rr[i];
            s2 += d * d;
        }
        res.true_relres = s2.sqrt() / norm_b;
        if res.true_relres <= 10.0 * config.tol {
            break;
        }
    }
    polish
}

/// Solve the elasticity system `(mu A1 + (lambda+mu) A0) u = b1` through
/// the scaled saddle reformulation with `P2e`-preconditioned GMRES.
///
/// The report's residual refers to `(eps A1 + A0) u = (eps/mu) b1`.
pub fn solve_elasticity(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
    b1: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = std::time::Instant::now();
    let eps = params.epsilon;
    let scale = eps / params.mu;
    let b: Vec<f64> = b1.iter().map(|v| scale * v).collect();
    let solver = ElasticityBlockSolver::new(blocks, params, *config)?;
    let (u, res) = solver.solve(&b);
    // True residual of the unpreconditioned elasticity system.
    let mut r = b.clone();
    let mut tmp = vec![0.0; blocks.n_u_free];
    blocks.a1.spmv_into(&u, &mut tmp);
    let mut scratch = Vec::new();
    for (ri, ti) in r.iter_mut().zip(&tmp) {
        *ri -= eps * ti;
    }
    let mut a0u = vec![0.0; blocks.n_u_free];
    blocks.a0_apply_add(1.0, &u, &mut a0u, &mut scratch);
    for (ri, ai) in r.iter_mut().zip(&a0u) {
        *ri -= ai;
    }
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let true_relres = if nb == 0.0 { 0.0 } else { nr / nb };
    let (a1i, a1s, a1f) = solver.a1_stats();
    let inner = InnerStats {
        a1_pcg_iters: a1i,
        a1_solves: a1s,
        d_pcg_iters: 0,
        d_solves: 0,
        elasticity_iters: 0,
        elasticity_solves: 0,
        failures: a1f,
        inner_tol: INNER_TOL,
        polish_iters: 0,
    };
    let mut report = SolveReport::from_gmres(
        PrecondTag::P2e,
        params,
        blocks.n,
        &res,
        config.tol,
        inner,
        solver.ic_shifted(),
    );
    report.parent_relres = Some(true_relres);
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((u, report))
}

/// Solve the scaled two-field system with `P2` (`dlu = false`) or
/// `P2,DLU` (`dlu = true`).
pub fn solve_two_field(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
    rhs: &Rhs,
    config: &SolverConfig,
    dlu: bool,
) -> Result<(PoroSolution, SolveReport)> {
    let start = std::time::Instant::now();
    let op = TwoFieldOp::new(blocks, params);
    let b = op.scaled_rhs(rhs);
    let prec = P2Precond::new(blocks, params, dlu)?;
    let mut res = gmres(&op, Some(&prec), &b, config);
    let polish = polish_iterate(&op, &prec, &b, &mut res, config);
    let nu = blocks.n_u_free;
    let sol = PoroSolution {
        u: res.x[..nu].to_vec(),
        p: res.x[nu..].to_vec(),
    };
    let tag = if dlu {
        PrecondTag::P2Dlu
    } else {
        PrecondTag::P2
    };
    let mut stats = prec.stats();
    stats.polish_iters = polish;
    let mut report = SolveReport::from_gmres(
        tag,
        params,
        blocks.n,
        &res,
        config.tol,
        stats,
        prec.ic_shifted(),
    );
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((sol, report))
}

/// Solve the three-field system with `P3` (`dlu = false`) or `P3,DLU`
/// (`dlu = true`); pressure is recovered as `p = (mu/alpha) x2`.
pub fn solve_three_field(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
    rhs: &Rhs,
    config: &SolverConfig,
    dlu: bool,
) -> Result<(PoroSolution, SolveReport)> {
    let start = std::time::Instant::now();
    let op = ThreeFieldOp::new(blocks, params);
    let b = op.scaled_rhs(rhs);
    let prec = P3Precond::new(blocks, params, dlu)?;
    let mut res = gmres(&op, Some(&prec), &b, config);
    let polish = polish_iterate(&op, &prec, &b, &mut res, config);
    let nu = blocks.n_u_free;
    let np = blocks.n_p_free;
    let s = params.mu / params.alpha;
    let sol = PoroSolution {
        u: res.x[..nu].to_vec(),
        p: res.x[nu..nu + np].iter().map(|v| s * v).collect(),
    };
    let tag = if dlu {
        PrecondTag::P3Dlu
    } else {
        PrecondTag::P3
    };
    let mut stats = prec.stats();
    stats.polish_iters = polish;
    let mut report = SolveReport::from_gmres(
        tag,
        params,
        blocks.n,
        &res,
        config.tol,
        stats,
        prec.ic_shifted(),
    );
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((sol, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_dof_maps, build_mesh};
    use crate::problems::lame_params;
    use crate::wg::local_weak_ops;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(
        n: usize,
        dim: usize,
        lambda: f64,
        c0: f64,
        dt: f64,
    ) -> (AssembledBlocks, ProblemParams) {
        let mesh = build_mesh(n, dim).unwrap();
        let dm = build_dof_maps(&mesh);
        let ops = local_weak_ops(mesh.h, dim);
        let blocks = crate::assembly::assemble_blocks(&mesh, &dm, &ops);
        let params = lame_params(1.0, lambda, 1.0, c0, 1.0, dt, dim).unwrap();
        (blocks, params)
    }

    #[test]
    fn two_field_operator_symmetric() {
        let (blocks, params) = setup(4, 2, 1.4286, 1.0, 1e-3);
        let op = TwoFieldOp::new(&blocks, &params);
        let n = op.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        let xay: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let yax: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!((xay - yax).abs() <= 1e-12 * xay.abs().max(yax.abs()).max(1.0));
    }

    #[test]
    fn two_field_facet_pressure_touches_only_d_rows() {
        let (blocks, params) = setup(4, 2, 1.4286, 1.0, 1e-3);
        let op = TwoFieldOp::new(&blocks, &params);
        let n = op.nrows();
        let nu = blocks.n_u_free;
        // Basis vector on a facet pressure dof.
        let k = nu + blocks.n_interior + 3;
        let mut x = vec![0.0; n];
        x[k] = 1.0;
        let mut y = vec![0.0; n];
        op.apply(&x, &mut y);
        for (i, v) in y.iter().enumerate().take(nu) {
            assert_eq!(
                *v, 0.0,
                "displacement row {i} touched by facet pressure dof"
            );
        }
    }

    #[test]
    fn three_field_operator_symmetric() {
        let (blocks, params) = setup(3, 2, 1.6667e3, 0.0, 1e-6);
        let op = ThreeFieldOp::new(&blocks, &params);
        let n = op.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        let xay: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let yax: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!((xay - yax).abs() <= 1e-12 * xay.abs().max(yax.abs()).max(1.0));
    }

    #[test]
    fn three_field_first_row_reproduces_two_field_action() {
        // With w = -Mp^{-1} Bcirc u and z = w/eps - (alpha/mu) p_int, the
        // first block row of A3 equals (1/eps) [(eps A1 + A0) u +
        // (alpha eps/mu) B^T p].
        let (blocks, params) = setup(3, 2, 1.4286, 1.0, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let nu = blocks.n_u_free;
        let np = blocks.n_p_free;
        let ne = blocks.n_interior;
        let u: Vec<f64> = (0..nu).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..np).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eps = params.epsilon;
        let am = params.alpha / params.mu;
        let bu = blocks.bcirc.spmv(&u);
        let w: Vec<f64> = bu
            .iter()
            .zip(&blocks.mp_diag)
            .map(|(b, m)| -b / m)
            .collect();
        let mut x = vec![0.0; nu + np + ne];
        x[..nu].copy_from_slice(&u);
        for k in 0..np {
            x[nu + k] = am * p[k];
        }
        for e in 0..ne {
            x[nu + np + e] = w[e] / eps - am * p[e];
        }
        let op = ThreeFieldOp::new(&blocks, &params);
        let mut y = vec![0.0; op.nrows()];
        op.apply(&x, &mut y);
        // Reference: (1/eps)[(eps A1 + A0) u + (alpha eps/mu) Bcirc^T p_int]
        let mut refr = vec![0.0; nu];
        blocks.a1.spmv_into(&u, &mut refr);
        for v in refr.iter_mut() {
            *v *= eps;
        }
        let mut scratch = Vec::new();
        blocks.a0_apply_add(1.0, &u, &mut refr, &mut scratch);
        blocks
            .bcirc
            .spmv_transpose_add(params.alpha * eps / params.mu, &p[..ne], &mut refr);
        for k in 0..nu {
            let got = eps * y[k];
            assert!(
                (got - refr[k]).abs() <= 1e-11 * refr[k].abs().max(1.0),
                "row {k}: {got} vs {}",
                refr[k]
            );
        }
    }

    #[test]
    fn elasticity_block_solver_consistency() {
        // b = (eps A1 + A0) u_random must be recovered.
        let (blocks, params) = setup(4, 2, 1.6667e3, 0.0, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let nu = blocks.n_u_free;
        let u_true: Vec<f64> = (0..nu).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; nu];
        blocks.a1.spmv_into(&u_true, &mut b);
        for v in b.iter_mut() {
            *v *= params.epsilon;
        }
        let mut scratch = Vec::new();
        blocks.a0_apply_add(1.0, &u_true, &mut b, &mut scratch);
        let solver = ElasticityBlockSolver::new(&blocks, &params, SolverConfig::inner()).unwrap();
        let (u, res) = solver.solve(&b);
        assert!(res.converged);
        let err: f64 = u
            .iter()
            .zip(&u_true)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = u_true.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-5, "relative error {}", err / norm);
    }

    #[test]
    fn solve_linearity_in_rhs() {
        let (blocks, params) = setup(4, 2, 1.4286, 0.0, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let nu = blocks.n_u_free;
        let b: Vec<f64> = (0..nu).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = SolverConfig::profile_2d();
        let (u1, r1) = solve_elasticity(&blocks, &params, &b, &cfg).unwrap();
        let c = 3.5;
        let bc: Vec<f64> = b.iter().map(|v| c * v).collect();
        let (u2, r2) = solve_elasticity(&blocks, &params, &bc, &cfg).unwrap();
        assert!(r1.converged && r2.converged);
        // GMRES is scale-invariant: identical iterates up to the factor.
        assert_eq!(r1.iterations, r2.iterations);
        for (a, b) in u1.iter().zip(&u2) {
            assert!((c * a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn block_triangular_exact_schur_small() {
        // With Shat = S, GMRES on the preconditioned system converges in
        // <= 3 iterations (minimal polynomial degree <= 2).
        use crate::dense::{DMat, Lu};
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let (n1, n2) = (7, 5);
        let mut a = DMat::zeros(n1, n1);
        for i in 0..n1 {
            for j in 0..n1 {
                a[(i, j)] = rng.random_range(-1.0..1.0);
            }
            a[(i, i)] += n1 as f64;
        }
        let mut bt = DMat::zeros(n1, n2);
        let mut c = DMat::zeros(n2, n1);
        let mut d = DMat::zeros(n2, n2);
        for v in bt.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in c.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for i in 0..n2 {
            d[(i, i)] = 1.0 + rng.random_range(0.0..1.0);
        }
        let ainv = Lu::factor(&a).unwrap().inverse();
        let s = {
            let mut s = d.clone();
            let ca_bt = c.matmul(&ainv).matmul(&bt);
            s.add_scaled(1.0, &ca_bt);
            s
        };
        let sinv = Lu::factor(&s).unwrap().inverse();
        let prec = make_block_triangular(&ainv, &bt, &sinv);
        // Full saddle operator.
        let n = n1 + n2;
        let mut full = DMat::zeros(n, n);
        full.set_block(0, 0, &a);
        full.set_block(0, n1, &bt);
        full.set_block(n1, 0, &c);
        let mut md = d.clone();
        md.scale(-1.0);
        full.set_block(n1, n1, &md);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = SolverConfig::new(1e-10, 20, 100, ResidualMeasure::Preconditioned);
        let res = gmres(&full, Some(&prec), &b, &cfg);
        assert!(res.converged);
        assert!(res.iterations <= 3, "took {}", res.iterations);
    }
}
