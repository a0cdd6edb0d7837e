//! Global assembly of the fully discrete WG scheme: sparse blocks over the
//! free dofs, Dirichlet elimination by column removal, and right-hand
//! sides.
//!
//! The physical system at each implicit Euler step reads
//!
//! ```text
//! [ mu A1 + (lambda+mu) A0   alpha B^T ] [u]   [b1]
//! [ alpha B                  -D        ] [p] = [b2]
//! ```
//!
//! with `A0 = Bcirc^T (Mp)^{-1} Bcirc`, `B = [Bcirc; 0]` (facet-pressure
//! rows vanish), and `D = c0 [Mp 0; 0 0] + kappa*dt*Ap`. `A0` is never
//! formed in the solver path; it is applied matrix-free through `Bcirc` and
//! the diagonal interior pressure mass. The explicit `a0_direct` assembled
//! from the weak-divergence outer products exists for the dense oracle and
//! for export.

use crate::mesh::{DofMap, Mesh};
use crate::sparse::CsrMatrix;
use crate::wg::{element_quadrature, facet_quadrature, LocalWeakOps};
use crate::{Error, Result};

/// All physical and discretization scalars of one parameter point.
#[derive(Clone, Copy, Debug)]
pub struct ProblemParams {
    /// Elastic modulus E.
    pub e_modulus: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Poisson ratio.
    pub nu: f64,
    /// Locking parameter eps = mu / (lambda + mu).
    pub epsilon: f64,
    /// Biot-Willis constant (1 in all experiments).
    pub alpha: f64,
    /// Constrained storage capacity, >= 0.
    pub c0: f64,
    /// Permeability, > 0.
    pub kappa: f64,
    /// Time step, > 0.
    pub dt: f64,
    pub dim: usize,
}

impl ProblemParams {
    /// Validate the invariants: positivity and the Lame relations
    /// `lambda = nu E / ((1-2nu)(1+nu))`, `mu = E / (2(1+nu))` to 1e-10
    /// relative.
    pub fn validate(&self) -> Result<()> {
        if self.mu <= 0.0 || self.lambda <= 0.0 {
            return Err(Error::InvalidArgument(
                "Lame constants must be positive".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        if self.c0 < 0.0 || self.kappa <= 0.0 || self.dt <= 0.0 {
            return Err(Error::InvalidArgument(
                "c0 >= 0, kappa > 0, dt > 0 required".into(),
            ));
        }
        // lambda = nu E / ((1-2nu)(1+nu)) checked in the equivalent
        // polynomial form 2 lambda nu^2 + (E+lambda) nu - lambda = 0; the
        // direct form amplifies the rounding of nu by lambda/(1-2nu) and
        // cannot meet a 1e-10 relative bound in the locking regime.
        let quad = 2.0 * self.lambda * self.nu * self.nu + (self.e_modulus + self.lambda) * self.nu
            - self.lambda;
        let mu_ref = self.e_modulus / (2.0 * (1.0 + self.nu));
        if quad.abs() > 1e-10 * self.lambda || (self.mu - mu_ref).abs() > 1e-10 * mu_ref.abs() {
            return Err(Error::InvalidArgument(
                "inconsistent (E, nu, lambda, mu) combination".into(),
            ));
        }
        let eps_ref = self.mu / (self.lambda + self.mu);
        if (self.epsilon - eps_ref).abs() > 1e-10 * eps_ref {
            return Err(Error::InvalidArgument("epsilon != mu/(lambda+mu)".into()));
        }
        Ok(())
    }
}

/// Data functions a problem must provide for assembly: forcing, source,
/// and Dirichlet traces.
pub trait ProblemData {
    fn dim(&self) -> usize;
    /// Body force f(x, t).
    fn forcing(&self, x: [f64; 3], t: f64) -> [f64; 3];
    /// Fluid source s(x, t).
    fn source(&self, x: [f64; 3], t: f64) -> f64;
    /// Dirichlet displacement trace on the boundary.
    fn dirichlet_u(&self, x: [f64; 3], t: f64) -> [f64; 3];
    /// Dirichlet pressure trace on the boundary.
    fn dirichlet_p(&self, x: [f64; 3], t: f64) -> f64;
}

/// Global WG matrices over the free dofs, plus the free-by-constrained
/// coupling blocks used for Dirichlet elimination. The parameter-dependent
/// blocks `D` and `Dtt` are derived on demand so one assembly serves a
/// whole parameter sweep.
#[derive(Clone, Debug)]
pub struct AssembledBlocks {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    /// Interior pressure dofs (= element count); the free pressure vector
    /// is partitioned `[0..n_interior | n_interior..n_p_free]` into
    /// interior and facet parts.
    pub n_interior: usize,
    pub n_p_free: usize,
    pub n_u_free: usize,
    /// Vector stiffness (grad_w, grad_w) over free displacement dofs.
    pub a1: CsrMatrix,
    /// Free-by-constrained coupling of A1.
    pub a1_bc: CsrMatrix,
    /// Interior-pressure by free-displacement block; row q of `Bcirc u` is
    /// `-(div_w u, q)` summed over elements.
    pub bcirc: CsrMatrix,
    /// Interior-pressure by constrained-displacement coupling.
    pub bcirc_bc: CsrMatrix,
    /// Interior pressure mass diagonal, entries h^d.
    pub mp_diag: Vec<f64>,
    /// Pressure weak-Laplacian stiffness over free pressure dofs.
    pub ap: CsrMatrix,
    /// Free-by-constrained coupling of Ap.
    pub ap_bc: CsrMatrix,
    /// Explicit `A0` assembled from weak-divergence outer products
    /// (independent of `bcirc`; oracle and export only).
    pub a0_direct: CsrMatrix,
}

impl AssembledBlocks {
    /// `D = c0 [Mp 0; 0 0] + kappa*dt*Ap` over the free pressure dofs.
    pub fn d_matrix(&self, params: &ProblemParams) -> CsrMatrix {
        self.pressure_block(params.c0, params.kappa * params.dt)
    }

    /// `Dtt = D + (alpha^2 eps / mu) [Mp 0; 0 0]` (the three-field (2,2)
    /// block).
    pub fn d_tilde_tilde(&self, params: &ProblemParams) -> CsrMatrix {
        let coef = params.c0 + params.alpha * params.alpha * params.epsilon / params.mu;
        self.pressure_block(coef, params.kappa * params.dt)
    }

    fn pressure_block(&self, mass_coef: f64, stiff_coef: f64) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.ap.nnz() + self.n_interior);
        for (e, &m) in self.mp_diag.iter().enumerate() {
            let v = mass_coef * m;
            if v != 0.0 {
                t.push((e, e, v));
            }
        }
        for i in 0..self.n_p_free {
            for (j, v) in self.ap.row_iter(i) {
                t.push((i, j, stiff_coef * v));
            }
        }
        CsrMatrix::from_triplets(self.n_p_free, self.n_p_free, &t)
    }

    /// `y += s * A0 x`, matrix-free via `Bcirc^T Mp^{-1} Bcirc`.
    pub fn a0_apply_add(&self, s: f64, x: &[f64], y: &mut [f64], scratch: &mut Vec<f64>) {
        scratch.resize(self.n_interior, 0.0);
        self.bcirc.spmv_into(x, scratch);
        for (w, m) in scratch.iter_mut().zip(&self.mp_diag) {
            *w /= m;
        }
        self.bcirc.spmv_transpose_add(s, scratch, y);
    }

    /// Full `B = [Bcirc; 0]` over free pressure rows (facet-pressure rows
    /// are structurally zero).
    pub fn b_full(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.n_p_free, self.n_u_free, &self.bcirc.triplets())
    }
}

/// Assemble every parameter-independent global block over the free dofs.
pub fn assemble_blocks(mesh: &Mesh, dm: &DofMap, ops: &LocalWeakOps) -> AssembledBlocks {
    let d = mesh.dim;
    let nloc = ops.n_scalar; // 1 + 2d local scalar dofs
    let vol = mesh.h.powi(d as i32);
    let ne = mesh.n_elements();
    let n_p_free = dm.n_scalar_free;
    let n_u_free = dm.n_vector_free();
    let n_p_bc = dm.scalar_constrained.len();
    let n_u_bc = dm.n_vector_constrained();

    let mut t_a1 = Vec::new();
    let mut t_a1_bc = Vec::new();
    let mut t_ap = Vec::new();
    let mut t_ap_bc = Vec::new();
    let mut t_b = Vec::new();
    let mut t_b_bc = Vec::new();
    let mut t_a0 = Vec::new();

    let mut gdofs = vec![0usize; nloc];
    for elem in &mesh.elements {
        gdofs[0] = dm.interior_dof(elem.index);
        for (ell, &f) in elem.facets.iter().enumerate() {
            gdofs[1 + ell] = dm.facet_dof(f);
        }

        // Scalar stiffness scatter: Ap on pressure dofs, and the same
        // local matrix per displacement component for A1.
        for i in 0..nloc {
            let gi = gdofs[i];
            let Some(ri) = dm.scalar_free[gi] else {
                continue;
            };
            for j in 0..nloc {
                let gj = gdofs[j];
                let v = ops.k_scalar[(i, j)];
                if v == 0.0 {
                    continue;
                }
                match dm.scalar_free[gj] {
                    Some(cj) => t_ap.push((ri, cj, v)),
                    None => {
                        let cj = dm.scalar_constrained_index[gj].unwrap();
                        t_ap_bc.push((ri, cj, v));
                    }
                }
                for comp in 0..d {
                    let rv = d * ri + comp;
                    match dm.scalar_free[gj] {
                        Some(cj) => t_a1.push((rv, d * cj + comp, v)),
                        None => {
                            let cj = dm.scalar_constrained_index[gj].unwrap();
                            t_a1_bc.push((rv, d * cj + comp, v));
                        }
                    }
                }
            }
        }

        // Bcirc row: -(div_w u, q) on element `e` gives -|E| * dv.
        // A0 scatter: |E| * dv dv^T.
        for ent_i in 0..nloc {
            for ci in 0..d {
                let vi = ops.dv[ops.vdof(ent_i, ci)];
                if vi == 0.0 {
                    continue;
                }
                let gi = gdofs[ent_i];
                match dm.vector_free(gi, ci) {
                    Some(col) => t_b.push((elem.index, col, -vol * vi)),
                    None => {
                        let col = dm.vector_constrained(gi, ci).unwrap();
                        t_b_bc.push((elem.index, col, -vol * vi));
                    }
                }
                let Some(row_free) = dm.vector_free(gi, ci) else {
                    continue;
                };
                for ent_j in 0..nloc {
                    for cj in 0..d {
                        let vj = ops.dv[ops.vdof(ent_j, cj)];
                        if vj == 0.0 {
                            continue;
                        }
                        if let Some(col_free) = dm.vector_free(gdofs[ent_j], cj) {
                            t_a0.push((row_free, col_free, vol * vi * vj));
                        }
                    }
                }
            }
        }
    }

    AssembledBlocks {
        dim: d,
        n: mesh.n,
        h: mesh.h,
        n_interior: ne,
        n_p_free,
        n_u_free,
        a1: CsrMatrix::from_triplets(n_u_free, n_u_free, &t_a1),
        a1_bc: CsrMatrix::from_triplets(n_u_free, n_u_bc, &t_a1_bc),
        bcirc: CsrMatrix::from_triplets(ne, n_u_free, &t_b),
        bcirc_bc: CsrMatrix::from_triplets(ne, n_u_bc, &t_b_bc),
        mp_diag: vec![vol; ne],
        ap: CsrMatrix::from_triplets(n_p_free, n_p_free, &t_ap),
        ap_bc: CsrMatrix::from_triplets(n_p_free, n_p_bc, &t_ap_bc),
        a0_direct: CsrMatrix::from_triplets(n_u_free, n_u_free, &t_a0),
    }
}

/// Values of the constrained dofs: facet averages of the Dirichlet data
/// (3-point Gauss per facet axis), in constrained-index order.
#[derive(Clone, Debug)]
pub struct BoundaryValues {
    /// Constrained displacement dof values (entity-major, component-minor).
    pub u: Vec<f64>,
    /// Constrained pressure dof values.
    pub p: Vec<f64>,
}

pub fn boundary_values(
    mesh: &Mesh,
    dm: &DofMap,
    problem: &dyn ProblemData,
    t: f64,
) -> BoundaryValues {
    let d = mesh.dim;
    let nbc = dm.scalar_constrained.len();
    let mut u = vec![0.0; d * nbc];
    let mut p = vec![0.0; nbc];
    for (k, &sdof) in dm.scalar_constrained.iter().enumerate() {
        let f = sdof - dm.n_elements;
        let facet = &mesh.facets[f];
        // Quadrature points relative to the facet midpoint: reuse the
        // element-facet rule with the normal offset removed.
        let quad = facet_quadrature(mesh.h, d, facet.axis, 1);
        let meas = facet.measure;
        let mut avg_u = [0.0f64; 3];
        let mut avg_p = 0.0f64;
        for &(off, w) in &quad {
            let mut x = facet.midpoint;
            for c in 0..d {
                if c != facet.axis {
                    x[c] += off[c];
                }
            }
            let uv = problem.dirichlet_u(x, t);
            for c in 0..d {
                avg_u[c] += w * uv[c];
            }
            avg_p += w * problem.dirichlet_p(x, t);
        }
        for c in 0..d {
            u[d * k + c] = avg_u[c] / meas;
        }
        p[k] = avg_p / meas;
    }
    BoundaryValues { u, p }
}

/// Previous time-step state for the implicit Euler right-hand side.
#[derive(Clone, Debug)]
pub struct TimeState {
    /// Free displacement dofs u^{n-1}.
    pub u_free: Vec<f64>,
    /// Constrained displacement dof values at t_{n-1}.
    pub u_bc: Vec<f64>,
    /// Interior pressure dofs p^{o,n-1}.
    pub p_interior: Vec<f64>,
}

impl TimeState {
    pub fn zero(blocks: &AssembledBlocks, n_u_bc: usize) -> TimeState {
        TimeState {
            u_free: vec![0.0; blocks.n_u_free],
            u_bc: vec![0.0; n_u_bc],
            p_interior: vec![0.0; blocks.n_interior],
        }
    }
}

/// Right-hand side of the physical system over free dofs, with all
/// Dirichlet couplings folded in.
#[derive(Clone, Debug)]
pub struct Rhs {
    pub b1: Vec<f64>,
    /// Free pressure rows; the facet part carries only Dirichlet coupling
    /// (the load part is `[b2_interior; 0]`).
    pub b2: Vec<f64>,
}

/// Assemble `(b1, b2)` of the fully discrete scheme at time `t`:
/// `b1 = (f^n, v_int)` and
/// `b2_int = -dt (s^n, q) - alpha (div_w u^{n-1}, q) - c0 (p^{o,n-1}, q)`,
/// plus the eliminated-boundary contributions at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_rhs(
    mesh: &Mesh,
    _dm: &DofMap,
    blocks: &AssembledBlocks,
    problem: &dyn ProblemData,
    params: &ProblemParams,
    t: f64,
    prev: &TimeState,
    bc: &BoundaryValues,
) -> Rhs {
    let d = mesh.dim;
    let mut b1 = vec![0.0; blocks.n_u_free];
    let mut b2 = vec![0.0; blocks.n_p_free];
    let quad = element_quadrature(mesh.h, d);

    for elem in &mesh.elements {
        // Interior load (f, v) and source (s, q).
        let mut fint = [0.0f64; 3];
        let mut sint = 0.0f64;
        for &(off, w) in &quad {
            let mut x = elem.centroid;
            for c in 0..d {
                x[c] += off[c];
            }
            let fv = problem.forcing(x, t);
            for c in 0..d {
                fint[c] += w * fv[c];
            }
            sint += w * problem.source(x, t);
        }
        let e = elem.index;
        for c in 0..d {
            b1[d * e + c] += fint[c];
        }
        b2[e] += -params.dt * sint;
    }

    // Previous-state terms: -alpha (div_w u^{n-1}, q) = +alpha (Bcirc u)_q,
    // and -c0 (p^{o,n-1}, q).
    blocks.bcirc.spmv_add(
        params.alpha,
        &prev.u_free,
        &mut b2[..blocks.n_interior].as_mut(),
    );
    blocks.bcirc_bc.spmv_add(
        params.alpha,
        &prev.u_bc,
        &mut b2[..blocks.n_interior].as_mut(),
    );
    for e in 0..blocks.n_interior {
        b2[e] -= params.c0 * blocks.mp_diag[e] * prev.p_interior[e];
    }

    // Dirichlet elimination at time t: move coupling columns to the rhs.
    // Displacement rows: b1 -= (mu A1 + (lambda+mu) A0)_fc * u_bc.
    blocks.a1_bc.spmv_add(-params.mu, &bc.u, &mut b1);
    let mut bu = blocks.bcirc_bc.spmv(&bc.u);
    for (w, m) in bu.iter_mut().zip(&blocks.mp_diag) {
        *w /= m;
    }
    blocks
        .bcirc
        .spmv_transpose_add(-(params.lambda + params.mu), &bu, &mut b1);
    // (alpha B^T)_fc is zero: facet-pressure columns of B^T vanish.

    // Pressure rows: b2 -= alpha Bcirc_bc u_bc; b2 += kappa dt Ap_bc p_bc.
    blocks
        .bcirc_bc
        .spmv_add(-params.alpha, &bc.u, &mut b2[..blocks.n_interior].as_mut());
    blocks
        .ap_bc
        .spmv_add(params.kappa * params.dt, &bc.p, &mut b2);

    Rhs { b1, b2 }
}
