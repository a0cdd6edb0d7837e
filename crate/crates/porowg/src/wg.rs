//! Local weak Galerkin machinery on one element: the lowest-order
//! Arbogast-Correa (2D) / Arbogast-Tao (3D) vector basis, its Gram matrix,
//! and the discrete weak gradient/divergence as small dense matrices.
//!
//! Elements are axis-aligned cubes of side `h` centered at the centroid, so
//! every Piola image of the reference curl generators is a scalar multiple
//! of the centered monomial vectors; the generators here are those centered
//! monomials directly, with the divergence-free ones scaled by `1/h` to
//! keep the Gram matrix uniformly conditioned under refinement.
//!
//! The local scalar dof order on an element is `[interior, facet_0, ...,
//! facet_{2d-1}]` with facets in the `2*axis + side` order used by
//! [`crate::mesh::Element::facets`]. Vector dofs are entity-major,
//! component-minor.

use crate::dense::{Cholesky, DMat};

/// 3-point Gauss-Legendre rule on [-1, 1] (exact through degree 5).
pub const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Tensor quadrature points over an element of side `h` centered at the
/// origin: `(local offset, weight)`.
pub fn element_quadrature(h: f64, dim: usize) -> Vec<([f64; 3], f64)> {
    let mut pts = Vec::new();
    let half = 0.5 * h;
    match dim {
        2 => {
            for &(x, wx) in &GAUSS3 {
                for &(y, wy) in &GAUSS3 {
                    pts.push(([x * half, y * half, 0.0], wx * wy * half * half));
                }
            }
        }
        3 => {
            for &(x, wx) in &GAUSS3 {
                for &(y, wy) in &GAUSS3 {
                    for &(z, wz) in &GAUSS3 {
                        pts.push((
                            [x * half, y * half, z * half],
                            wx * wy * wz * half * half * half,
                        ));
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    pts
}

/// Quadrature on the facet with normal `axis` and side `side` (0 lower, 1
/// upper) of an element of side `h` centered at the origin: `(local offset
/// from the element centroid, weight)`.
pub fn facet_quadrature(h: f64, dim: usize, axis: usize, side: usize) -> Vec<([f64; 3], f64)> {
    let half = 0.5 * h;
    let fixed = if side == 1 { half } else { -half };
    let mut pts = Vec::new();
    match dim {
        2 => {
            let t_axis = 1 - axis;
            for &(t, wt) in &GAUSS3 {
                let mut p = [0.0; 3];
                p[axis] = fixed;
                p[t_axis] = t * half;
                pts.push((p, wt * half));
            }
        }
        3 => {
            let others: [usize; 2] = match axis {
                0 => [1, 2],
                1 => [0, 2],
                _ => [0, 1],
            };
            for &(t, wt) in &GAUSS3 {
                for &(s, ws) in &GAUSS3 {
                    let mut p = [0.0; 3];
                    p[axis] = fixed;
                    p[others[0]] = t * half;
                    p[others[1]] = s * half;
                    pts.push((p, wt * ws * half * half));
                }
            }
        }
        _ => unreachable!(),
    }
    pts
}

/// Lowest-order AC0 (2D) / AT0 (3D) local vector basis on an element of
/// side `h`, with its Gram matrix of L2 inner products over the element.
pub struct LocalBasis {
    pub dim: usize,
    pub h: f64,
    /// Basis dimension: 4 in 2D, 6 in 3D.
    pub m: usize,
    pub gram: DMat,
}

impl LocalBasis {
    /// Basis vector `k` evaluated at the local point `p` (offset from the
    /// element centroid).
    pub fn value(&self, k: usize, p: [f64; 3]) -> [f64; 3] {
        let d = self.dim;
        let h = self.h;
        if k < d {
            let mut v = [0.0; 3];
            v[k] = 1.0;
            v
        } else if k == d {
            // Centered monomial vector [X, Y(, Z)], divergence d.
            let mut v = [0.0; 3];
            v[..d].copy_from_slice(&p[..d]);
            v
        } else {
            // Divergence-free curl-type generators, scaled by 1/h.
            match (d, k) {
                (2, 3) => [p[0] / h, -p[1] / h, 0.0],
                (3, 4) => [p[0] / h, -p[1] / h, 0.0],
                (3, 5) => [0.0, p[1] / h, -p[2] / h],
                _ => unreachable!(),
            }
        }
    }

    /// Divergence of basis vector `k` (constant on the element).
    pub fn divergence(&self, k: usize) -> f64 {
        if k == self.dim {
            self.dim as f64
        } else {
            0.0
        }
    }
}

/// Build the local basis and its Gram matrix (3-point tensor Gauss).
pub fn local_basis(h: f64, dim: usize) -> LocalBasis {
    assert!(h > 0.0, "element size must be positive");
    assert!(dim == 2 || dim == 3);
    let m = if dim == 2 { 4 } else { 6 };
    let mut basis = LocalBasis {
        dim,
        h,
        m,
        gram: DMat::zeros(m, m),
    };
    let quad = element_quadrature(h, dim);
    let mut gram = DMat::zeros(m, m);
    for &(p, w) in &quad {
        for i in 0..m {
            let vi = basis.value(i, p);
            for j in i..m {
                let vj = basis.value(j, p);
                let dotv = vi[0] * vj[0] + vi[1] * vj[1] + vi[2] * vj[2];
                gram[(i, j)] += w * dotv;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    basis.gram = gram;
    basis
}

/// Local weak operators on one (uniform-mesh) element.
///
/// `gs` maps the `1 + 2d` scalar dofs of an element to the `m` basis
/// coefficients of the discrete weak gradient. `dv` is the weak-divergence
/// row over the `d*(1 + 2d)` vector dofs (entity-major). `k_scalar` is the
/// assembled local matrix `gs^T G gs`, i.e. the element contribution of
/// `(grad_w .  , grad_w . )`; the vector stiffness applies it per
/// component.
pub struct LocalWeakOps {
    pub dim: usize,
    pub h: f64,
    pub n_scalar: usize,
    pub gs: DMat,
    pub dv: Vec<f64>,
    pub k_scalar: DMat,
}

/// Discrete weak gradient of the scalar dofs: for each local dof pattern,
/// solve `G c = r` with `r_k = <p_bnd, w_k . n>_bndE - (p_int, div w_k)_E`.
pub fn weak_gradient_scalar(basis: &LocalBasis) -> DMat {
    let d = basis.dim;
    let m = basis.m;
    let nloc = 1 + 2 * d;
    let h = basis.h;
    let vol = h.powi(d as i32);
    let chol = Cholesky::factor(&basis.gram).expect("local Gram matrix must be SPD");
    let mut gs = DMat::zeros(m, nloc);
    // Interior dof: r_k = -(1, div w_k).
    let mut r = vec![0.0; m];
    for (k, rk) in r.iter_mut().enumerate() {
        *rk = -basis.divergence(k) * vol;
    }
    let c = chol.solve(&r);
    for k in 0..m {
        gs[(k, 0)] = c[k];
    }
    // Facet dofs: r_k = integral over the facet of w_k . n_outward.
    for axis in 0..d {
        for side in 0..2 {
            let ell = 2 * axis + side;
            let sign = if side == 1 { 1.0 } else { -1.0 };
            let quad = facet_quadrature(h, d, axis, side);
            let mut r = vec![0.0; m];
            for &(p, w) in &quad {
                for (k, rk) in r.iter_mut().enumerate() {
                    *rk += w * sign * basis.value(k, p)[axis];
                }
            }
            let c = chol.solve(&r);
            for k in 0..m {
                gs[(k, 1 + ell)] = c[k];
            }
        }
    }
    gs
}

/// Discrete weak gradient of the vector dofs: the row-wise application of
/// the scalar construction to each displacement component. Returns the
/// `d*m` by `d*(1+2d)` matrix mapping entity-major vector dofs to the
/// component-major weak-gradient coefficients (row block `c` holds the
/// AC0/AT0 coefficients of component `c`).
pub fn weak_gradient_vector(basis: &LocalBasis) -> DMat {
    let d = basis.dim;
    let m = basis.m;
    let nloc = 1 + 2 * d;
    let gs = weak_gradient_scalar(basis);
    let mut gv = DMat::zeros(d * m, d * nloc);
    for comp in 0..d {
        for k in 0..m {
            for j in 0..nloc {
                gv[(comp * m + k, j * d + comp)] = gs[(k, j)];
            }
        }
    }
    gv
}

/// Discrete weak divergence row over the local vector dofs: only facet
/// dofs contribute, `(1/|E|) * |e| * n_outward` per component.
pub fn weak_divergence(basis: &LocalBasis) -> Vec<f64> {
    let d = basis.dim;
    let h = basis.h;
    let vol = h.powi(d as i32);
    let emeas = h.powi(d as i32 - 1);
    let mut dv = vec![0.0; d * (1 + 2 * d)];
    for axis in 0..d {
        for side in 0..2 {
            let ell = 2 * axis + side;
            let sign = if side == 1 { 1.0 } else { -1.0 };
            dv[(1 + ell) * d + axis] = sign * emeas / vol;
        }
    }
    dv
}

/// Build all local weak operators for elements of side `h`.
pub fn local_weak_ops(h: f64, dim: usize) -> LocalWeakOps {
    let basis = local_basis(h, dim);
    let gs = weak_gradient_scalar(&basis);
    let dv = weak_divergence(&basis);
    let k_scalar = gs.transpose().matmul(&basis.gram).matmul(&gs);
    LocalWeakOps {
        dim,
        h,
        n_scalar: 1 + 2 * dim,
        gs,
        dv,
        k_scalar,
    }
}

impl LocalWeakOps {
    /// Local vector dof index of `(entity, comp)`, entity 0 = interior,
    /// `1 + ell` = facet `ell`.
    pub fn vdof(&self, entity: usize, comp: usize) -> usize {
        entity * self.dim + comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_dimensions() {
        assert_eq!(local_basis(0.5, 2).m, 4);
        assert_eq!(local_basis(0.5, 3).m, 6);
    }

    #[test]
    fn gram_constants_and_orthogonality() {
        for (dim, h) in [(2usize, 0.25f64), (3, 0.5)] {
            let b = local_basis(h, dim);
            let vol = h.powi(dim as i32);
            for k in 0..dim {
                assert!((b.gram[(k, k)] - vol).abs() < 1e-14 * vol);
            }
            // Constants vs centered monomial vector: odd moments vanish.
            for k in 0..dim {
                assert!(b.gram[(k, dim)].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_spd_and_uniform_conditioning() {
        // After rescaling the monomial generator by 1/h, the Gram matrix is
        // proportional to a fixed matrix, so its condition number is
        // h-independent.
        let cond = |h: f64, dim: usize| -> f64 {
            let b = local_basis(h, dim);
            let mut g = b.gram.clone();
            let m = b.m;
            let mut scale = vec![1.0; m];
            scale[dim] = 1.0 / h;
            for i in 0..m {
                for j in 0..m {
                    g[(i, j)] *= scale[i] * scale[j];
                }
            }
            let ev = crate::dense::sym_eigen(&g, false).values;
            assert!(ev[0] > 0.0, "Gram must be SPD");
            ev[m - 1] / ev[0]
        };
        for dim in [2usize, 3] {
            let c1 = cond(1.0, dim);
            let c2 = cond(1.0 / 64.0, dim);
            assert!(
                (c1 / c2 - 1.0).abs() < 1e-10,
                "conditioning drifts: {c1} vs {c2}"
            );
        }
    }

    #[test]
    fn weak_gradient_constants_vanish() {
        for dim in [2usize, 3] {
            let b = local_basis(0.125, dim);
            let gs = weak_gradient_scalar(&b);
            // p_int = p_bnd = 1 everywhere.
            let ones = vec![1.0; 1 + 2 * dim];
            for k in 0..b.m {
                let mut c = 0.0;
                for (j, v) in ones.iter().enumerate() {
                    c += gs[(k, j)] * v;
                }
                assert!(
                    c.abs() < 1e-13,
                    "constant field must have zero weak gradient"
                );
            }
        }
    }

    #[test]
    fn weak_gradient_exact_on_linears() {
        // dofs of the linear field x: interior = 0 (centered), facet
        // averages = X at facet midpoints. Expected coefficients: 1 on the
        // x-constant generator, 0 elsewhere (weak gradient = (1,0,..)).
        for dim in [2usize, 3] {
            for h in [1.0, 0.25, 1.0 / 64.0] {
                let b = local_basis(h, dim);
                let gs = weak_gradient_scalar(&b);
                let mut dofs = vec![0.0; 1 + 2 * dim];
                for axis in 0..dim {
                    for side in 0..2 {
                        let ell = 2 * axis + side;
                        // facet midpoint offset along x
                        dofs[1 + ell] = if axis == 0 {
                            if side == 1 {
                                0.5 * h
                            } else {
                                -0.5 * h
                            }
                        } else {
                            0.0
                        };
                    }
                }
                for k in 0..b.m {
                    let mut c = 0.0;
                    for (j, v) in dofs.iter().enumerate() {
                        c += gs[(k, j)] * v;
                    }
                    let expect = if k == 0 { 1.0 } else { 0.0 };
                    assert!(
                        (c - expect).abs() < 1e-12,
                        "dim {dim} h {h}: coefficient {k} is {c}, want {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn weak_gradient_single_facet_oracle() {
        // Independent 4x4 dense solve with exact monomial integrals:
        // G = diag(h^2, h^2, h^4/6, h^2/6); right-facet rhs
        // r = (h, 0, h^2/2, h/2) => c = (1/h, 0, 3/h^2, 3/h).
        for h in [1.0f64, 0.5, 0.125] {
            let b = local_basis(h, 2);
            let gs = weak_gradient_scalar(&b);
            // right facet = axis 0, side 1 => local dof 1 + 1 = 2
            let col = 1 + 1;
            let expect = [1.0 / h, 0.0, 3.0 / (h * h), 3.0 / h];
            for k in 0..4 {
                assert!(
                    (gs[(k, col)] - expect[k]).abs()
                        < 1e-11 * expect.iter().fold(1.0_f64, |a, b| a.max(b.abs())),
                    "h {h}: c[{k}] = {} want {}",
                    gs[(k, col)],
                    expect[k]
                );
            }
        }
    }

    #[test]
    fn weak_gradient_vector_blocks() {
        // Per-component block structure: an arbitrary unit vector dof
        // produces the scalar coefficients in its component's row block
        // and zeros elsewhere; constants map to zero; facet traces of
        // v = (x, 0) give the gradient [[1,0],[0,0]].
        for dim in [2usize, 3] {
            let h = 0.5;
            let b = local_basis(h, dim);
            let gs = weak_gradient_scalar(&b);
            let gv = weak_gradient_vector(&b);
            let nloc = 1 + 2 * dim;
            for ent in 0..nloc {
                for comp in 0..dim {
                    // unit dof (ent, comp)
                    for row in 0..dim * b.m {
                        let got = gv[(row, ent * dim + comp)];
                        let expect = if row / b.m == comp {
                            gs[(row % b.m, ent)]
                        } else {
                            0.0
                        };
                        assert_eq!(got, expect);
                    }
                }
            }
            // v = (x, 0, ...): x-component coefficients equal the scalar
            // linear-exactness pattern, other components vanish.
            let mut dofs = vec![0.0; dim * nloc];
            for axis in 0..dim {
                for side in 0..2 {
                    let ell = 2 * axis + side;
                    if axis == 0 {
                        dofs[(1 + ell) * dim] = if side == 1 { 0.5 * h } else { -0.5 * h };
                    }
                }
            }
            for row in 0..dim * b.m {
                let mut c = 0.0;
                for (j, v) in dofs.iter().enumerate() {
                    c += gv[(row, j)] * v;
                }
                let expect = if row == 0 { 1.0 } else { 0.0 };
                assert!((c - expect).abs() < 1e-12, "row {row}: {c} vs {expect}");
            }
        }
    }

    #[test]
    fn weak_divergence_examples() {
        // v = (x, 0): facet traces give divergence 1.
        for dim in [2usize, 3] {
            let h = 0.25;
            let b = local_basis(h, dim);
            let dv = weak_divergence(&b);
            let ops = local_weak_ops(h, dim);
            let mut v = vec![0.0; dim * (1 + 2 * dim)];
            for axis in 0..dim {
                for side in 0..2 {
                    let ell = 2 * axis + side;
                    let x_mid = if axis == 0 {
                        if side == 1 {
                            0.5 * h
                        } else {
                            -0.5 * h
                        }
                    } else {
                        0.0
                    };
                    v[ops.vdof(1 + ell, 0)] = x_mid;
                }
            }
            let div: f64 = dv.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((div - 1.0).abs() < 1e-13);
            // Constant facet field telescopes to zero.
            let mut c = vec![0.0; dim * (1 + 2 * dim)];
            for ent in 0..=(2 * dim) {
                for comp in 0..dim {
                    c[ops.vdof(ent, comp)] = 3.0_f64;
                }
            }
            let div_c: f64 = dv.iter().zip(&c).map(|(a, b)| a * b).sum();
            assert!(div_c.abs() < 1e-13);
        }
    }

    #[test]
    fn weak_divergence_unit_facet_h1() {
        // h = 1, d = 2: a unit normal trace on one facet gives |e|/|E| = 1.
        let b = local_basis(1.0, 2);
        let dv = weak_divergence(&b);
        let ops = local_weak_ops(1.0, 2);
        let mut v = vec![0.0; 2 * 5];
        v[ops.vdof(1 + 1, 0)] = 1.0; // +x facet, x component (outward normal +x)
        let div: f64 = dv.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((div - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weak_divergence_interior_columns_zero() {
        for dim in [2usize, 3] {
            let b = local_basis(0.5, dim);
            let dv = weak_divergence(&b);
            for comp in 0..dim {
                assert_eq!(dv[comp], 0.0);
            }
        }
    }
}
