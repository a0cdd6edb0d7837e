//! Uniform axis-aligned quadrilateral/hexahedral meshes of the unit
//! square/cube, and degree-of-freedom maps for the lowest-order WG spaces.
//!
//! Numbering is lexicographic and fully deterministic: elements by
//! coordinates, facets grouped by normal axis and then by coordinates.
//! Every facet normal is the positive axis unit vector, pointing from the
//! lower-index adjacent element to the higher-index one.

use crate::{Error, Result};

/// One mesh element (axis-aligned square/cube of side `h`).
#[derive(Clone, Debug)]
pub struct Element {
    pub index: usize,
    pub centroid: [f64; 3],
    /// Facet ids in local order `2*axis + side` (side 0 = lower face on
    /// that axis, 1 = upper face).
    pub facets: Vec<usize>,
}

/// One mesh facet (edge in 2D, face in 3D).
#[derive(Clone, Debug)]
pub struct Facet {
    pub index: usize,
    pub midpoint: [f64; 3],
    /// Facet measure |e| = h^(d-1).
    pub measure: f64,
    /// Normal axis (0 = x, 1 = y, 2 = z); the normal is +e_axis.
    pub axis: usize,
    /// Adjacent elements: `[lower, upper]` along the axis; `None` on the
    /// boundary side.
    pub elems: [Option<usize>; 2],
    pub boundary: bool,
}

/// Uniform mesh of the unit domain `(0,1)^dim` with `n` subdivisions per
/// axis.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub elements: Vec<Element>,
    pub facets: Vec<Facet>,
}

impl Mesh {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn n_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.boundary).count()
    }

    /// Outward normal sign of `facet` as seen from `elem`: +1 when the
    /// facet normal (+axis) points out of the element.
    pub fn outward_sign(&self, elem: usize, facet: usize) -> f64 {
        let f = &self.facets[facet];
        if f.elems[0] == Some(elem) {
            1.0
        } else {
            debug_assert_eq!(f.elems[1], Some(elem));
            -1.0
        }
    }
}

/// Build the uniform mesh. `n >= 1`, `dim` in {2, 3}.
pub fn build_mesh(n: usize, dim: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "mesh subdivisions n must be >= 1".into(),
        ));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!(
            "dim must be 2 or 3, got {dim}"
        )));
    }
    let h = 1.0 / n as f64;
    let nz = if dim == 3 { n } else { 1 };

    // Elements, lexicographic: x fastest, then y, then z.
    let mut elements = Vec::with_capacity(n * n * nz);
    for iz in 0..nz {
        for iy in 0..n {
            for ix in 0..n {
                let centroid = [
                    (ix as f64 + 0.5) * h,
                    (iy as f64 + 0.5) * h,
                    if dim == 3 { (iz as f64 + 0.5) * h } else { 0.0 },
                ];
                elements.push(Element {
                    index: elements.len(),
                    centroid,
                    facets: vec![usize::MAX; 2 * dim],
                });
            }
        }
    }

    // Facets, grouped by normal axis; within an axis, plane position
    // slowest, then the perpendicular cell indices.
    let mut facets: Vec<Facet> = Vec::new();
    for axis in 0..dim {
        let c2 = if dim == 3 { n } else { 1 };
        for ip in 0..=n {
            for j2 in 0..c2 {
                for j1 in 0..n {
                    let index = facets.len();
                    let (mx, my, mz, lower, upper) = facet_geometry(axis, ip, j1, j2, n, dim, h);
                    let boundary = ip == 0 || ip == n;
                    facets.push(Facet {
                        index,
                        midpoint: [mx, my, mz],
                        measure: h.powi(dim as i32 - 1),
                        axis,
                        elems: [lower, upper],
                        boundary,
                    });
                    if let Some(e) = lower {
                        elements[e].facets[2 * axis + 1] = index; // upper face of lower elem
                    }
                    if let Some(e) = upper {
                        elements[e].facets[2 * axis] = index; // lower face of upper elem
                    }
                }
            }
        }
    }
    debug_assert!(elements
        .iter()
        .all(|e| e.facets.iter().all(|&f| f != usize::MAX)));
    Ok(Mesh {
        dim,
        n,
        h,
        elements,
        facets,
    })
}

/// Geometry and adjacency of the facet at plane `ip` along `axis` with
/// perpendicular cell indices `(j1, j2)`.
fn facet_geometry(
    axis: usize,
    ip: usize,
    j1: usize,
    j2: usize,
    n: usize,
    dim: usize,
    h: f64,
) -> (f64, f64, f64, Option<usize>, Option<usize>) {
    let pos = ip as f64 * h;
    let m1 = (j1 as f64 + 0.5) * h;
    let m2 = (j2 as f64 + 0.5) * h;
    let eid = |ix: usize, iy: usize, iz: usize| -> usize {
        if dim == 3 {
            iz * n * n + iy * n + ix
        } else {
            iy * n + ix
        }
    };
    match (dim, axis) {
        (2, 0) => {
            let lower = if ip > 0 {
                Some(eid(ip - 1, j1, 0))
            } else {
                None
            };
            let upper = if ip < n { Some(eid(ip, j1, 0)) } else { None };
            (pos, m1, 0.0, lower, upper)
        }
        (2, 1) => {
            let lower = if ip > 0 {
                Some(eid(j1, ip - 1, 0))
            } else {
                None
            };
            let upper = if ip < n { Some(eid(j1, ip, 0)) } else { None };
            (m1, pos, 0.0, lower, upper)
        }
        (3, 0) => {
            // (j1, j2) = (y, z)
            let lower = if ip > 0 {
                Some(eid(ip - 1, j1, j2))
            } else {
                None
            };
            let upper = if ip < n { Some(eid(ip, j1, j2)) } else { None };
            (pos, m1, m2, lower, upper)
        }
        (3, 1) => {
            // (j1, j2) = (x, z)
            let lower = if ip > 0 {
                Some(eid(j1, ip - 1, j2))
            } else {
                None
            };
            let upper = if ip < n { Some(eid(j1, ip, j2)) } else { None };
            (m1, pos, m2, lower, upper)
        }
        (3, 2) => {
            // (j1, j2) = (x, y)
            let lower = if ip > 0 {
                Some(eid(j1, j2, ip - 1))
            } else {
                None
            };
            let upper = if ip < n { Some(eid(j1, j2, ip)) } else { None };
            (m1, m2, pos, lower, upper)
        }
        _ => unreachable!(),
    }
}

/// Degree-of-freedom maps for the scalar (`W_h`) and vector (`V_h`) WG
/// spaces: one interior dof per element and one facet dof per facet (times
/// `d` components for the vector space). Interior dofs are numbered before
/// facet dofs; boundary facet dofs are constrained and excluded from the
/// free numbering.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub dim: usize,
    pub n_elements: usize,
    pub n_facets: usize,
    /// Free index of each scalar dof (interior dofs first, then facet dofs
    /// in facet order), `None` when constrained.
    pub scalar_free: Vec<Option<usize>>,
    pub n_scalar_free: usize,
    /// Constrained scalar dofs in ascending dof order; position in this
    /// list is the "constrained index" used for boundary data vectors.
    pub scalar_constrained: Vec<usize>,
    pub scalar_constrained_index: Vec<Option<usize>>,
}

impl DofMap {
    /// Total scalar dofs (free + constrained).
    pub fn n_scalar_total(&self) -> usize {
        self.n_elements + self.n_facets
    }

    /// Scalar dof id of an element-interior dof.
    pub fn interior_dof(&self, elem: usize) -> usize {
        elem
    }

    /// Scalar dof id of a facet dof.
    pub fn facet_dof(&self, facet: usize) -> usize {
        self.n_elements + facet
    }

    /// Number of free vector dofs (d per free scalar dof).
    pub fn n_vector_free(&self) -> usize {
        self.dim * self.n_scalar_free
    }

    /// Free index of component `comp` of the vector dof attached to scalar
    /// dof `sdof`, when free. Components of one entity stay adjacent, and
    /// entity order follows the scalar free order, so interior-before-facet
    /// is preserved.
    pub fn vector_free(&self, sdof: usize, comp: usize) -> Option<usize> {
        self.scalar_free[sdof].map(|k| self.dim * k + comp)
    }

    /// Constrained-vector index of component `comp` of `sdof` (indexing
    /// into boundary-value vectors), when constrained.
    pub fn vector_constrained(&self, sdof: usize, comp: usize) -> Option<usize> {
        self.scalar_constrained_index[sdof].map(|k| self.dim * k + comp)
    }

    pub fn n_vector_constrained(&self) -> usize {
        self.dim * self.scalar_constrained.len()
    }
}

/// Build the scalar/vector dof maps for `mesh`. Boundary facet dofs are
/// flagged constrained (pure Dirichlet on both fields).
pub fn build_dof_maps(mesh: &Mesh) -> DofMap {
    let ne = mesh.n_elements();
    let nf = mesh.n_facets();
    let total = ne + nf;
    let mut scalar_free = vec![None; total];
    let mut scalar_constrained = Vec::new();
    let mut scalar_constrained_index = vec![None; total];
    let mut next = 0usize;
    for e in 0..ne {
        scalar_free[e] = Some(next);
        next += 1;
    }
    for f in 0..nf {
        let dof = ne + f;
        if mesh.facets[f].boundary {
            scalar_constrained_index[dof] = Some(scalar_constrained.len());
            scalar_constrained.push(dof);
        } else {
            scalar_free[dof] = Some(next);
            next += 1;
        }
    }
    DofMap {
        dim: mesh.dim,
        n_elements: ne,
        n_facets: nf,
        scalar_free,
        n_scalar_free: next,
        scalar_constrained,
        scalar_constrained_index,
    }
}
