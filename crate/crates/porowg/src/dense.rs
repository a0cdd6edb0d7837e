//! Small dense linear algebra used by the spectral oracle.
//!
//! Everything here is self-contained (no BLAS/LAPACK): partial-pivot LU,
//! Cholesky, a symmetric eigensolver (Householder tridiagonalization plus
//! implicit-shift QL), one-sided Jacobi SVD, and a Francis double-shift QR
//! for real nonsymmetric eigenvalues. Matrices in the oracle stay below a
//! couple thousand rows, so plain row-major storage is enough.

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug)]
pub struct DMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DMat {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols);
            data.extend_from_slice(r);
        }
        DMat { nrows, ncols, data }
    }

    pub fn from_csr(a: &CsrMatrix) -> Self {
        let mut m = DMat::zeros(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for (j, v) in a.row_iter(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Diagonal matrix from a slice.
    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = DMat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn transpose(&self) -> DMat {
        let mut t = DMat::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DMat) -> DMat {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut out = DMat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.ncols..(k + 1) * other.ncols];
                let out_row = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, x.len());
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let row = &self.data[i * self.ncols..(i + 1) * self.ncols];
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            y[i] = s;
        }
        y
    }

    pub fn add_scaled(&mut self, s: f64, other: &DMat) {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    pub fn sub(&self, other: &DMat) -> DMat {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Force exact symmetry by averaging with the transpose.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Sub-block rows `r0..r1`, cols `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> DMat {
        let mut out = DMat::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out[(i - r0, j - c0)] = self[(i, j)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &DMat) {
        for i in 0..b.nrows {
            for j in 0..b.ncols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }
}

impl crate::sparse::LinOp for DMat {
    fn nrows(&self) -> usize {
        self.nrows
    }
    fn ncols(&self) -> usize {
        self.ncols
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let out = self.matvec(x);
        y.copy_from_slice(&out);
    }
}

impl std::ops::Index<(usize, usize)> for DMat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

// ---------------------------------------------------------------------------
// LU with partial pivoting
// ---------------------------------------------------------------------------

/// Partial-pivot LU factorization, kept packed in one matrix.
pub struct Lu {
    lu: DMat,
    piv: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &DMat) -> Result<Lu> {
        assert!(a.is_square());
        let n = a.nrows;
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::Internal(format!(
                    "singular matrix in LU at column {k}"
                )));
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                piv.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                if m != 0.0 {
                    for j in (k + 1)..n {
                        let v = m * lu[(k, j)];
                        lu[(i, j)] -= v;
                    }
                }
            }
        }
        Ok(Lu { lu, piv, sign })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows;
        assert_eq!(b.len(), n);
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = b[self.piv[i]];
        }
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &DMat) -> DMat {
        let mut out = DMat::zeros(b.nrows, b.ncols);
        let mut col = vec![0.0; b.nrows];
        for j in 0..b.ncols {
            for i in 0..b.nrows {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..b.nrows {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> DMat {
        self.solve_mat(&DMat::identity(self.lu.nrows))
    }

    /// Determinant as `(sign, log|det|)`; robust for long products.
    pub fn signed_log_det(&self) -> (f64, f64) {
        let mut sign = self.sign;
        let mut log = 0.0;
        for i in 0..self.lu.nrows {
            let d = self.lu[(i, i)];
            if d < 0.0 {
                sign = -sign;
            }
            log += d.abs().ln();
        }
        (sign, log)
    }
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

/// Lower Cholesky factor of an SPD matrix.
pub struct Cholesky {
    pub l: DMat,
}

impl Cholesky {
    pub fn factor(a: &DMat) -> Result<Cholesky> {
        assert!(a.is_square());
        let n = a.nrows;
        let mut l = DMat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 {
                return Err(Error::Internal(format!(
                    "non-positive pivot {d:.3e} in Cholesky at column {j}"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.nrows;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.l[(i, j)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.l[(j, i)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `L^{-1} B` by forward substitution on each column.
    pub fn forward_solve_mat(&self, b: &DMat) -> DMat {
        let n = self.l.nrows;
        let mut out = b.clone();
        for j in 0..b.ncols {
            for i in 0..n {
                let mut s = out[(i, j)];
                for k in 0..i {
                    s -= self.l[(i, k)] * out[(k, j)];
                }
                out[(i, j)] = s / self.l[(i, i)];
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Symmetric eigensolver: Householder tridiagonalization + implicit QL
// ---------------------------------------------------------------------------

/// Eigen-decomposition of a symmetric matrix.
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `k` of `vectors` is the eigenvector for `values[k]`.
    pub vectors: Option<DMat>,
}

/// Symmetric eigenvalues (and optionally vectors) of `a`.
///
/// The input is treated as exactly symmetric; only the lower triangle is
/// referenced through the symmetrized copy taken here.
pub fn sym_eigen(a: &DMat, want_vectors: bool) -> SymEigen {
    assert!(a.is_square());
    let n = a.nrows;
    let mut z = a.clone();
    z.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut z, &mut d, &mut e, want_vectors);
    ql_implicit(
        &mut d,
        &mut e,
        if want_vectors { Some(&mut z) } else { None },
    );
    // Sort ascending, carrying vectors along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = if want_vectors {
        let mut v = DMat::zeros(n, n);
        for (newc, &oldc) in order.iter().enumerate() {
            for r in 0..n {
                v[(r, newc)] = z[(r, oldc)];
            }
        }
        Some(v)
    } else {
        None
    };
    SymEigen { values, vectors }
}

/// Householder reduction to tridiagonal form (in the style of EISPACK
/// `tred2`). On exit `d` holds the diagonal, `e` the subdiagonal in
/// `e[1..]`, and if `accumulate` the matrix holds the orthogonal transform.
fn tridiagonalize(z: &mut DMat, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let n = z.nrows;
    if n == 0 {
        return;
    }
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for k in 0..=l {
                scale += z[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = z[(i, l)];
            } else {
                for k in 0..=l {
                    z[(i, k)] /= scale;
                    h += z[(i, k)] * z[(i, k)];
                }
                let f = z[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                let mut sum = 0.0;
                for j in 0..=l {
                    if accumulate {
                        z[(j, i)] = z[(i, j)] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[(j, k)] * z[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g / h;
                    sum += e[j] * z[(i, j)];
                }
                let hh = sum / (h + h);
                for j in 0..=l {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let v = f * e[k] + g * z[(i, k)];
                        z[(j, k)] -= v;
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if accumulate {
            let l = i;
            if d[i] != 0.0 {
                for j in 0..l {
                    let mut g = 0.0;
                    for k in 0..l {
                        g += z[(i, k)] * z[(k, j)];
                    }
                    for k in 0..l {
                        z[(k, j)] -= g * z[(k, i)];
                    }
                }
            }
            d[i] = z[(i, i)];
            z[(i, i)] = 1.0;
            for j in 0..l {
                z[(j, i)] = 0.0;
                z[(i, j)] = 0.0;
            }
        } else {
            d[i] = z[(i, i)];
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix (in the
/// style of EISPACK `tql2`/`tql1`).
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut DMat>) {
    let n = d.len();
    if n <= 1 {
        return;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zz) = z.as_deref_mut() {
                    for k in 0..n {
                        f = zz[(k, i + 1)];
                        zz[(k, i + 1)] = s * zz[(k, i)] + c * f;
                        zz[(k, i)] = c * zz[(k, i)] - s * f;
                    }
                }
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Generalized symmetric-definite eigenvalues of `(a, b)` with `b` SPD:
/// all `lambda` with `a x = lambda b x`, ascending.
pub fn gen_sym_eigenvalues(a: &DMat, b: &DMat) -> Result<Vec<f64>> {
    let chol = Cholesky::factor(b)?;
    // C = L^{-1} A L^{-T}
    let la = chol.forward_solve_mat(a);
    let lat = la.transpose();
    let mut c = chol.forward_solve_mat(&lat);
    c.symmetrize();
    Ok(sym_eigen(&c, false).values)
}

/// Spectral 2-norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_norm2(a: &DMat) -> f64 {
    let ev = sym_eigen(a, false).values;
    ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `A^{-1/2}` of an SPD matrix via its eigen-decomposition.
pub fn spd_inv_sqrt(a: &DMat) -> Result<DMat> {
    let eig = sym_eigen(a, true);
    let q = eig.vectors.as_ref().unwrap();
    let n = a.nrows;
    let mut out = DMat::zeros(n, n);
    for k in 0..n {
        let lam = eig.values[k];
        if lam <= 0.0 {
            return Err(Error::Internal(format!(
                "non-SPD matrix in inv_sqrt (eig {lam:.3e})"
            )));
        }
        let w = 1.0 / lam.sqrt();
        for i in 0..n {
            let qik = q[(i, k)] * w;
            if qik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += qik * q[(j, k)];
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD (singular values)
// ---------------------------------------------------------------------------

/// Singular values of `a` (any shape), descending, via one-sided Jacobi on
/// the taller orientation.
pub fn singular_values(a: &DMat) -> Vec<f64> {
    let work = if a.nrows >= a.ncols {
        a.clone()
    } else {
        a.transpose()
    };
    one_sided_jacobi(work)
}

fn one_sided_jacobi(mut u: DMat) -> Vec<f64> {
    let m = u.nrows;
    let n = u.ncols;
    let tol = 1e-15;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                off = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if !off {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

// ---------------------------------------------------------------------------
// Real nonsymmetric eigenvalues: Hessenberg + Francis double-shift QR
// ---------------------------------------------------------------------------

/// Eigenvalues of a general real square matrix as `(re, im)` pairs,
/// sorted by real part (then imaginary part).
pub fn general_eigenvalues(a: &DMat) -> Vec<(f64, f64)> {
    assert!(a.is_square());
    let mut h = a.clone();
    balance(&mut h);
    to_hessenberg(&mut h);
    let mut eigs = francis_qr(&mut h);
    eigs.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then(x.1.partial_cmp(&y.1).unwrap())
    });
    eigs
}

/// Diagonal balancing to reduce the norm spread (Osborne / EISPACK `balanc`,
/// eigenvalue-preserving similarity by powers of 2).
fn balance(a: &mut DMat) {
    let n = a.nrows;
    let radix: f64 = 2.0;
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                let mut cc = c;
                while cc < g {
                    f *= radix;
                    cc *= sqrdx;
                }
                g = r * radix;
                while cc > g {
                    f /= radix;
                    cc /= sqrdx;
                }
                if (cc + r) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= ginv;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form (no transform
/// accumulation; eigenvalues only).
fn to_hessenberg(a: &mut DMat) {
    let n = a.nrows;
    if n < 3 {
        return;
    }
    for k in 1..(n - 1) {
        // Zero column k-1 below row k with a Householder reflector.
        let mut scale = 0.0;
        for i in k..n {
            scale += a[(i, k - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut v = vec![0.0; n - k];
        let mut h = 0.0;
        for i in k..n {
            v[i - k] = a[(i, k - 1)] / scale;
            h += v[i - k] * v[i - k];
        }
        let f = v[0];
        let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
        h -= f * g;
        v[0] = f - g;
        // Apply P = I - v v^T / h from both sides.
        for j in 0..n {
            let mut s = 0.0;
            for i in k..n {
                s += v[i - k] * a[(i, j)];
            }
            s /= h;
            for i in k..n {
                a[(i, j)] -= s * v[i - k];
            }
        }
        for i in 0..n {
            let mut s = 0.0;
            for j in k..n {
                s += a[(i, j)] * v[j - k];
            }
            s /= h;
            for j in k..n {
                a[(i, j)] -= s * v[j - k];
            }
        }
        a[(k, k - 1)] = scale * g;
        for i in (k + 1)..n {
            a[(i, k - 1)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (in the style of
/// EISPACK `hqr`). Returns all eigenvalues as `(re, im)` pairs.
fn francis_qr(h: &mut DMat) -> Vec<(f64, f64)> {
    let n = h.nrows;
    let mut eigs: Vec<(f64, f64)> = Vec::with_capacity(n);
    if n == 0 {
        return eigs;
    }
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return vec![(0.0, 0.0); n];
    }
    let eps = f64::EPSILON;
    let mut t = 0.0;
    let mut hi = n as isize - 1; // active block end
    while hi >= 0 {
        let nn = hi as usize;
        let mut its = 0;
        loop {
            // Find l: smallest index such that h[l][l-1] is negligible.
            let mut l = nn;
            while l > 0 {
                let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if h[(l, l - 1)].abs() <= eps * s {
                    h[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[(nn, nn)];
            if l == nn {
                eigs.push((x + t, 0.0));
                hi = nn as isize - 1;
                break;
            }
            let mut y = h[(nn - 1, nn - 1)];
            let mut w = h[(nn, nn - 1)] * h[(nn - 1, nn)];
            if l == nn - 1 {
                // 2x2 block: solve its quadratic.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + if p >= 0.0 { z } else { -z };
                    eigs.push((x + z, 0.0));
                    eigs.push((if z != 0.0 { x - w / z } else { x + z }, 0.0));
                } else {
                    eigs.push((x + p, z));
                    eigs.push((x + p, -z));
                }
                hi = nn as isize - 2;
                break;
            }
            assert!(its < 60, "Francis QR failed to converge");
            if its == 10 || its == 20 || its == 30 || its == 40 || its == 50 {
                // Exceptional shift.
                t += x;
                for i in 0..=nn {
                    h[(i, i)] -= x;
                }
                let s = h[(nn, nn - 1)].abs() + h[(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // Look for two consecutive small subdiagonal elements.
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - rr - ss;
                r = h[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }
            // Double QR step on rows l..=nn, columns m..=nn.
            for k in m..nn {
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if k != nn - 1 { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                let s = {
                    let v = (p * p + q * q + r * r).sqrt();
                    if p >= 0.0 {
                        v
                    } else {
                        -v
                    }
                };
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                } else {
                    h[(k, k - 1)] = -s * x;
                }
                p += s;
                let xx = p / s;
                let yy = q / s;
                let zz = r / s;
                q /= p;
                r /= p;
                // Row modification.
                for j in k..=nn {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if k != nn - 1 {
                        pp += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= pp * zz;
                    }
                    h[(k + 1, j)] -= pp * yy;
                    h[(k, j)] -= pp * xx;
                }
                // Column modification.
                let mmin = if nn < k + 3 { nn } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = xx * h[(i, k)] + yy * h[(i, k + 1)];
                    if k != nn - 1 {
                        pp += zz * h[(i, k + 2)];
                        h[(i, k + 2)] -= pp * r;
                    }
                    h[(i, k + 1)] -= pp * q;
                    h[(i, k)] -= pp;
                }
            }
        }
    }
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMat {
        let mut a = DMat::zeros(n, m);
        for v in a.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        a
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMat {
        let r = random_mat(rng, n, n);
        let mut a = r.matmul(&r.transpose());
        for i in 0..n {
            a[(i, i)] += n as f64 * 0.5;
        }
        a
    }

    #[test]
    fn lu_solves_and_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_mat(&mut rng, 12, 12);
        let lu = Lu::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..12).map(|i| (i as f64).sin() + 1.0).collect();
        let b = a.matvec(&x_true);
        let x = lu.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-10);
        }
        // det of identity-scaled matrix
        let mut d = DMat::identity(5);
        d.scale(3.0);
        let (sign, log) = Lu::factor(&d).unwrap().signed_log_det();
        assert_eq!(sign, 1.0);
        assert!((log - 5.0 * 3.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(&mut rng, 15);
        let ch = Cholesky::factor(&a).unwrap();
        let llt = ch.l.matmul(&ch.l.transpose());
        assert!(llt.sub(&a).norm_fro() / a.norm_fro() < 1e-13);
        let b: Vec<f64> = (0..15).map(|i| i as f64 - 7.0).collect();
        let x = ch.solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-9);
        }
    }

    #[test]
    fn sym_eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20;
        let mut a = random_mat(&mut rng, n, n);
        a.symmetrize();
        let eig = sym_eigen(&a, true);
        let q = eig.vectors.as_ref().unwrap();
        // Q Lambda Q^T == A
        let mut ql = q.clone();
        for j in 0..n {
            for i in 0..n {
                ql[(i, j)] *= eig.values[j];
            }
        }
        let rec = ql.matmul(&q.transpose());
        assert!(rec.sub(&a).norm_fro() / a.norm_fro() < 1e-12);
        // Orthogonality
        let qtq = q.transpose().matmul(q);
        assert!(qtq.sub(&DMat::identity(n)).norm_fro() < 1e-12);
        // Ascending
        for k in 1..n {
            assert!(eig.values[k] >= eig.values[k - 1]);
        }
    }

    #[test]
    fn sym_eigen_known_diagonal() {
        let d = DMat::from_diag(&[4.0, -1.0, 2.5, 0.0]);
        let eig = sym_eigen(&d, false);
        let expect = [-1.0, 0.0, 2.5, 4.0];
        for (v, e) in eig.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn gen_sym_eig_matches_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_spd(&mut rng, 10);
        let mut b = a.clone();
        b.scale(0.5);
        // a x = lambda (a/2) x  => lambda = 2 for all
        let vals = gen_sym_eigenvalues(&a, &b).unwrap();
        for v in vals {
            assert!((v - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_svd_matches_eigen_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_mat(&mut rng, 14, 9);
        let sv = singular_values(&a);
        // Compare against sqrt of eigenvalues of A^T A.
        let ata = a.transpose().matmul(&a);
        let ev = sym_eigen(&ata, false).values;
        let mut sv2: Vec<f64> = ev.iter().map(|v| v.max(0.0).sqrt()).collect();
        sv2.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (x, y) in sv.iter().zip(&sv2) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn general_eigs_match_sym_solver_on_symmetric_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 16;
        let mut a = random_mat(&mut rng, n, n);
        a.symmetrize();
        let ge = general_eigenvalues(&a);
        let se = sym_eigen(&a, false).values;
        for (g, s) in ge.iter().zip(&se) {
            assert!(g.1.abs() < 1e-10);
            assert!((g.0 - s).abs() < 1e-9, "{} vs {}", g.0, s);
        }
    }

    #[test]
    fn general_eigs_rotation_block() {
        // [[c,-s],[s,c]] has eigenvalues c +- i s.
        let (c, s) = (0.6, 0.8);
        let a = DMat::from_rows(&[vec![c, -s], vec![s, c]]);
        let e = general_eigenvalues(&a);
        assert!((e[0].0 - c).abs() < 1e-14 && (e[0].1 + s).abs() < 1e-14);
        assert!((e[1].0 - c).abs() < 1e-14 && (e[1].1 - s).abs() < 1e-14);
    }

    #[test]
    fn general_eigs_companion_cubic() {
        // Companion matrix of x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3).
        let a = DMat::from_rows(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let e = general_eigenvalues(&a);
        let expect = [1.0, 2.0, 3.0];
        for (g, w) in e.iter().zip(expect) {
            assert!(g.1.abs() < 1e-10);
            assert!((g.0 - w).abs() < 1e-10);
        }
    }

    #[test]
    fn general_eigs_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let lam: Vec<f64> = (0..n).map(|i| i as f64 - 4.5).collect();
        let d = DMat::from_diag(&lam);
        let s = {
            let mut m = random_mat(&mut rng, n, n);
            for i in 0..n {
                m[(i, i)] += 3.0;
            }
            m
        };
        let sinv = Lu::factor(&s).unwrap().inverse();
        let a = s.matmul(&d).matmul(&sinv);
        let e = general_eigenvalues(&a);
        for (g, w) in e.iter().zip(&lam) {
            assert!(g.1.abs() < 1e-8);
            assert!((g.0 - w).abs() < 1e-8, "{} vs {}", g.0, w);
        }
    }

    #[test]
    fn spd_inv_sqrt_squares_to_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_spd(&mut rng, 9);
        let is = spd_inv_sqrt(&a).unwrap();
        let ainv = Lu::factor(&a).unwrap().inverse();
        let prod = is.matmul(&is);
        assert!(prod.sub(&ainv).norm_fro() / ainv.norm_fro() < 1e-11);
    }
}
