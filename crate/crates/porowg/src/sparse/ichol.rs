//! Incomplete Cholesky factorization with threshold dropping.

use super::{CsrMatrix, LinOp};
use crate::{Error, Result};

/// Left-looking incomplete Cholesky with threshold dropping: the entry
/// `L(i,j)` is dropped when `|L(i,j)| < droptol * ||A(:,j)||_1`; diagonal
/// entries are always kept. With `droptol = 0` this is a complete
/// factorization. Returns the lower-triangular factor `L` with
/// `A ~ L L^T`.
///
/// A non-positive pivot yields [`Error::IcBreakdown`]; callers may retry on
/// a diagonally shifted copy (see [`IcPreconditioner::new`]).
pub fn ichol_t(a: &CsrMatrix, droptol: f64) -> Result<CsrMatrix> {
    assert_eq!(a.nrows(), a.ncols(), "ichol needs a square matrix");
    let n = a.nrows();

    // Full column 1-norms of A (A symmetric, so row norms coincide).
    let mut colnorm = vec![0.0f64; n];
    for i in 0..n {
        for (j, v) in a.row_iter(i) {
            colnorm[j] += v.abs();
        }
    }

    // L columns under construction, each sorted by row index.
    let mut l_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    // For each column k, index of its next unconsumed off-diagonal entry.
    let mut ptr = vec![0usize; n];
    // Linked lists: head[i] = first column whose next entry sits in row i.
    const NONE: usize = usize::MAX;
    let mut head = vec![NONE; n];
    let mut next = vec![NONE; n];

    // Sparse accumulator.
    let mut w = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();

    for j in 0..n {
        // Load lower part of column j of A: by symmetry this is row j
        // restricted to columns >= j.
        for (c, v) in a.row_iter(j) {
            if c >= j {
                if w[c] == 0.0 {
                    touched.push(c);
                }
                w[c] += v;
            }
        }

        // Apply updates from earlier columns k with L(j,k) != 0.
        let mut k = head[j];
        head[j] = NONE;
        while k != NONE {
            let k_next = next[k];
            let col = &l_cols[k];
            let p = ptr[k];
            debug_assert_eq!(col[p].0, j);
            let ljk = col[p].1;
            for &(r, v) in &col[p..] {
                if w[r] == 0.0 && r != j {
                    touched.push(r);
                }
                w[r] -= ljk * v;
            }
            // Advance column k to its next row.
            if p + 1 < col.len() {
                let nr = col[p + 1].0;
                ptr[k] = p + 1;
                next[k] = head[nr];
                head[nr] = k;
            }
            k = k_next;
        }

        let d = w[j];
        if d <= 0.0 {
            // Reset accumulator before bailing out.
            w[j] = 0.0;
            for &r in &touched {
                w[r] = 0.0;
            }
            touched.clear();
            return Err(Error::IcBreakdown { col: j, pivot: d });
        }
        let ljj = d.sqrt();
        let tau = droptol * colnorm[j];

        touched.sort_unstable();
        let mut col = Vec::with_capacity(touched.len() + 1);
        col.push((j, ljj));
        for &r in &touched {
            if r > j {
                let v = w[r] / ljj;
                if v.abs() >= tau && v != 0.0 {
                    col.push((r, v));
                }
            }
            w[r] = 0.0;
        }
        w[j] = 0.0;
        touched.clear();

        if col.len() > 1 {
            let nr = col[1].0;
            ptr[j] = 1;
            next[j] = head[nr];
            head[nr] = j;
        }
        l_cols[j] = col;
    }

    let mut triplets = Vec::new();
    for (j, col) in l_cols.iter().enumerate() {
        for &(i, v) in col {
            triplets.push((i, j, v));
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, &triplets))
}

/// `(L L^T)^{-1}` as a linear operator, with the shift-and-retry policy on
/// breakdown: one retry on `A + 1e-3 diag(A)`.
pub struct IcPreconditioner {
    l: CsrMatrix,
    /// True when the factorization needed the diagonal shift retry.
    pub shifted: bool,
}

impl IcPreconditioner {
    pub fn new(a: &CsrMatrix, droptol: f64) -> Result<IcPreconditioner> {
        match ichol_t(a, droptol) {
            Ok(l) => Ok(IcPreconditioner { l, shifted: false }),
            Err(Error::IcBreakdown { .. }) => {
                let shifted = a.add_scaled(1.0, &CsrMatrix::from_diag(&a.diag()), 1e-3);
                let l = ichol_t(&shifted, droptol)?;
                Ok(IcPreconditioner { l, shifted: true })
            }
            Err(e) => Err(e),
        }
    }

    pub fn factor(&self) -> &CsrMatrix {
        &self.l
    }

    /// Solve `L L^T x = b`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.l.nrows();
        debug_assert_eq!(b.len(), n);
        // Forward: L y = b (row-oriented; diagonal is the last entry of
        // each row of a lower-triangular CSR).
        for i in 0..n {
            let mut s = b[i];
            let mut diag = 0.0;
            for (j, v) in self.l.row_iter(i) {
                if j < i {
                    s -= v * x[j];
                } else {
                    diag = v;
                }
            }
            x[i] = s / diag;
        }
        // Backward: L^T x = y, right-looking over rows of L.
        for i in (0..n).rev() {
            let mut diag = 0.0;
            for (j, v) in self.l.row_iter(i) {
                if j == i {
                    diag = v;
                }
            }
            x[i] /= diag;
            let xi = x[i];
            for (j, v) in self.l.row_iter(i) {
                if j < i {
                    x[j] -= v * xi;
                }
            }
        }
    }
}

impl LinOp for IcPreconditioner {
    fn nrows(&self) -> usize {
        self.l.nrows()
    }
    fn ncols(&self) -> usize {
        self.l.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{Cholesky, DMat};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_factor() {
        let a = CsrMatrix::identity(6);
        let l = ichol_t(&a, 1e-3).unwrap();
        assert_eq!(l.nnz(), 6);
        for i in 0..6 {
            assert_eq!(l.get(i, i), 1.0);
        }
    }

    #[test]
    fn tridiagonal_droptol_zero_matches_dense_cholesky() {
        // 3x3 tridiagonal [-1, 2, -1].
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        );
        let l = ichol_t(&a, 0.0).unwrap();
        let dense = Cholesky::factor(&DMat::from_csr(&a)).unwrap();
        for i in 0..3 {
            for j in 0..=i {
                assert!(
                    (l.get(i, j) - dense.l[(i, j)]).abs() < 1e-14,
                    "mismatch at ({i},{j})"
                );
            }
        }
    }

    fn random_sdd(rng: &mut ChaCha8Rng, n: usize) -> CsrMatrix {
        // Diagonally dominant random SPD with ~20% fill.
        let mut t = Vec::new();
        let mut rowsum = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..i {
                if rng.random_range(0.0..1.0) < 0.2 {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((j, i, v));
                    rowsum[i] += v.abs();
                    rowsum[j] += v.abs();
                }
            }
        }
        for i in 0..n {
            t.push((i, i, rowsum[i] + 1.0));
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn droptol_error_close_to_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_sdd(&mut rng, 50);
        let ad = DMat::from_csr(&a);
        let err = |l: &CsrMatrix| {
            let ld = DMat::from_csr(l);
            let llt = ld.matmul(&ld.transpose());
            llt.sub(&ad).norm_fro() / ad.norm_fro()
        };
        let e0 = err(&ichol_t(&a, 0.0).unwrap());
        let e1 = err(&ichol_t(&a, 1e-3).unwrap());
        assert!(e0 < 1e-13, "droptol 0 must be essentially exact, got {e0}");
        assert!(e1 <= e0 + 0.1, "thresholded error too large: {e1}");
    }

    #[test]
    fn diagonal_droptol_zero_exact() {
        let d: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let a = CsrMatrix::from_diag(&d);
        let l = ichol_t(&a, 0.0).unwrap();
        for i in 0..8 {
            assert!((l.get(i, i) - d[i].sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn breakdown_reports_column() {
        // Indefinite matrix: [1, 2; 2, 1] has a negative second pivot.
        let a =
            CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        match ichol_t(&a, 0.0) {
            Err(Error::IcBreakdown { col, .. }) => assert_eq!(col, 1),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    #[test]
    fn preconditioner_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_sdd(&mut rng, 30);
        let m = IcPreconditioner::new(&a, 0.0).unwrap();
        assert!(!m.shifted);
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut x = vec![0.0; 30];
        m.solve_into(&b, &mut x);
        // droptol 0 => complete factorization => exact solve
        let r = a.spmv(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }
}
