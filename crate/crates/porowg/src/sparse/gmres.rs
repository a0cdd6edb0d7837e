//! Restarted GMRES with left preconditioning and modified Gram-Schmidt.

use super::{dot, norm2, LinOp, ResidualMeasure, SolverConfig};

#[derive(Clone, Debug)]
pub struct GmresResult {
    pub x: Vec<f64>,
    /// Total inner iterations (preconditioned-matrix applications) across
    /// all restart cycles.
    pub iterations: usize,
    pub converged: bool,
    /// Final residual in the configured measure.
    pub relres: f64,
    /// True relative residual `||b - Ax|| / ||b||`, recomputed at exit.
    pub true_relres: f64,
    /// Measured relative residual after each inner iteration.
    pub history: Vec<f64>,
    /// Whether any restart occurred before termination.
    pub restarted: bool,
}

/// Left-preconditioned restarted GMRES with zero initial guess.
///
/// With `measure = Preconditioned` the stopping test is
/// `||M^{-1}(b - Ax)|| / ||M^{-1}b|| <= tol` (tracked by the Givens
/// recurrence and verified on the formed iterate); with `measure = True` it
/// is `||b - Ax|| <= tol * ||b||` evaluated on the candidate iterate each
/// step. Orthogonalization is modified Gram-Schmidt with one
/// reorthogonalization pass when the norm drops below `1/sqrt(2)` of its
/// pre-orthogonalization value. Nonconvergence returns the best iterate
/// with `converged = false`.
pub fn gmres(
    a: &dyn LinOp,
    minv: Option<&dyn LinOp>,
    b: &[f64],
    config: &SolverConfig,
) -> GmresResult {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(a.ncols(), n);
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return GmresResult {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            relres: 0.0,
            true_relres: 0.0,
            history: Vec::new(),
            restarted: false,
        };
    }
    let prec = |r: &[f64], out: &mut Vec<f64>| match minv {
        Some(m) => {
            out.resize(n, 0.0);
            m.apply(r, out);
        }
        None => {
            out.clear();
            out.extend_from_slice(r);
        }
    };

    let mut pb = Vec::new();
    prec(b, &mut pb);
    let norm_pb = norm2(&pb);

    let m = config.restart;
    let tol = config.tol;
    let mut x = vec![0.0; n];
    let mut iterations = 0usize;
    let mut restarted = false;
    let mut history = Vec::new();
    let mut converged = false;
    #[allow(unused_assignments)]
    let mut relres = 1.0;

    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let stride = m;
    let mut h = vec![0.0f64; (m + 1) * stride];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![0.0f64; m];
    let mut g = vec![0.0f64; m + 1];
    let mut work = vec![0.0f64; n];
    let mut z = Vec::new();

    'outer: loop {
        // Residual of the current iterate.
        a.apply(&x, &mut work);
        let mut r = vec![0.0; n];
        for i in 0..n {
            r[i] = b[i] - work[i];
        }
        prec(&r, &mut z);
        let beta = norm2(&z);
        let start_measure = match config.measure {
            ResidualMeasure::Preconditioned => beta / norm_pb,
            ResidualMeasure::True => norm2(&r) / norm_b,
            ResidualMeasure::PreconditionedVsRhs => beta / norm_b,
        };
        if start_measure <= tol {
            converged = true;
            relres = start_measure;
            break;
        }
        if iterations >= config.max_iters {
            relres = start_measure;
            break;
        }

        v.clear();
        let mut v0 = z.clone();
        for t in v0.iter_mut() {
            *t /= beta;
        }
        v.push(v0);
        g.iter_mut().for_each(|t| *t = 0.0);
        g[0] = beta;

        let mut cols = 0usize;
        for j in 0..m {
            // w = M^{-1} A v_j
            a.apply(&v[j], &mut work);
            let mut w = Vec::new();
            prec(&work, &mut w);
            let norm_before = norm2(&w);
            for i in 0..=j {
                let hij = dot(&v[i], &w);
                h[i * stride + j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            if norm2(&w) < norm_before / std::f64::consts::SQRT_2 {
                for i in 0..=j {
                    let c = dot(&v[i], &w);
                    h[i * stride + j] += c;
                    for (wk, vk) in w.iter_mut().zip(&v[i]) {
                        *wk -= c * vk;
                    }
                }
            }
            let hj1 = norm2(&w);
            h[(j + 1) * stride + j] = hj1;
            if hj1 > 0.0 {
                for t in w.iter_mut() {
                    *t /= hj1;
                }
            }
            v.push(w);

            // Apply accumulated Givens rotations, then a new one.
            for i in 0..j {
                let t1 = h[i * stride + j];
                let t2 = h[(i + 1) * stride + j];
                h[i * stride + j] = cs[i] * t1 + sn[i] * t2;
                h[(i + 1) * stride + j] = -sn[i] * t1 + cs[i] * t2;
            }
            let (c, s) = {
                let aa = h[j * stride + j];
                let bb = h[(j + 1) * stride + j];
                let rr = aa.hypot(bb);
                if rr == 0.0 {
                    (1.0, 0.0)
                } else {
                    (aa / rr, bb / rr)
                }
            };
            cs[j] = c;
            sn[j] = s;
            h[j * stride + j] = c * h[j * stride + j] + s * h[(j + 1) * stride + j];
            h[(j + 1) * stride + j] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] = c * g[j];
            iterations += 1;
            cols = j + 1;

            let measured = match config.measure {
                ResidualMeasure::Preconditioned => g[j + 1].abs() / norm_pb,
                ResidualMeasure::PreconditionedVsRhs => g[j + 1].abs() / norm_b,
                ResidualMeasure::True => {
                    let y = back_solve(&h, stride, &g, cols);
                    let mut xc = x.clone();
                    for (k, yk) in y.iter().enumerate() {
                        for (xi, vi) in xc.iter_mut().zip(&v[k]) {
                            *xi += yk * vi;
                        }
                    }
                    a.apply(&xc, &mut work);
                    let mut s2 = 0.0;
                    for i in 0..n {
                        let d = b[i] - work[i];
                        s2 += d * d;
                    }
                    s2.sqrt() / norm_b
                }
            };
            history.push(measured);

            if measured <= tol {
                // Form the iterate and verify on the recomputed residual to
                // guard against recurrence drift.
                let y = back_solve(&h, stride, &g, cols);
                for (k, yk) in y.iter().enumerate() {
                    for (xi, vi) in x.iter_mut().zip(&v[k]) {
                        *xi += yk * vi;
                    }
                }
                a.apply(&x, &mut work);
                for i in 0..n {
                    r[i] = b[i] - work[i];
                }
                let verify = match config.measure {
                    ResidualMeasure::Preconditioned => {
                        prec(&r, &mut z);
                        norm2(&z) / norm_pb
                    }
                    ResidualMeasure::PreconditionedVsRhs => {
                        prec(&r, &mut z);
                        norm2(&z) / norm_b
                    }
                    ResidualMeasure::True => norm2(&r) / norm_b,
                };
                relres = verify;
                if verify <= tol * (1.0 + 1e-12) {
                    converged = true;
                    break 'outer;
                }
                // Drifted; continue with a fresh cycle from this iterate.
                restarted = true;
                continue 'outer;
            }
            if iterations >= config.max_iters || hj1 == 0.0 {
                // Form the best iterate of this cycle and stop or restart.
                let y = back_solve(&h, stride, &g, cols);
                for (k, yk) in y.iter().enumerate() {
                    for (xi, vi) in x.iter_mut().zip(&v[k]) {
                        *xi += yk * vi;
                    }
                }
                relres = measured;
                if iterations >= config.max_iters {
                    break 'outer;
                }
                restarted = true;
                continue 'outer;
            }
        }
        // Restart: fold the cycle into x.
        let y = back_solve(&h, stride, &g, cols);
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[k]) {
                *xi += yk * vi;
            }
        }
        restarted = true;
    }

    a.apply(&x, &mut work);
    let mut s2 = 0.0;
    for i in 0..n {
        let d = b[i] - work[i];
        s2 += d * d;
    }
    let true_relres = s2.sqrt() / norm_b;
    GmresResult {
        x,
        iterations,
        converged,
        relres,
        true_relres,
        history,
        restarted,
    }
}

fn back_solve(h: &[f64], stride: usize, g: &[f64], cols: usize) -> Vec<f64> {
    let mut y = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut s = g[i];
        for k in (i + 1)..cols {
            s -= h[i * stride + k] * y[k];
        }
        y[i] = s / h[i * stride + i];
    }
    y
}
