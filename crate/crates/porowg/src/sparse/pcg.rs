//! Preconditioned conjugate gradients.

use super::{axpy, dot, norm2, LinOp, SolverConfig};

#[derive(Clone, Debug)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// True relative residual recomputed at exit.
    pub relres: f64,
}

/// PCG for SPD `a` with SPD preconditioner `minv` (pass `None` for plain
/// CG). Stops when the recurrence residual satisfies
/// `||b - Ax|| / ||b|| <= tol`, verified against the recomputed true
/// residual at exit; nonconvergence within `config.max_iters` is reported,
/// not raised.
pub fn pcg(a: &dyn LinOp, minv: Option<&dyn LinOp>, b: &[f64], config: &SolverConfig) -> PcgResult {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(a.ncols(), n);
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return PcgResult {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            relres: 0.0,
        };
    }
    let tol = config.tol;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0usize;

    // Outer loop restarts from the current iterate if the recurrence
    // residual and the true residual ever disagree at the stopping test.
    loop {
        match minv {
            Some(m) => m.apply(&r, &mut z),
            None => z.copy_from_slice(&r),
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut recurrence_ok = false;
        while iterations < config.max_iters {
            a.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 {
                // Loss of positive definiteness (should not happen for SPD
                // inputs); stop and report the current iterate.
                break;
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            iterations += 1;
            if norm2(&r) / norm_b <= tol {
                recurrence_ok = true;
                break;
            }
            match minv {
                Some(m) => m.apply(&r, &mut z),
                None => z.copy_from_slice(&r),
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        // Recompute the true residual.
        a.apply(&x, &mut q);
        for i in 0..n {
            r[i] = b[i] - q[i];
        }
        let true_rel = norm2(&r) / norm_b;
        if true_rel <= tol {
            return PcgResult {
                x,
                iterations,
                converged: true,
                relres: true_rel,
            };
        }
        if !recurrence_ok || iterations >= config.max_iters {
            return PcgResult {
                x,
                iterations,
                converged: false,
                relres: true_rel,
            };
        }
        // Recurrence claimed convergence but the true residual disagrees:
        // continue from the current iterate with a fresh residual.
    }
}
