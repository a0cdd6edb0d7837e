//! Dense verification oracle at small mesh sizes: Schur complements and
//! their two-sided bounds, the inf-sup constant, eigenvalue cluster
//! structure of the preconditioned operators, and the block triangular
//! eigenvalue lemma on random saddle systems.
//!
//! Everything here goes through the self-contained dense kernels in
//! [`crate::dense`]; none of it reuses the sparse solver path it checks.

use crate::assembly::{AssembledBlocks, ProblemParams};
use crate::dense::{
    gen_sym_eigenvalues, general_eigenvalues, singular_values, sym_eigen, DMat, Lu,
};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Outcome of one spectral bound check.
#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub tag: String,
    pub n: usize,
    pub lambda: f64,
    pub c0: f64,
    pub dt: f64,
    /// Eigenvalues sorted ascending (real parts for nonsymmetric checks).
    pub eigs: Vec<f64>,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Upper bound the eigenvalues were checked against.
    pub bound: f64,
    pub pass: bool,
    /// Inf-sup constant when the check computes one.
    pub beta: Option<f64>,
}

impl SpectralReport {
    /// CSV row `tag,n,lambda,c0,dt,min-eig,max-eig,bound,pass`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.tag,
            self.n,
            self.lambda,
            self.c0,
            self.dt,
            self.min_eig,
            self.max_eig,
            self.bound,
            self.pass
        )
    }
}

pub const SPECTRAL_CSV_HEADER: &str = "tag,n,lambda,c0,dt,min-eig,max-eig,bound,pass";

/// Dense pieces shared by the oracle checks.
pub struct DenseBlocks {
    pub a1: DMat,
    pub bcirc: DMat,
    pub mp: Vec<f64>,
    pub ap: DMat,
    pub n_interior: usize,
    pub n_p_free: usize,
    pub n_u_free: usize,
}

impl DenseBlocks {
    pub fn from(blocks: &AssembledBlocks) -> DenseBlocks {
        DenseBlocks {
            a1: DMat::from_csr(&blocks.a1),
            bcirc: DMat::from_csr(&blocks.bcirc),
            mp: blocks.mp_diag.clone(),
            ap: DMat::from_csr(&blocks.ap),
            n_interior: blocks.n_interior,
            n_p_free: blocks.n_p_free,
            n_u_free: blocks.n_u_free,
        }
    }

    /// `A0 = Bcirc^T Mp^{-1} Bcirc` densely.
    pub fn a0(&self) -> DMat {
        let mut minv_b = self.bcirc.clone();
        for (e, &m) in self.mp.iter().enumerate() {
            for j in 0..minv_b.ncols {
                minv_b[(e, j)] /= m;
            }
        }
        self.bcirc.transpose().matmul(&minv_b)
    }

    /// Facet-eliminated pressure operator
    /// `Dtilde = c0 Mp + kappa dt (Ap_ii - Ap_if Ap_ff^{-1} Ap_fi)`.
    pub fn d_tilde(&self, params: &ProblemParams) -> Result<DMat> {
        let ne = self.n_interior;
        let np = self.n_p_free;
        let schur = if np > ne {
            let aii = self.ap.block(0, ne, 0, ne);
            let aif = self.ap.block(0, ne, ne, np);
            let afi = self.ap.block(ne, np, 0, ne);
            let aff = self.ap.block(ne, np, ne, np);
            let aff_lu = Lu::factor(&aff)?;
            let x = aff_lu.solve_mat(&afi);
            let mut s = aii.clone();
            let prod = aif.matmul(&x);
            s.add_scaled(-1.0, &prod);
            s
        } else {
            self.ap.block(0, ne, 0, ne)
        };
        let mut d = schur;
        d.scale(params.kappa * params.dt);
        for (e, &m) in self.mp.iter().enumerate() {
            d[(e, e)] += params.c0 * m;
        }
        d.symmetrize();
        Ok(d)
    }

    /// `Bcirc A1^{-1} Bcirc^T` densely.
    pub fn b_a1inv_bt(&self) -> Result<DMat> {
        let lu = Lu::factor(&self.a1)?;
        let x = lu.solve_mat(&self.bcirc.transpose());
        let mut m = self.bcirc.matmul(&x);
        m.symmetrize();
        Ok(m)
    }
}

// ---------------------------------------------------------------------------
// Two-field Schur complement bounds
// ---------------------------------------------------------------------------

/// Verify `(eps/mu) Dtilde <= S2t <= factor * (eps/mu) Dtilde` through the
/// generalized eigenvalues of `(S2t, (eps/mu) Dtilde)`, with the sharp
/// factor for `c0 > 0` and the `kappa dt`-dependent one for `c0 = 0`.
pub fn dense_schur_two_field(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
) -> Result<SpectralReport> {
    let db = DenseBlocks::from(blocks);
    let eps = params.epsilon;
    let mu = params.mu;
    let alpha = params.alpha;
    let dt = db.d_tilde(params)?;
    // A = eps A1 + A0
    let mut a = db.a1.clone();
    a.scale(eps);
    a.add_scaled(1.0, &db.a0());
    let lu = Lu::factor(&a)?;
    let x = lu.solve_mat(&db.bcirc.transpose());
    let mut s2 = db.bcirc.matmul(&x);
    let coup = alpha * eps / mu;
    s2.scale(coup * coup);
    let mut scaled_dt = dt.clone();
    scaled_dt.scale(eps / mu);
    s2.add_scaled(1.0, &scaled_dt);
    s2.symmetrize();
    let eigs = gen_sym_eigenvalues(&s2, &scaled_dt)?;
    let bound = two_field_bound_factor(&db, params)?;
    let min_eig = eigs[0];
    let max_eig = *eigs.last().unwrap();
    let pass = min_eig >= 1.0 - 1e-8 && max_eig <= bound + 1e-8 * bound.max(1.0);
    Ok(SpectralReport {
        tag: "S2t".into(),
        n: blocks.n,
        lambda: params.lambda,
        c0: params.c0,
        dt: params.dt,
        eigs,
        min_eig,
        max_eig,
        bound,
        pass,
        beta: None,
    })
}

/// Upper-bound factor for the two-field Schur complement eigenvalues.
pub fn two_field_bound_factor(db: &DenseBlocks, params: &ProblemParams) -> Result<f64> {
    let eps = params.epsilon;
    let mu = params.mu;
    let alpha = params.alpha;
    if params.c0 > 0.0 {
        Ok(1.0 + alpha * alpha * eps / (mu * params.c0))
    } else {
        let lam_max_mp = params_mp_max(db);
        // lambda_min of the facet-eliminated pressure stiffness.
        let mut zero_c0 = *params;
        zero_c0.c0 = 0.0;
        let mut schur = db.d_tilde(&zero_c0)?;
        schur.scale(1.0 / (params.kappa * params.dt));
        let lam_min = sym_eigen(&schur, false).values[0];
        Ok(1.0 + alpha * alpha * eps * lam_max_mp / (mu * params.kappa * params.dt * lam_min))
    }
}

fn params_mp_max(db: &DenseBlocks) -> f64 {
    db.mp.iter().fold(0.0_f64, |m, &v| m.max(v))
}

// ---------------------------------------------------------------------------
// Elasticity Schur complement and inf-sup constant
// ---------------------------------------------------------------------------

/// Inf-sup constant report.
#[derive(Clone, Debug)]
pub struct BetaReport {
    pub beta: f64,
    /// All singular values of `Mp^{-1/2} Bcirc A1^{-1/2}`, descending.
    pub singular_values: Vec<f64>,
    /// Count of singular values below the nullspace threshold
    /// `1e-8 * sigma_max` (must be exactly 1).
    pub n_null: usize,
}

/// `beta` = second-smallest singular value of `Mp^{-1/2} Bcirc A1^{-1/2}`;
/// exactly one singular value may live below `1e-8 * sigma_max` (the
/// constant-pressure nullspace), anything else is a structural failure.
pub fn compute_infsup_beta(blocks: &AssembledBlocks) -> Result<BetaReport> {
    let db = DenseBlocks::from(blocks);
    let a1_inv_sqrt = crate::dense::spd_inv_sqrt(&db.a1)?;
    let mut g = db.bcirc.matmul(&a1_inv_sqrt);
    for (e, &m) in db.mp.iter().enumerate() {
        let w = 1.0 / m.sqrt();
        for j in 0..g.ncols {
            g[(e, j)] *= w;
        }
    }
    let sv = singular_values(&g);
    let smax = sv[0];
    let thresh = 1e-8 * smax;
    let n_null = sv.iter().filter(|&&s| s < thresh).count();
    if n_null != 1 {
        return Err(Error::Structural(format!(
            "expected a one-dimensional nullspace, found {n_null} singular values below {thresh:.3e}"
        )));
    }
    let beta = sv
        .iter()
        .rev()
        .find(|&&s| s >= thresh)
        .copied()
        .ok_or_else(|| Error::Structural("all singular values below threshold".into()))?;
    Ok(BetaReport {
        beta,
        singular_values: sv,
        n_null,
    })
}

/// Eigenvalue structure of `P2e^{-1} A2e`: the nontrivial eigenvalues are
/// `eps + sigma_i^2` for the generalized eigenvalues `sigma_i^2` of
/// `(Bcirc A1^{-1} Bcirc^T, Mp)`; the rest are exactly 1.
pub fn dense_schur_elasticity(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
) -> Result<SpectralReport> {
    let db = DenseBlocks::from(blocks);
    let eps = params.epsilon;
    let d = params.dim as f64;
    let sb = db.b_a1inv_bt()?;
    let mp = DMat::from_diag(&db.mp);
    let gev = gen_sym_eigenvalues(&sb, &mp)?;
    let eigs: Vec<f64> = gev.iter().map(|s| eps + s).collect();
    let beta_rep = compute_infsup_beta(blocks)?;
    let beta = beta_rep.beta;
    let min_eig = eigs[0];
    let max_eig = *eigs.last().unwrap();
    let cluster_split = (eps + beta * beta) / 2.0 + eps / 2.0;
    let below = eigs.iter().filter(|&&l| l < cluster_split).count();
    let pass = (min_eig - eps).abs() <= 1e-8 * eps.max(1e-300)
        && below == 1
        && max_eig <= d + eps + 1e-8
        && eigs[1] >= eps + beta * beta - 1e-8;
    Ok(SpectralReport {
        tag: "S2e".into(),
        n: blocks.n,
        lambda: params.lambda,
        c0: params.c0,
        dt: params.dt,
        eigs,
        min_eig,
        max_eig,
        bound: d + eps,
        pass,
        beta: Some(beta),
    })
}

// ---------------------------------------------------------------------------
// Three-field Schur complement bounds
// ---------------------------------------------------------------------------

/// The dense three-field Schur complement
/// `S3t = [ (mu/a^2) Dt + eps Mp, eps Mp; eps Mp, eps Mp + B A1^{-1} B^T ]`.
pub fn dense_s3_tilde(db: &DenseBlocks, params: &ProblemParams) -> Result<DMat> {
    let ne = db.n_interior;
    let eps = params.epsilon;
    let scale = params.mu / (params.alpha * params.alpha);
    let dt = db.d_tilde(params)?;
    let sb = db.b_a1inv_bt()?;
    let mut s = DMat::zeros(2 * ne, 2 * ne);
    for i in 0..ne {
        for j in 0..ne {
            s[(i, j)] = scale * dt[(i, j)];
            s[(ne + i, ne + j)] = sb[(i, j)];
        }
    }
    for e in 0..ne {
        let m = eps * db.mp[e];
        s[(e, e)] += m;
        s[(e, ne + e)] += m;
        s[(ne + e, e)] += m;
        s[(ne + e, ne + e)] += m;
    }
    Ok(s)
}

/// Both semidefiniteness bounds of the three-field proposition:
/// `blkdiag((mu/a^2) Dt, 0) <= S3t <= blkdiag(2((mu/a^2) Dt + eps Mp),
/// (2 eps + d) Mp)`, each checked to min-eigenvalue >= -1e-8 (relative to
/// the block scale).
pub fn dense_schur_three_field(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
) -> Result<SpectralReport> {
    let db = DenseBlocks::from(blocks);
    let ne = db.n_interior;
    let eps = params.epsilon;
    let d = params.dim as f64;
    let scale = params.mu / (params.alpha * params.alpha);
    let s3 = dense_s3_tilde(&db, params)?;
    let dt = db.d_tilde(params)?;

    // S3t - lower bound.
    let mut low = s3.clone();
    for i in 0..ne {
        for j in 0..ne {
            low[(i, j)] -= scale * dt[(i, j)];
        }
    }
    low.symmetrize();
    let min_low = sym_eigen(&low, false).values[0];

    // Upper bound - S3t.
    let mut up = s3.clone();
    up.scale(-1.0);
    for i in 0..ne {
        for j in 0..ne {
            up[(i, j)] += 2.0 * scale * dt[(i, j)];
        }
    }
    for e in 0..ne {
        up[(e, e)] += 2.0 * eps * db.mp[e];
        up[(ne + e, ne + e)] += (2.0 * eps + d) * db.mp[e];
    }
    up.symmetrize();
    let min_up = sym_eigen(&up, false).values[0];

    let norm_scale = s3.max_abs().max(1.0);
    let tol = 1e-8 * norm_scale;
    let pass = min_low >= -tol && min_up >= -tol;
    Ok(SpectralReport {
        tag: "S3t".into(),
        n: blocks.n,
        lambda: params.lambda,
        c0: params.c0,
        dt: params.dt,
        eigs: vec![min_low, min_up],
        min_eig: min_low.min(min_up),
        max_eig: 0.0,
        bound: 0.0,
        pass,
        beta: None,
    })
}

/// At small `eps`, `eig(S3hat^{-1} S3t)` equals a cluster of ones plus the
/// generalized eigenvalues of `(B A1^{-1} B^T, Mp)`, to 1e-4. Returns
/// `(computed, reference)` sorted ascending.
pub fn three_field_shat_spectrum(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let db = DenseBlocks::from(blocks);
    let ne = db.n_interior;
    let eps = params.epsilon;
    let scale = params.mu / (params.alpha * params.alpha);
    let s3 = dense_s3_tilde(&db, params)?;
    let dt = db.d_tilde(params)?;
    let mut shat = DMat::zeros(2 * ne, 2 * ne);
    for i in 0..ne {
        for j in 0..ne {
            shat[(i, j)] = scale * dt[(i, j)];
        }
    }
    for e in 0..ne {
        shat[(e, e)] += eps * db.mp[e];
        shat[(ne + e, ne + e)] = db.mp[e];
    }
    let computed = gen_sym_eigenvalues(&s3, &shat)?;
    let sb = db.b_a1inv_bt()?;
    let mp = DMat::from_diag(&db.mp);
    let mut reference = gen_sym_eigenvalues(&sb, &mp)?;
    reference.extend(std::iter::repeat(1.0).take(ne));
    reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((computed, reference))
}

// ---------------------------------------------------------------------------
// Dense preconditioned operators (for the cluster/outlier invariants)
// ---------------------------------------------------------------------------

/// Dense `P^{-1} A` for the elasticity pair `(A2e, P2e)`.
pub fn dense_p2e_preconditioned(blocks: &AssembledBlocks, params: &ProblemParams) -> Result<DMat> {
    let db = DenseBlocks::from(blocks);
    let nu = db.n_u_free;
    let ne = db.n_interior;
    let n = nu + ne;
    let eps = params.epsilon;
    let bt = db.bcirc.transpose();
    let mut a = DMat::zeros(n, n);
    a.set_block(0, 0, &db.a1);
    for i in 0..nu {
        for j in 0..ne {
            a[(i, nu + j)] = -bt[(i, j)];
            a[(nu + j, i)] = -db.bcirc[(j, i)];
        }
    }
    for e in 0..ne {
        a[(nu + e, nu + e)] = -eps * db.mp[e];
    }
    let mut p = a.clone();
    for i in nu..n {
        for j in 0..nu {
            p[(i, j)] = 0.0;
        }
    }
    for e in 0..ne {
        p[(nu + e, nu + e)] = -db.mp[e];
    }
    let lu = Lu::factor(&p)?;
    Ok(lu.solve_mat(&a))
}

/// Dense two-field pair `(A2, P2)` over `(u, p)` (full pressure) and the
/// facet-eliminated pair `(A2t, P2t)` over `(u, p_int)`.
pub struct TwoFieldDense {
    pub a2: DMat,
    pub p2: DMat,
    pub a2t: DMat,
    pub p2t: DMat,
}

pub fn dense_two_field_pair(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
) -> Result<TwoFieldDense> {
    let db = DenseBlocks::from(blocks);
    let nu = db.n_u_free;
    let np = db.n_p_free;
    let ne = db.n_interior;
    let eps = params.epsilon;
    let mu = params.mu;
    let coup = params.alpha * eps / mu;
    // Leading block.
    let mut lead = db.a1.clone();
    lead.scale(eps);
    lead.add_scaled(1.0, &db.a0());
    // Full D over free pressure dofs.
    let mut d_full = db.ap.clone();
    d_full.scale(params.kappa * params.dt);
    for e in 0..ne {
        d_full[(e, e)] += params.c0 * db.mp[e];
    }
    let build = |dmat: &DMat, npp: usize| -> (DMat, DMat) {
        let n = nu + npp;
        let mut a2 = DMat::zeros(n, n);
        a2.set_block(0, 0, &lead);
        for i in 0..nu {
            for q in 0..ne.min(npp) {
                a2[(i, nu + q)] = coup * db.bcirc[(q, i)];
                a2[(nu + q, i)] = coup * db.bcirc[(q, i)];
            }
        }
        for i in 0..npp {
            for j in 0..npp {
                a2[(nu + i, nu + j)] -= eps / mu * dmat[(i, j)];
            }
        }
        let mut p2 = a2.clone();
        for i in nu..n {
            for j in 0..nu {
                p2[(i, j)] = 0.0;
            }
        }
        (a2, p2)
    };
    let (a2, p2) = build(&d_full, np);
    let dt = db.d_tilde(params)?;
    let (a2t, p2t) = build(&dt, ne);
    Ok(TwoFieldDense { a2, p2, a2t, p2t })
}

/// Dense three-field pair `(A3, P3)` over `(u, q, z)`.
pub fn dense_three_field_pair(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
) -> Result<(DMat, DMat)> {
    let db = DenseBlocks::from(blocks);
    let nu = db.n_u_free;
    let np = db.n_p_free;
    let ne = db.n_interior;
    let eps = params.epsilon;
    let scale = params.mu / (params.alpha * params.alpha);
    let n = nu + np + ne;
    // Dtt over free pressure dofs.
    let mut dtt = db.ap.clone();
    dtt.scale(params.kappa * params.dt);
    let mass_coef = params.c0 + params.alpha * params.alpha * eps / params.mu;
    for e in 0..ne {
        dtt[(e, e)] += mass_coef * db.mp[e];
    }
    let mut a3 = DMat::zeros(n, n);
    a3.set_block(0, 0, &db.a1);
    for i in 0..nu {
        for e in 0..ne {
            a3[(i, nu + np + e)] = -db.bcirc[(e, i)];
            a3[(nu + np + e, i)] = -db.bcirc[(e, i)];
        }
    }
    for i in 0..np {
        for j in 0..np {
            a3[(nu + i, nu + j)] = -scale * dtt[(i, j)];
        }
    }
    for e in 0..ne {
        let m = eps * db.mp[e];
        a3[(nu + e, nu + np + e)] = -m;
        a3[(nu + np + e, nu + e)] = -m;
        a3[(nu + np + e, nu + np + e)] = -m;
    }
    let mut p3 = a3.clone();
    for i in nu..n {
        for j in 0..nu {
            p3[(i, j)] = 0.0;
        }
    }
    for e in 0..ne {
        p3[(nu + e, nu + np + e)] = 0.0;
        p3[(nu + np + e, nu + e)] = 0.0;
        p3[(nu + np + e, nu + np + e)] = -db.mp[e];
    }
    Ok((a3, p3))
}

/// Multiset identity `eig(P2^{-1} A2) = {1}^(n_facet_p) u eig(P2t^{-1}
/// A2t)` verified through the determinant ratio
/// `det(A2 - s P2) det(P2t) / (det(A2t - s P2t) det(P2))  = (1-s)^k`
/// at sample points `s` away from the spectrum.
pub fn two_field_multiset_identity(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
) -> Result<f64> {
    let pair = dense_two_field_pair(blocks, params)?;
    let k = (blocks.n_p_free - blocks.n_interior) as f64;
    let samples = [-2.0, -0.75, -0.3, 0.25, 3.5, 5.0];
    let (sp2, lp2) = Lu::factor(&pair.p2)?.signed_log_det();
    let (sp2t, lp2t) = Lu::factor(&pair.p2t)?.signed_log_det();
    let mut worst: f64 = 0.0;
    for &s in &samples {
        let mut m_full = pair.a2.clone();
        m_full.add_scaled(-s, &pair.p2);
        let (sf, lf) = Lu::factor(&m_full)?.signed_log_det();
        let mut m_red = pair.a2t.clone();
        m_red.add_scaled(-s, &pair.p2t);
        let (sr, lr) = Lu::factor(&m_red)?.signed_log_det();
        // log |R| and sign of R must match (1-s)^k.
        let log_r = (lf + lp2t) - (lr + lp2);
        let sign_r = sf * sp2t * sr * sp2;
        let expect_log = k * (1.0 - s).abs().ln();
        let expect_sign = if (1.0 - s) < 0.0 && (k as usize) % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        if sign_r != expect_sign {
            return Err(Error::Structural(format!(
                "determinant sign mismatch at sample {s}"
            )));
        }
        let denom = expect_log.abs().max(1.0);
        worst = worst.max((log_r - expect_log).abs() / denom);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Appendix lemma suite on random saddle systems
// ---------------------------------------------------------------------------

/// Outcome of the randomized block-triangular eigenvalue lemma suite.
#[derive(Clone, Debug)]
pub struct LemmaSuiteReport {
    pub systems: usize,
    /// Worst |eig multiset mismatch| across general systems.
    pub worst_multiset_gap: f64,
    /// Worst `||(M - I)^2||_F` across the `Shat = S` systems.
    pub worst_exact_schur: f64,
    /// Worst minimal-polynomial annihilation norm for the `C = 0` systems.
    pub worst_c0_annihilation: f64,
    /// Worst gap of `eig(Shat^{-1} S)` from `{0, 1}` in the pseudo-inverse
    /// construction on singular `S`.
    pub worst_pseudo_inverse: f64,
    pub pass: bool,
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMat {
    let mut m = DMat::zeros(r, c);
    for v in m.data.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    m
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMat {
    let r = random_matrix(rng, n, n);
    let mut a = r.matmul(&r.transpose());
    for i in 0..n {
        a[(i, i)] += 0.5 * n as f64 + 1.0;
    }
    a
}

fn saddle(a: &DMat, bt: &DMat, c: &DMat, d: &DMat) -> DMat {
    let n1 = a.nrows;
    let n2 = d.nrows;
    let mut m = DMat::zeros(n1 + n2, n1 + n2);
    m.set_block(0, 0, a);
    m.set_block(0, n1, bt);
    m.set_block(n1, 0, c);
    let mut md = d.clone();
    md.scale(-1.0);
    m.set_block(n1, n1, &md);
    m
}

fn block_triangular(a: &DMat, bt: &DMat, shat: &DMat) -> DMat {
    let n1 = a.nrows;
    let n2 = shat.nrows;
    let mut p = DMat::zeros(n1 + n2, n1 + n2);
    p.set_block(0, 0, a);
    p.set_block(0, n1, bt);
    let mut ms = shat.clone();
    ms.scale(-1.0);
    p.set_block(n1, n1, &ms);
    p
}

/// Compare two complex eigenvalue multisets sorted by (re, im).
fn multiset_gap(mut x: Vec<(f64, f64)>, mut y: Vec<(f64, f64)>) -> f64 {
    let key = |a: &(f64, f64), b: &(f64, f64)| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
    };
    x.sort_by(key);
    y.sort_by(key);
    x.iter()
        .zip(&y)
        .map(|(a, b)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
        .fold(0.0_f64, f64::max)
}

/// Run the lemma suite on `systems` random saddle systems (sizes <= 12):
/// the eigenvalue multiset identity, the `(M-I)^2` annihilation for
/// `Shat = S`, the `C = 0` minimal-polynomial annihilation, and the
/// `(S^+)^+` pseudo-inverse spectrum `{0, 1}` on singular `S`.
pub fn lemma_a1_suite(seed: u64, systems: usize) -> Result<LemmaSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_multiset: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    let mut worst_c0: f64 = 0.0;
    let mut worst_pseudo: f64 = 0.0;
    for _ in 0..systems {
        let n1 = rng.random_range(3..=8usize);
        let n2 = rng.random_range(1..=4usize);
        let a = random_spd(&mut rng, n1);
        let bt = random_matrix(&mut rng, n1, n2);
        let c = random_matrix(&mut rng, n2, n1);
        // PSD D with random rank.
        let rank = rng.random_range(0..=n2);
        let d = if rank == 0 {
            DMat::zeros(n2, n2)
        } else {
            let r = random_matrix(&mut rng, n2, rank);
            r.matmul(&r.transpose())
        };
        let ainv = Lu::factor(&a)?.inverse();
        let s = {
            let mut s = d.clone();
            let prod = c.matmul(&ainv).matmul(&bt);
            s.add_scaled(1.0, &prod);
            s
        };

        // (a) General C, random nonsingular Shat: multiset identity.
        let shat = {
            let mut m = random_matrix(&mut rng, n2, n2);
            for i in 0..n2 {
                m[(i, i)] += n2 as f64 + 1.0;
            }
            m
        };
        let m_full = {
            let asys = saddle(&a, &bt, &c, &d);
            let p = block_triangular(&a, &bt, &shat);
            Lu::factor(&p)?.solve_mat(&asys)
        };
        let eig_m = general_eigenvalues(&m_full);
        let shat_inv_s = Lu::factor(&shat)?.solve_mat(&s);
        let mut expect = general_eigenvalues(&shat_inv_s);
        expect.extend(std::iter::repeat((1.0, 0.0)).take(n1));
        worst_multiset = worst_multiset.max(multiset_gap(eig_m, expect.clone()));

        // (b) Shat = S when S is safely nonsingular: ||(M - I)^2|| small.
        let s_lu = Lu::factor(&s);
        if let Ok(slu) = s_lu {
            let (_, logdet) = slu.signed_log_det();
            if logdet > -20.0 {
                let p = block_triangular(&a, &bt, &s);
                let m = Lu::factor(&p)?.solve_mat(&saddle(&a, &bt, &c, &d));
                let mut mi = m.clone();
                mi.add_scaled(-1.0, &DMat::identity(m.nrows));
                let sq = mi.matmul(&mi);
                worst_exact = worst_exact.max(sq.norm_fro());
            }
        }

        // (c) C = 0: (M - I) p_{Shat^{-1} S}(M) = 0 with S = D.
        // Use an SPD Shat and an SPD-ish S so the eigenvalues are real and
        // the minimal polynomial factors are well-scaled.
        let s_c0 = random_spd(&mut rng, n2);
        let shat_c0 = random_spd(&mut rng, n2);
        let asys = saddle(&a, &bt, &DMat::zeros(n2, n1), &s_c0);
        let p = block_triangular(&a, &bt, &shat_c0);
        let m = Lu::factor(&p)?.solve_mat(&asys);
        let evals = gen_sym_eigenvalues(&s_c0, &shat_c0)?;
        let mut poly = {
            let mut mi = m.clone();
            mi.add_scaled(-1.0, &DMat::identity(m.nrows));
            mi
        };
        for lam in evals {
            let mut f = m.clone();
            f.add_scaled(-lam, &DMat::identity(m.nrows));
            poly = poly.matmul(&f);
        }
        worst_c0 = worst_c0.max(poly.norm_fro());

        // (d) Pseudo-inverse choice on a singular symmetric S: with
        // Shat = (S^+)^+ the eigenvalues of Shat^{-1} S are 0 and 1.
        if n2 >= 2 {
            let rank = n2 - 1;
            let bdef = random_matrix(&mut rng, n1, rank);
            let mut bt_sing = DMat::zeros(n1, n2);
            // B^T with linearly dependent last column.
            bt_sing.set_block(0, 0, &bdef);
            for i in 0..n1 {
                bt_sing[(i, n2 - 1)] = bdef[(i, 0)];
            }
            let s_sing = {
                let x = Lu::factor(&a)?.solve_mat(&bt_sing);
                let mut s = bt_sing.transpose().matmul(&x);
                s.symmetrize();
                s
            };
            let eig = sym_eigen(&s_sing, true);
            let q = eig.vectors.as_ref().unwrap();
            let smax = eig.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
            let mut shat_pp = DMat::zeros(n2, n2);
            for k in 0..n2 {
                let lam = if eig.values[k].abs() <= 1e-12 * smax.max(1.0) {
                    1.0
                } else {
                    eig.values[k]
                };
                for i in 0..n2 {
                    for j in 0..n2 {
                        shat_pp[(i, j)] += lam * q[(i, k)] * q[(j, k)];
                    }
                }
            }
            let vals = gen_sym_eigenvalues(&s_sing, &shat_pp)?;
            for v in vals {
                let gap = v.abs().min((v - 1.0).abs());
                worst_pseudo = worst_pseudo.max(gap);
            }
        }
    }
    let pass =
        worst_multiset <= 1e-8 && worst_exact <= 1e-10 && worst_c0 <= 1e-8 && worst_pseudo <= 1e-8;
    Ok(LemmaSuiteReport {
        systems,
        worst_multiset_gap: worst_multiset,
        worst_exact_schur: worst_exact,
        worst_c0_annihilation: worst_c0,
        worst_pseudo_inverse: worst_pseudo,
        pass,
    })
}

/// Lemma 3.1 identity: `||C A^{-1} C^T||_2` equals the largest generalized
/// eigenvalue of `(C^T C, A)`; returns the worst relative gap over random
/// instances.
pub fn lemma_31_identity(seed: u64, trials: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let m = rng.random_range(3..=8usize);
        let k = rng.random_range(1..=6usize);
        let a = random_spd(&mut rng, m);
        let c = random_matrix(&mut rng, k, m);
        let ainv = Lu::factor(&a)?.inverse();
        let mut cact = c.matmul(&ainv).matmul(&c.transpose());
        cact.symmetrize();
        let norm = crate::dense::sym_norm2(&cact);
        let ctc = c.transpose().matmul(&c);
        let gev = gen_sym_eigenvalues(&ctc, &a)?;
        let sup = gev.last().copied().unwrap();
        worst = worst.max((norm - sup).abs() / sup.max(1e-300));
    }
    Ok(worst)
}
