//! Manufactured problems (2D elasticity, 2D/3D poroelasticity) and Lame
//! parameter conversion.
//!
//! The poroelasticity fields are proportional to `t`, so a single implicit
//! Euler step from the zero state at `t = dt` is exact in time up to the
//! spatial discretization error.

use crate::assembly::{ProblemData, ProblemParams};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Solve the Lame relations for `(mu, nu, eps)` given `E` and `lambda`:
/// `nu` is the positive root of `2 lambda nu^2 + (E + lambda) nu - lambda
/// = 0`, then `mu = E / (2(1+nu))` and `eps = mu / (lambda + mu)`.
pub fn lame_from_e_lambda(e: f64, lambda: f64) -> Result<(f64, f64, f64)> {
    if e <= 0.0 || lambda <= 0.0 {
        return Err(Error::InvalidArgument(
            "E and lambda must be positive".into(),
        ));
    }
    let b = e + lambda;
    let nu = (-b + (b * b + 8.0 * lambda * lambda).sqrt()) / (4.0 * lambda);
    let mu = e / (2.0 * (1.0 + nu));
    let eps = mu / (lambda + mu);
    Ok((mu, nu, eps))
}

/// Full parameter point from `(E, lambda)` and the remaining scalars.
pub fn lame_params(
    e: f64,
    lambda: f64,
    alpha: f64,
    c0: f64,
    kappa: f64,
    dt: f64,
    dim: usize,
) -> Result<ProblemParams> {
    let (mu, nu, eps) = lame_from_e_lambda(e, lambda)?;
    let p = ProblemParams {
        e_modulus: e,
        lambda,
        mu,
        nu,
        epsilon: eps,
        alpha,
        c0,
        kappa,
        dt,
        dim,
    };
    p.validate()?;
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Elasticity2d,
    Poro2d,
    Poro3d,
}

impl ProblemKind {
    pub fn dim(&self) -> usize {
        match self {
            ProblemKind::Poro3d => 3,
            _ => 2,
        }
    }

    pub fn parse(s: &str) -> Result<ProblemKind> {
        match s {
            "elasticity" | "elasticity2d" => Ok(ProblemKind::Elasticity2d),
            "poro2" | "poro2d" => Ok(ProblemKind::Poro2d),
            "poro3" | "poro3d" => Ok(ProblemKind::Poro3d),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem kind '{other}'"
            ))),
        }
    }
}

/// A manufactured problem: exact fields where available, forcing, source,
/// and Dirichlet data.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub params: ProblemParams,
}

/// Build a problem instance; the dimension of `params` must match the
/// kind.
pub fn make_problem(kind: ProblemKind, params: ProblemParams) -> Result<ProblemInstance> {
    if params.dim != kind.dim() {
        return Err(Error::InvalidArgument(format!(
            "problem {:?} needs dim {}, params have {}",
            kind,
            kind.dim(),
            params.dim
        )));
    }
    params.validate()?;
    Ok(ProblemInstance { kind, params })
}

impl ProblemInstance {
    /// Exact displacement, for problems that have a closed-form solution.
    pub fn exact_u(&self, x: [f64; 3], t: f64) -> Option<[f64; 3]> {
        let p = &self.params;
        match self.kind {
            ProblemKind::Elasticity2d => Some([
                (x[0]).sin() * (x[1]).sin() + x[0] / p.lambda,
                (x[0]).cos() * (x[1]).cos() + x[1] / p.lambda,
                0.0,
            ]),
            ProblemKind::Poro2d => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                let c = 1.0 / (p.lambda + p.mu);
                Some([
                    t * ((-1.0 + (2.0 * PI * x[0]).cos()) * (2.0 * PI * x[1]).sin() + c * sx * sy),
                    t * ((2.0 * PI * x[0]).sin() * (1.0 - (2.0 * PI * x[1]).cos()) + c * sx * sy),
                    0.0,
                ])
            }
            ProblemKind::Poro3d => None,
        }
    }

    /// Exact pressure, for problems that have a closed-form solution.
    pub fn exact_p(&self, x: [f64; 3], t: f64) -> Option<f64> {
        match self.kind {
            ProblemKind::Poro2d => Some(-t * (PI * x[0]).sin() * (PI * x[1]).sin()),
            _ => None,
        }
    }
}

impl ProblemData for ProblemInstance {
    fn dim(&self) -> usize {
        self.kind.dim()
    }

    fn forcing(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let p = &self.params;
        let (mu, lambda, alpha) = (p.mu, p.lambda, p.alpha);
        match self.kind {
            ProblemKind::Elasticity2d => [
                2.0 * mu * x[0].sin() * x[1].sin(),
                2.0 * mu * x[0].cos() * x[1].cos(),
                0.0,
            ],
            ProblemKind::Poro2d => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                let (cx, cy) = ((PI * x[0]).cos(), (PI * x[1]).cos());
                let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
                let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
                let pi2 = PI * PI;
                let csum = (PI * (x[0] + x[1])).cos();
                let f1 = -t
                    * (-8.0 * pi2 * mu * c2x * s2y - 2.0 * pi2 * mu / (lambda + mu) * sx * sy
                        + 4.0 * pi2 * mu * s2y
                        + pi2 * csum
                        + alpha * PI * cx * sy);
                let f2 = -t
                    * (8.0 * pi2 * mu * s2x * c2y
                        - 2.0 * pi2 * mu / (lambda + mu) * sx * sy
                        - 4.0 * pi2 * mu * s2x
                        + pi2 * csum
                        + alpha * PI * sx * cy);
                [f1, f2, 0.0]
            }
            ProblemKind::Poro3d => {
                let (sx, sy, sz) = ((PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[2]).sin());
                let (cx, cy, cz) = ((PI * x[0]).cos(), (PI * x[1]).cos(), (PI * x[2]).cos());
                let (s2x, s2y, s2z) = (
                    (2.0 * PI * x[0]).sin(),
                    (2.0 * PI * x[1]).sin(),
                    (2.0 * PI * x[2]).sin(),
                );
                let (c2x, c2y, c2z) = (
                    (2.0 * PI * x[0]).cos(),
                    (2.0 * PI * x[1]).cos(),
                    (2.0 * PI * x[2]).cos(),
                );
                let pi2 = PI * PI;
                let lame_ratio = (4.0 * mu + lambda) / (mu + lambda);
                let f1 = t
                    * (4.0 * mu * c2x * s2y * s2z * pi2 + lame_ratio * sx * sy * sz * pi2
                        - cx * cy * sz * pi2
                        - cx * sy * cz * pi2
                        + 8.0 * pi2 * mu * (-1.0 + c2x) * s2y * s2z
                        + alpha * PI * cx * sy * sz);
                let f2 = t
                    * (-pi2 * cx * cy * sz + lame_ratio * sx * sy * sz * pi2 - sx * cy * cz * pi2
                        + 16.0 * pi2 * mu * s2x * (1.0 - c2y) * s2z
                        - 8.0 * pi2 * mu * s2x * c2y * s2z
                        + alpha * PI * sx * cy * sz);
                let f3 = t
                    * (lame_ratio * sx * sy * sz * pi2 + 4.0 * pi2 * mu * s2x * s2y * c2z
                        - cx * sy * cz * pi2
                        - sx * cy * cz * pi2
                        + 8.0 * pi2 * mu * (-1.0 + c2z) * s2x * s2y
                        + alpha * PI * sx * sy * cz);
                [f1, f2, f3]
            }
        }
    }

    fn source(&self, x: [f64; 3], t: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            ProblemKind::Elasticity2d => 0.0,
            ProblemKind::Poro2d => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                -p.c0 * sx * sy
                    + PI * p.alpha / (p.lambda + p.mu) * (PI * (x[0] + x[1])).sin()
                    + t * (2.0 * PI * PI * sx * sy)
            }
            ProblemKind::Poro3d => {
                let (sx, sy, sz) = ((PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[2]).sin());
                let (cx, cy, cz) = ((PI * x[0]).cos(), (PI * x[1]).cos(), (PI * x[2]).cos());
                p.alpha * PI / (p.mu + p.lambda) * (cx * sy * sz + sx * cy * sz + sx * sy * cz)
                    + (3.0 * PI * PI * t + p.c0) * sx * sy * sz
            }
        }
    }

    fn dirichlet_u(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        match self.kind {
            // The poro solutions vanish on the boundary (sin factors), and
            // poro3d uses homogeneous data by construction.
            ProblemKind::Poro2d | ProblemKind::Poro3d => [0.0; 3],
            ProblemKind::Elasticity2d => self.exact_u(x, t).unwrap(),
        }
    }

    fn dirichlet_p(&self, _x: [f64; 3], _t: f64) -> f64 {
        // Homogeneous for every poro problem in the experiment set.
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lame_conversion_examples() {
        // Quadratic-root oracle plus back-substitution into lambda(nu, E).
        let (mu, nu, eps) = lame_from_e_lambda(1.0, 1.4286).unwrap();
        assert!((nu - 0.4).abs() < 2e-4, "nu = {nu}");
        assert!((mu - 0.35714).abs() < 1e-4, "mu = {mu}");
        assert!((eps - 0.2).abs() < 2e-4, "eps = {eps}");
        let lam_back = nu * 1.0 / ((1.0 - 2.0 * nu) * (1.0 + nu));
        assert!((lam_back - 1.4286).abs() < 1e-10 * 1.4286);

        let (mu, nu, eps) = lame_from_e_lambda(1.0, 1.6667e3).unwrap();
        assert!((nu - 0.4999).abs() < 2e-4, "nu = {nu}");
        assert!((mu - 0.33336).abs() < 1e-4, "mu = {mu}");
        assert!((eps - 2.0e-4).abs() < 1e-5, "eps = {eps}");
        let lam_back = nu / ((1.0 - 2.0 * nu) * (1.0 + nu));
        assert!((lam_back - 1.6667e3).abs() < 1e-10 * 1.6667e3);
    }

    #[test]
    fn lame_large_lambda_limit() {
        let e = 1.0;
        let (mu, nu, eps) = lame_from_e_lambda(e, 1e12).unwrap();
        assert!((nu - 0.5).abs() < 1e-6);
        assert!((mu - e / 3.0).abs() < 1e-6);
        assert!(eps < 1e-9);
    }

    #[test]
    fn lame_invalid_inputs() {
        assert!(lame_from_e_lambda(0.0, 1.0).is_err());
        assert!(lame_from_e_lambda(1.0, -2.0).is_err());
    }

    fn params(kind: ProblemKind, lambda: f64, c0: f64) -> ProblemParams {
        lame_params(1.0, lambda, 1.0, c0, 1.0, 1e-3, kind.dim()).unwrap()
    }

    #[test]
    fn elasticity_forcing_point_value() {
        let p = params(ProblemKind::Elasticity2d, 1.4286, 0.0);
        let prob = make_problem(ProblemKind::Elasticity2d, p).unwrap();
        let f = prob.forcing([PI / 2.0, PI / 2.0, 0.0], 0.0);
        assert!((f[0] - 2.0 * p.mu).abs() < 1e-14);
        assert!(f[1].abs() < 1e-14);
    }

    #[test]
    fn elasticity_divergence_identity() {
        // div u = 2 / lambda identically.
        let p = params(ProblemKind::Elasticity2d, 1.6667e3, 0.0);
        let prob = make_problem(ProblemKind::Elasticity2d, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let x: [f64; 3] = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0];
            // analytic divergence of the displayed u
            let div = x[0].cos() * x[1].sin()
                + 1.0 / p.lambda
                + (-x[0].cos() * x[1].sin() + 1.0 / p.lambda);
            assert!((div - 2.0 / p.lambda).abs() < 1e-14);
            let _ = prob.exact_u(x, 0.0).unwrap();
        }
    }

    #[test]
    fn poro2d_boundary_and_time_scaling() {
        let p = params(ProblemKind::Poro2d, 1.4286, 1.0);
        let prob = make_problem(ProblemKind::Poro2d, p).unwrap();
        // Vanishes on the boundary.
        for &x in &[0.0, 1.0] {
            for s in 0..=10 {
                let y = s as f64 / 10.0;
                let u = prob.exact_u([x, y, 0.0], 0.7).unwrap();
                assert!(u[0].abs() < 1e-13 && u[1].abs() < 1e-13);
                let u = prob.exact_u([y, x, 0.0], 0.7).unwrap();
                assert!(u[0].abs() < 1e-13 && u[1].abs() < 1e-13);
                assert!(prob.exact_p([x, y, 0.0], 0.7).unwrap().abs() < 1e-13);
            }
        }
        // Fields vanish at t = 0.
        let u0 = prob.exact_u([0.3, 0.4, 0.0], 0.0).unwrap();
        assert_eq!(u0, [0.0, 0.0, 0.0]);
        assert_eq!(prob.exact_p([0.3, 0.4, 0.0], 0.0).unwrap(), 0.0);
    }

    /// Analytic strong-form residual oracle for poro2d: derivatives of the
    /// displayed exact fields, written independently of the forcing
    /// transcription.
    mod poro2d_oracle {
        use super::PI;

        pub fn laplace_u(x: f64, y: f64, t: f64, lam_mu: f64) -> [f64; 2] {
            let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
            let (s2x, s2y) = ((2.0 * PI * x).sin(), (2.0 * PI * y).sin());
            let (c2x, c2y) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos());
            let pi2 = PI * PI;
            let du1 = t * (-8.0 * pi2 * c2x * s2y + 4.0 * pi2 * s2y - 2.0 * pi2 / lam_mu * sx * sy);
            let du2 = t * (8.0 * pi2 * s2x * c2y - 4.0 * pi2 * s2x - 2.0 * pi2 / lam_mu * sx * sy);
            [du1, du2]
        }

        pub fn grad_div_u(x: f64, y: f64, t: f64, lam_mu: f64) -> [f64; 2] {
            // div u = t * (pi / lam_mu) * sin(pi(x+y))
            let g = t * PI * PI / lam_mu * (PI * (x + y)).cos();
            [g, g]
        }

        pub fn grad_p(x: f64, y: f64, t: f64) -> [f64; 2] {
            [
                -t * PI * (PI * x).cos() * (PI * y).sin(),
                -t * PI * (PI * x).sin() * (PI * y).cos(),
            ]
        }

        pub fn div_u_t(x: f64, y: f64, lam_mu: f64) -> f64 {
            PI / lam_mu * (PI * (x + y)).sin()
        }

        pub fn p_t(x: f64, y: f64) -> f64 {
            -(PI * x).sin() * (PI * y).sin()
        }

        pub fn laplace_p(x: f64, y: f64, t: f64) -> f64 {
            2.0 * t * PI * PI * (PI * x).sin() * (PI * y).sin()
        }
    }

    #[test]
    fn poro2d_momentum_residual_matches_displayed_forcing() {
        // -mu lap(u) - (lambda+mu) grad(div u) + alpha grad(p) == f.
        let p = params(ProblemKind::Poro2d, 1.4286, 1.0);
        let prob = make_problem(ProblemKind::Poro2d, p).unwrap();
        let lam_mu = p.lambda + p.mu;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = 1e-3;
        for _ in 0..20 {
            let (x, y) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let lap = poro2d_oracle::laplace_u(x, y, t, lam_mu);
            let gd = poro2d_oracle::grad_div_u(x, y, t, lam_mu);
            let gp = poro2d_oracle::grad_p(x, y, t);
            let f = prob.forcing([x, y, 0.0], t);
            for c in 0..2 {
                let derived = -p.mu * lap[c] - lam_mu * gd[c] + p.alpha * gp[c];
                assert!(
                    (derived - f[c]).abs() < 1e-8,
                    "momentum residual at ({x},{y}) comp {c}: {derived} vs {f:?}"
                );
            }
        }
    }

    #[test]
    fn poro2d_mass_residual_documents_displayed_source_sign() {
        // The displayed source differs from the consistency-derived one in
        // the sign of its 2 pi^2 t term; the displayed formula is kept
        // verbatim, and this test pins the exact discrepancy.
        let p = params(ProblemKind::Poro2d, 1.4286, 1.0);
        let prob = make_problem(ProblemKind::Poro2d, p).unwrap();
        let lam_mu = p.lambda + p.mu;
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let t = 1e-3;
        for _ in 0..20 {
            let (x, y) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let derived = p.alpha * poro2d_oracle::div_u_t(x, y, lam_mu)
                + p.c0 * poro2d_oracle::p_t(x, y)
                - poro2d_oracle::laplace_p(x, y, t) * p.kappa;
            let displayed = prob.source([x, y, 0.0], t);
            let gap = displayed - derived;
            let expected_gap = 2.0 * (2.0 * PI * PI * t * (PI * x).sin() * (PI * y).sin());
            assert!(
                (gap - expected_gap).abs() < 1e-10,
                "unexpected source discrepancy at ({x},{y}): {gap} vs {expected_gap}"
            );
        }
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(ProblemKind::parse("stokes").is_err());
        assert!(ProblemKind::parse("poro3").is_ok());
        // Dimension mismatch.
        let p2 = params(ProblemKind::Poro2d, 1.4286, 1.0);
        assert!(make_problem(ProblemKind::Poro3d, p2).is_err());
    }
}
