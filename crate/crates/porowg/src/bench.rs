//! Parameter sweeps over (n, lambda, c0, dt, kappa, preconditioner):
//! builds the manufactured problems, runs one implicit Euler step per grid
//! point, and emits CSV or markdown tables. Grid points may run in
//! parallel; report order always follows grid order and the CSV is
//! byte-reproducible apart from the trailing wall-time column.

use crate::assembly::{
    assemble_blocks, assemble_rhs, boundary_values, AssembledBlocks, BoundaryValues, ProblemParams,
    Rhs, TimeState,
};
use crate::mesh::{build_dof_maps, build_mesh, DofMap, Mesh};
use crate::precond::{
    solve_elasticity, solve_three_field, solve_two_field, PoroSolution, PrecondTag, SolveReport,
};
use crate::problems::{lame_params, make_problem, ProblemInstance, ProblemKind};
use crate::sparse::{CsrMatrix, ResidualMeasure, SolverConfig};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

/// One experiment: a problem kind, the parameter grid, preconditioner
/// tags, solver settings, and output options.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ProblemKind,
    pub ns: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub c0s: Vec<f64>,
    pub dts: Vec<f64>,
    pub kappas: Vec<f64>,
    pub preconds: Vec<PrecondTag>,
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
    pub measure: ResidualMeasure,
    pub format: OutputFormat,
    pub out: Option<std::path::PathBuf>,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<OutputFormat> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown format '{other}'"))),
        }
    }
}

impl ExperimentConfig {
    /// Experiment defaults per problem kind: the 2D profile (tol 1e-6,
    /// restart 30, preconditioned residual) or the 3D profile (tol 1e-3,
    /// restart 28, true residual).
    pub fn preset(kind: ProblemKind) -> ExperimentConfig {
        let solver = match kind {
            ProblemKind::Poro3d => SolverConfig::profile_3d(),
            _ => SolverConfig::profile_2d(),
        };
        let preconds = match kind {
            ProblemKind::Elasticity2d => vec![PrecondTag::P2e],
            ProblemKind::Poro2d => vec![PrecondTag::P2, PrecondTag::P2Dlu],
            ProblemKind::Poro3d => vec![PrecondTag::P3],
        };
        // The static elasticity problem does not sweep c0/dt.
        let (c0s, dts) = match kind {
            ProblemKind::Elasticity2d => (vec![0.0], vec![1e-3]),
            _ => (vec![1.0, 0.0], vec![1e-3, 1e-6]),
        };
        ExperimentConfig {
            kind,
            ns: vec![8, 16],
            lambdas: vec![1.4286, 1.6667e3, 1.6667e6],
            c0s,
            dts,
            kappas: vec![1.0],
            preconds,
            tol: solver.tol,
            restart: solver.restart,
            max_iters: solver.max_iters,
            measure: solver.measure,
            format: OutputFormat::Csv,
            out: None,
            seed: 0,
            jobs: 1,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::new(self.tol, self.restart, self.max_iters, self.measure)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty()
            || self.lambdas.is_empty()
            || self.c0s.is_empty()
            || self.dts.is_empty()
            || self.kappas.is_empty()
        {
            return Err(Error::InvalidArgument("empty parameter list".into()));
        }
        if self.preconds.is_empty() {
            return Err(Error::InvalidArgument("empty preconditioner list".into()));
        }
        for tag in &self.preconds {
            let ok = match self.kind {
                ProblemKind::Elasticity2d => *tag == PrecondTag::P2e,
                _ => matches!(
                    tag,
                    PrecondTag::P2 | PrecondTag::P2Dlu | PrecondTag::P3 | PrecondTag::P3Dlu
                ),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "preconditioner {} does not apply to {:?}",
                    tag.as_str(),
                    self.kind
                )));
            }
        }
        if self.tol <= 0.0 || self.restart == 0 || self.jobs == 0 {
            return Err(Error::InvalidArgument(
                "tol > 0, restart >= 1, jobs >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Assembled discretization shared by every solve on one mesh.
pub struct MeshSetup {
    pub mesh: Mesh,
    pub dm: DofMap,
    pub blocks: AssembledBlocks,
}

/// Build mesh, dof maps, local operators, and global blocks for `(n, dim)`.
pub fn build_setup(n: usize, dim: usize) -> Result<MeshSetup> {
    let mesh = build_mesh(n, dim)?;
    let dm = build_dof_maps(&mesh);
    let ops = crate::wg::local_weak_ops(mesh.h, dim);
    let blocks = assemble_blocks(&mesh, &dm, &ops);
    Ok(MeshSetup { mesh, dm, blocks })
}

/// One implicit Euler step at time `t`: assemble the right-hand side from
/// `state`, solve with `tag`, and return the next state with the report.
pub fn step_implicit_euler(
    setup: &MeshSetup,
    problem: &ProblemInstance,
    params: &ProblemParams,
    state: &TimeState,
    t: f64,
    tag: PrecondTag,
    config: &SolverConfig,
) -> Result<(TimeState, SolveReport)> {
    let bc = boundary_values(&setup.mesh, &setup.dm, problem, t);
    let rhs = assemble_rhs(
        &setup.mesh,
        &setup.dm,
        &setup.blocks,
        problem,
        params,
        t,
        state,
        &bc,
    );
    let (sol, report) = solve_poro(setup, params, &rhs, config, tag)?;
    let next = TimeState {
        u_free: sol.u,
        u_bc: bc.u,
        p_interior: sol.p[..setup.blocks.n_interior].to_vec(),
    };
    Ok((next, report))
}

fn solve_poro(
    setup: &MeshSetup,
    params: &ProblemParams,
    rhs: &Rhs,
    config: &SolverConfig,
    tag: PrecondTag,
) -> Result<(PoroSolution, SolveReport)> {
    match tag {
        PrecondTag::P2 => solve_two_field(&setup.blocks, params, rhs, config, false),
        PrecondTag::P2Dlu => solve_two_field(&setup.blocks, params, rhs, config, true),
        PrecondTag::P3 => solve_three_field(&setup.blocks, params, rhs, config, false),
        PrecondTag::P3Dlu => solve_three_field(&setup.blocks, params, rhs, config, true),
        PrecondTag::P2e => Err(Error::InvalidArgument(
            "p2e applies to the elasticity problem, not the poro system".into(),
        )),
    }
}

/// One grid point of an experiment.
#[derive(Clone, Copy, Debug)]
struct GridPoint {
    n: usize,
    lambda: f64,
    c0: f64,
    dt: f64,
    kappa: f64,
    tag: PrecondTag,
}

/// Run the whole grid; one [`SolveReport`] per point in grid order. Failed
/// points surface as reports with `converged = false` rather than aborting
/// the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SolveReport>> {
    config.validate()?;
    let dim = config.kind.dim();
    let mut grid = Vec::new();
    for &n in &config.ns {
        for &lambda in &config.lambdas {
            for &c0 in &config.c0s {
                for &dt in &config.dts {
                    for &kappa in &config.kappas {
                        for &tag in &config.preconds {
                            grid.push(GridPoint {
                                n,
                                lambda,
                                c0,
                                dt,
                                kappa,
                                tag,
                            });
                        }
                    }
                }
            }
        }
    }
    // Shared assembly per mesh size.
    let mut setups: BTreeMap<usize, Arc<MeshSetup>> = BTreeMap::new();
    for &n in &config.ns {
        if let std::collections::btree_map::Entry::Vacant(e) = setups.entry(n) {
            e.insert(Arc::new(build_setup(n, dim)?));
        }
    }
    let solver_cfg = config.solver_config();
    let kind = config.kind;
    let run_one = |gp: &GridPoint| -> Result<SolveReport> {
        let setup = Arc::clone(&setups[&gp.n]);
        let params = lame_params(1.0, gp.lambda, 1.0, gp.c0, gp.kappa, gp.dt, dim)?;
        let problem = make_problem(kind, params)?;
        match kind {
            ProblemKind::Elasticity2d => {
                let bc = boundary_values(&setup.mesh, &setup.dm, &problem, 0.0);
                let zero = TimeState::zero(&setup.blocks, setup.dm.n_vector_constrained());
                let rhs = assemble_rhs(
                    &setup.mesh,
                    &setup.dm,
                    &setup.blocks,
                    &problem,
                    &params,
                    0.0,
                    &zero,
                    &bc,
                );
                let (_, report) = solve_elasticity(&setup.blocks, &params, &rhs.b1, &solver_cfg)?;
                Ok(report)
            }
            _ => {
                // Single step from the zero state at t = dt (the exact
                // fields are proportional to t).
                let zero = TimeState::zero(&setup.blocks, setup.dm.n_vector_constrained());
                let (_, report) = step_implicit_euler(
                    &setup,
                    &problem,
                    &params,
                    &zero,
                    gp.dt,
                    gp.tag,
                    &solver_cfg,
                )?;
                Ok(report)
            }
        }
    };
    let reports: Vec<Result<SolveReport>> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        use rayon::prelude::*;
        pool.install(|| grid.par_iter().map(run_one).collect())
    } else {
        grid.iter().map(run_one).collect()
    };
    reports.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str =
    "dim,n,lambda,mu,eps,c0,dt,kappa,precond,iters,converged,relres,wall_ms";

pub fn emit_csv(reports: &[SolveReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.dim,
            r.n,
            r.lambda,
            r.mu,
            r.epsilon,
            r.c0,
            r.dt,
            r.kappa,
            r.precond.as_str(),
            r.iterations,
            r.converged,
            r.true_relres,
            r.wall_ms,
        ));
    }
    out
}

/// Parsed CSV row (everything the emitter writes).
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub dim: usize,
    pub n: usize,
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
    pub c0: f64,
    pub dt: f64,
    pub kappa: f64,
    pub precond: String,
    pub iters: usize,
    pub converged: bool,
    pub relres: f64,
    pub wall_ms: f64,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("bad CSV header: {other:?}"))),
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::Parse(format!("bad CSV row: {line}")));
        }
        let p = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(s.into())) };
        rows.push(CsvRow {
            dim: f[0].parse().map_err(|_| Error::Parse(line.into()))?,
            n: f[1].parse().map_err(|_| Error::Parse(line.into()))?,
            lambda: p(f[2])?,
            mu: p(f[3])?,
            eps: p(f[4])?,
            c0: p(f[5])?,
            dt: p(f[6])?,
            kappa: p(f[7])?,
            precond: f[8].to_string(),
            iters: f[9].parse().map_err(|_| Error::Parse(line.into()))?,
            converged: f[10].parse().map_err(|_| Error::Parse(line.into()))?,
            relres: p(f[11])?,
            wall_ms: p(f[12])?,
        });
    }
    Ok(rows)
}

/// Markdown in the benchmark-table layout: one block per mesh size,
/// lambda rows, and one column per `(c0, preconditioner, dt)` combination.
pub fn emit_markdown(reports: &[SolveReport]) -> String {
    let mut ns: Vec<usize> = reports.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut lambdas: Vec<f64> = Vec::new();
    let mut cols: Vec<(f64, PrecondTag, f64)> = Vec::new();
    for r in reports {
        if !lambdas.iter().any(|&l| l == r.lambda) {
            lambdas.push(r.lambda);
        }
        if !cols
            .iter()
            .any(|&(c0, t, dt)| c0 == r.c0 && t == r.precond && dt == r.dt)
        {
            cols.push((r.c0, r.precond, r.dt));
        }
    }
    let mut out = String::new();
    for &n in &ns {
        out.push_str(&format!("### 1/h = {n}\n\n"));
        out.push_str("| lambda |");
        for (c0, tag, dt) in &cols {
            out.push_str(&format!(" c0={c0} {} dt={dt:.0e} |", tag.as_str()));
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &cols {
            out.push_str("---|");
        }
        out.push('\n');
        for &lambda in &lambdas {
            out.push_str(&format!("| {lambda:.4e} |"));
            for &(c0, tag, dt) in &cols {
                let cell = reports.iter().find(|r| {
                    r.n == n && r.lambda == lambda && r.c0 == c0 && r.precond == tag && r.dt == dt
                });
                match cell {
                    Some(r) if r.converged => out.push_str(&format!(" {} |", r.iterations)),
                    Some(r) => out.push_str(&format!(" {}* |", r.iterations)),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Write reports per the configured format; returns the rendered text.
pub fn emit_table(reports: &[SolveReport], config: &ExperimentConfig) -> Result<String> {
    let text = match config.format {
        OutputFormat::Csv => emit_csv(reports),
        OutputFormat::Markdown => emit_markdown(reports),
    };
    if let Some(path) = &config.out {
        std::fs::write(path, &text)?;
    }
    Ok(text)
}

// ---------------------------------------------------------------------------
// Matrix export
// ---------------------------------------------------------------------------

/// Assembled block selector for MatrixMarket export.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockTag {
    A1,
    A0,
    B,
    Bcirc,
    Mp,
    Ap,
    D,
    Dtt,
}

impl BlockTag {
    pub fn parse(s: &str) -> Result<BlockTag> {
        match s {
            "a1" => Ok(BlockTag::A1),
            "a0" => Ok(BlockTag::A0),
            "b" => Ok(BlockTag::B),
            "bcirc" => Ok(BlockTag::Bcirc),
            "mp" => Ok(BlockTag::Mp),
            "ap" => Ok(BlockTag::Ap),
            "d" => Ok(BlockTag::D),
            "dtt" => Ok(BlockTag::Dtt),
            other => Err(Error::InvalidArgument(format!(
                "unknown block tag '{other}'"
            ))),
        }
    }

    pub fn symmetric(&self) -> bool {
        !matches!(self, BlockTag::B | BlockTag::Bcirc)
    }
}

/// Materialize the requested block (parameter-dependent ones use
/// `params`).
pub fn select_block(blocks: &AssembledBlocks, params: &ProblemParams, tag: BlockTag) -> CsrMatrix {
    match tag {
        BlockTag::A1 => blocks.a1.clone(),
        BlockTag::A0 => blocks.a0_direct.clone(),
        BlockTag::B => blocks.b_full(),
        BlockTag::Bcirc => blocks.bcirc.clone(),
        BlockTag::Mp => CsrMatrix::from_diag(&blocks.mp_diag),
        BlockTag::Ap => blocks.ap.clone(),
        BlockTag::D => blocks.d_matrix(params),
        BlockTag::Dtt => blocks.d_tilde_tilde(params),
    }
}

/// Export one assembled block as MatrixMarket (symmetric storage for the
/// symmetric blocks).
pub fn export_matrix_market(
    blocks: &AssembledBlocks,
    params: &ProblemParams,
    tag: BlockTag,
    path: &std::path::Path,
) -> Result<()> {
    let m = select_block(blocks, params, tag);
    crate::mm::write_matrix_market_file(path, &m, tag.symmetric())
}

/// Interior (element-wise) L2 error of the displacement against the exact
/// solution, integrated with the element quadrature rule.
pub fn interior_l2_error_u(
    setup: &MeshSetup,
    problem: &ProblemInstance,
    u_free: &[f64],
    t: f64,
) -> f64 {
    let d = setup.mesh.dim;
    let quad = crate::wg::element_quadrature(setup.mesh.h, d);
    let mut err2 = 0.0;
    for elem in &setup.mesh.elements {
        let e = elem.index;
        for &(off, w) in &quad {
            let mut x = elem.centroid;
            for c in 0..d {
                x[c] += off[c];
            }
            let ue = problem
                .exact_u(x, t)
                .expect("problem must have an exact solution");
            for c in 0..d {
                let diff = u_free[d * e + c] - ue[c];
                err2 += w * diff * diff;
            }
        }
    }
    err2.sqrt()
}

/// Convenience wrapper for boundary values at a given time (used by
/// multi-step drivers).
pub fn boundary_at(setup: &MeshSetup, problem: &ProblemInstance, t: f64) -> BoundaryValues {
    boundary_values(&setup.mesh, &setup.dm, problem, t)
}
