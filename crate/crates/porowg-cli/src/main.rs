//! Command-line driver: parameter sweeps for the elasticity and
//! poroelasticity benchmarks, the dense spectral oracle, and MatrixMarket
//! export of assembled blocks.
//!
//! Exit code 0 means every grid point converged.

use clap::{Args, Parser, Subcommand};
use porowg::bench::{
    build_setup, emit_table, export_matrix_market, run_experiment, BlockTag, ExperimentConfig,
    OutputFormat,
};
use porowg::precond::PrecondTag;
use porowg::problems::{lame_params, ProblemKind};
use porowg::sparse::ResidualMeasure;
use porowg::spectrum::{
    compute_infsup_beta, dense_schur_elasticity, dense_schur_three_field, dense_schur_two_field,
    lemma_a1_suite, SPECTRAL_CSV_HEADER,
};
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "porowg",
    version,
    about = "Weak Galerkin poroelasticity solver benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// 2D linear elasticity sweep (P2,e-preconditioned saddle solves).
    Elasticity(SweepArgs),
    /// 2D poroelasticity sweep (two- and three-field preconditioners).
    Poro2(SweepArgs),
    /// 3D poroelasticity sweep.
    Poro3(SweepArgs),
    /// Dense spectral oracle checks (small meshes).
    Spectrum(SpectrumArgs),
    /// Export an assembled block as MatrixMarket.
    Export(ExportArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Mesh subdivisions, comma separated.
    #[arg(long)]
    n: Option<String>,
    /// Lame lambda values, comma separated.
    #[arg(long)]
    lambda: Option<String>,
    /// Storage capacities c0, comma separated.
    #[arg(long)]
    c0: Option<String>,
    /// Time steps, comma separated.
    #[arg(long)]
    dt: Option<String>,
    /// Permeabilities, comma separated.
    #[arg(long)]
    kappa: Option<String>,
    /// Preconditioner tags (p2, p2dlu, p2e, p3, p3dlu), comma separated.
    #[arg(long)]
    precond: Option<String>,
    /// Relative solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// GMRES restart length.
    #[arg(long)]
    restart: Option<usize>,
    /// Parallel jobs over grid points.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output format: csv or markdown.
    #[arg(long)]
    format: Option<String>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed for reproducibility metadata.
    #[arg(long)]
    seed: Option<u64>,
    /// key=value config file; explicit flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    c0: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    /// Seed of the randomized lemma suite.
    #[arg(long, default_value_t = 1234)]
    seed: u64,
    /// Number of random saddle systems in the lemma suite.
    #[arg(long, default_value_t = 50)]
    systems: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Block tag: a1, a0, b, bcirc, mp, ap, d, dtt.
    #[arg(long)]
    block: String,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.4286)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| format!("bad {what} entry '{t}'"))
        })
        .collect()
}

fn load_config_file(path: &PathBuf) -> Result<HashMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut map = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((k, v)) = t.split_once('=') else {
            return Err(format!("{}:{}: expected key=value", path.display(), ln + 1));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn build_experiment(kind: ProblemKind, args: &SweepArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::preset(kind);
    let file = match &args.config {
        Some(p) => load_config_file(p)?,
        None => HashMap::new(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| file.get(key).cloned())
    };
    if let Some(s) = pick(&args.n, "n") {
        cfg.ns = parse_list(&s, "n")?;
    }
    if let Some(s) = pick(&args.lambda, "lambda") {
        cfg.lambdas = parse_list(&s, "lambda")?;
    }
    if let Some(s) = pick(&args.c0, "c0") {
        cfg.c0s = parse_list(&s, "c0")?;
    }
    if let Some(s) = pick(&args.dt, "dt") {
        cfg.dts = parse_list(&s, "dt")?;
    }
    if let Some(s) = pick(&args.kappa, "kappa") {
        cfg.kappas = parse_list(&s, "kappa")?;
    }
    if let Some(s) = pick(&args.precond, "precond") {
        cfg.preconds = s
            .split(',')
            .map(|t| PrecondTag::parse(t.trim()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
    }
    if let Some(t) = args
        .tol
        .or_else(|| file.get("tol").and_then(|v| v.parse().ok()))
    {
        cfg.tol = t;
    }
    if let Some(r) = args
        .restart
        .or_else(|| file.get("restart").and_then(|v| v.parse().ok()))
    {
        cfg.restart = r;
    }
    if let Some(j) = args
        .jobs
        .or_else(|| file.get("jobs").and_then(|v| v.parse().ok()))
    {
        cfg.jobs = j;
    }
    if let Some(f) = pick(&args.format, "format") {
        cfg.format = OutputFormat::parse(&f).map_err(|e| e.to_string())?;
    }
    if let Some(o) = args
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from))
    {
        cfg.out = Some(o);
    }
    if let Some(s) = args
        .seed
        .or_else(|| file.get("seed").and_then(|v| v.parse().ok()))
    {
        cfg.seed = s;
    }
    if let Some(m) = file.get("measure") {
        cfg.measure = match m.as_str() {
            "preconditioned" => ResidualMeasure::Preconditioned,
            "true" => ResidualMeasure::True,
            "preconditioned-vs-rhs" => ResidualMeasure::PreconditionedVsRhs,
            other => return Err(format!("unknown measure '{other}'")),
        };
    }
    Ok(cfg)
}

fn run_sweep(kind: ProblemKind, args: &SweepArgs) -> Result<bool, String> {
    let cfg = build_experiment(kind, args)?;
    let reports = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let text = emit_table(&reports, &cfg).map_err(|e| e.to_string())?;
    if cfg.out.is_none() {
        print!("{text}");
    }
    Ok(reports.iter().all(|r| r.converged))
}

fn run_spectrum(args: &SpectrumArgs) -> Result<bool, String> {
    let ns: Vec<usize> = match &args.n {
        Some(s) => parse_list(s, "n")?,
        None => vec![4, 8],
    };
    let lambdas: Vec<f64> = match &args.lambda {
        Some(s) => parse_list(s, "lambda")?,
        None => vec![1.4286, 1.6667e3, 1.6667e6],
    };
    let c0s: Vec<f64> = match &args.c0 {
        Some(s) => parse_list(s, "c0")?,
        None => vec![1.0, 0.0],
    };
    let dts: Vec<f64> = match &args.dt {
        Some(s) => parse_list(s, "dt")?,
        None => vec![1e-3, 1e-6],
    };
    let mut lines = vec![SPECTRAL_CSV_HEADER.to_string()];
    let mut all_pass = true;
    for &n in &ns {
        let setup = build_setup(n, 2).map_err(|e| e.to_string())?;
        let beta = compute_infsup_beta(&setup.blocks).map_err(|e| e.to_string())?;
        for &lambda in &lambdas {
            for &c0 in &c0s {
                for &dt in &dts {
                    let params =
                        lame_params(1.0, lambda, 1.0, c0, 1.0, dt, 2).map_err(|e| e.to_string())?;
                    let r2 =
                        dense_schur_two_field(&setup.blocks, &params).map_err(|e| e.to_string())?;
                    all_pass &= r2.pass;
                    lines.push(r2.csv_row());
                    let re = dense_schur_elasticity(&setup.blocks, &params)
                        .map_err(|e| e.to_string())?;
                    all_pass &= re.pass;
                    lines.push(re.csv_row());
                    let r3 = dense_schur_three_field(&setup.blocks, &params)
                        .map_err(|e| e.to_string())?;
                    all_pass &= r3.pass;
                    lines.push(r3.csv_row());
                }
            }
        }
        eprintln!("n = {n}: beta = {:.6}", beta.beta);
    }
    let lemma = lemma_a1_suite(args.seed, args.systems).map_err(|e| e.to_string())?;
    all_pass &= lemma.pass;
    eprintln!(
        "lemma suite ({} systems): multiset {:.2e}, exact-Schur {:.2e}, C=0 {:.2e}, pseudo-inverse {:.2e} => {}",
        lemma.systems,
        lemma.worst_multiset_gap,
        lemma.worst_exact_schur,
        lemma.worst_c0_annihilation,
        lemma.worst_pseudo_inverse,
        if lemma.pass { "pass" } else { "FAIL" }
    );
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(p) => std::fs::write(p, text).map_err(|e| e.to_string())?,
        None => print!("{text}"),
    }
    Ok(all_pass)
}

fn run_export(args: &ExportArgs) -> Result<(), String> {
    let tag = BlockTag::parse(&args.block).map_err(|e| e.to_string())?;
    let setup = build_setup(args.n, args.dim).map_err(|e| e.to_string())?;
    let params = lame_params(
        1.0,
        args.lambda,
        1.0,
        args.c0,
        args.kappa,
        args.dt,
        args.dim,
    )
    .map_err(|e| e.to_string())?;
    export_matrix_market(&setup.blocks, &params, tag, &args.out).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Elasticity(a) => run_sweep(ProblemKind::Elasticity2d, a),
        Command::Poro2(a) => run_sweep(ProblemKind::Poro2d, a),
        Command::Poro3(a) => run_sweep(ProblemKind::Poro3d, a),
        Command::Spectrum(a) => run_spectrum(a),
        Command::Export(a) => match run_export(a) {
            Ok(()) => Ok(true),
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some grid points did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
