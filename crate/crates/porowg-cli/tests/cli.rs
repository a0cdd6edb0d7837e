//! End-to-end checks of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_porowg"))
}

#[test]
fn poro2_small_grid_exits_zero_and_emits_csv() {
    let out = bin()
        .args([
            "poro2",
            "--n",
            "4",
            "--lambda",
            "1.6667e3",
            "--c0",
            "1",
            "--dt",
            "1e-3",
            "--precond",
            "p2dlu",
            "--jobs",
            "1",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dim,n,lambda,mu,eps,c0,dt,kappa,precond,iters,converged,relres,wall_ms"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("2,4,1666.7,"));
    assert!(row.contains(",p2dlu,"));
    assert!(row.contains(",true,"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "n=4\nlambda=1.6667e6\nprecond=p3\ndt=1e-3\nc0=1\njobs=1\n",
    )
    .unwrap();
    let out_path = dir.path().join("table.csv");
    let out = bin()
        .args([
            "poro2",
            "--config",
            cfg.to_str().unwrap(),
            "--precond",
            "p3dlu", // flag overrides the config entry
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(
        text.contains(",p3dlu,"),
        "flag did not override config: {text}"
    );
    assert!(!text.contains(",p3,"));
}

#[test]
fn empty_precond_list_is_a_configuration_error() {
    let out = bin()
        .args(["poro2", "--n", "4", "--precond", ""])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_block_tag_rejected() {
    let out = bin()
        .args(["export", "--block", "nope", "--out", "/tmp/none.mtx"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown block tag"));
}

#[test]
fn export_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mp.mtx");
    let out = bin()
        .args([
            "export",
            "--block",
            "mp",
            "--n",
            "8",
            "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
    assert_eq!(text.lines().count(), 2 + 64);
    assert!(text.contains("0.015625"));
}

#[test]
fn markdown_format() {
    let out = bin()
        .args([
            "poro2",
            "--n",
            "4",
            "--lambda",
            "1.6667e6",
            "--c0",
            "1",
            "--dt",
            "1e-3",
            "--precond",
            "p2dlu",
            "--format",
            "markdown",
            "--jobs",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("### 1/h = 4"));
    assert!(text.contains("| lambda |"));
}
