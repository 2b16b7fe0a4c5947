use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tlamg::bench::{solve_system, Method};
use tlamg::krylov::SolverConfig;
use tlamg::sparsela::CsrMatrix;
use tlamg::system::{export_system, import_system, CfSplit, SaddleSystem};
use tlamg::twolevel::TwoLevelConfig;

fn tlamg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlamg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tlamg-cli-{name}-{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    dir
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON report")
}

#[test]
fn export_then_import_reproduces_iterations() {
    let dir = scratch("roundtrip");
    let d = dir.to_str().unwrap();
    let direct = json(&tlamg(&["--model", "3", "--resolution", "6", "--export", d, "--report", "json"]));
    let imported = json(&tlamg(&["--import", d, "--report", "json"]));
    fs::remove_dir_all(&dir).ok();
    assert_eq!(direct["iterations"], imported["iterations"]);
    assert_eq!(direct["residual_history"], imported["residual_history"]);
    assert_eq!(direct["converged"], true);
}

#[test]
fn overlapping_manifest_is_rejected() {
    let dir = scratch("overlap");
    let d = dir.to_str().unwrap();
    assert!(tlamg(&["--model", "1", "--resolution", "3", "--export", d, "--precond", "none", "--max-it", "1"])
        .status
        .success());
    let manifest = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest).unwrap();
    let broken: String = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.first() == Some(&"master") {
                let start: usize = f[1].parse().unwrap();
                format!("master {} {}", start - 1, f[2])
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&manifest, broken).unwrap();
    let out = tlamg(&["--import", d]);
    fs::remove_dir_all(&dir).ok();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.txt"));
}

#[test]
fn csv_report_has_header_and_one_row() {
    let out = tlamg(&["--model", "2", "--resolution", "4", "--smoother", "ssimple"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("problem,method,dofs,nit,converged,r_rel"));
    assert!(lines[1].contains("tlamg-simplified-ssimple-amg"));
}

#[test]
fn model_and_import_are_exclusive() {
    assert!(!tlamg(&["--model", "1", "--import", "/nonexistent"]).status.success());
    assert!(!tlamg(&[]).status.success());
    assert!(!tlamg(&["--model", "4"]).status.success());
    assert!(!tlamg(&["--model", "1", "--resolution", "1"]).status.success());
}

#[test]
fn coarse_operator_export_is_symmetric_matrix_market() {
    let dir = scratch("coarse");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ah.mtx");
    let out = tlamg(&["--model", "1", "--resolution", "3", "--export-coarse", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    fs::remove_dir_all(&dir).ok();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
}

/// 20 unknowns: 4 interior, 4 master, 6 slave, 6 multipliers.
fn hand_built() -> SaddleSystem {
    let split = CfSplit {
        n_interior: 4,
        n_master: 4,
        n_slave: 6,
        n_lambda: 6,
    };
    let nd = split.n_disp();
    let mut trip = Vec::new();
    for i in 0..nd {
        trip.push((i, i, 4.0 + 0.1 * i as f64));
        if i + 2 < nd {
            trip.push((i, i + 2, -1.0));
            trip.push((i + 2, i, -1.0));
        }
    }
    let node_d = [[2.0 / 3.0, 1.0 / 6.0, 0.0], [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], [0.0, 1.0 / 6.0, 2.0 / 3.0]];
    let mut d = Vec::new();
    for (a, row) in node_d.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            if v != 0.0 {
                d.push((2 * a, 2 * b, v));
                d.push((2 * a + 1, 2 * b + 1, v));
            }
        }
    }
    let m: Vec<(usize, usize, f64)> = vec![(0, 0, 0.5), (1, 1, 0.5), (2, 0, 0.25), (2, 2, 0.5), (3, 1, 0.25), (3, 3, 0.5), (4, 2, 0.75), (5, 3, 0.75)];
    let lam0 = split.lambda().start;
    for &(i, j, v) in &d {
        trip.push((lam0 + i, split.slave().start + j, v));
        trip.push((split.slave().start + j, lam0 + i, v));
    }
    for &(i, j, v) in &m {
        trip.push((lam0 + i, split.master().start + j, -v));
        trip.push((split.master().start + j, lam0 + i, -v));
    }
    let n = split.dim();
    let a = CsrMatrix::from_triplets(n, n, &trip).unwrap();
    let rhs: Vec<f64> = (0..n).map(|i| if i < nd { (i as f64 * 0.7).sin() } else { 0.0 }).collect();
    SaddleSystem::from_parts(
        a,
        rhs,
        split,
        CsrMatrix::from_triplets(6, 6, &d).unwrap(),
        CsrMatrix::from_triplets(6, 4, &m).unwrap(),
    )
    .unwrap()
}

fn history(sys: &SaddleSystem) -> Vec<f64> {
    let (row, _) = solve_system(sys, "hand", &Method::TwoLevel(TwoLevelConfig::default()), &SolverConfig::default()).unwrap();
    assert!(row.converged);
    row.residual_history
}

#[test]
fn hand_built_system_roundtrip_keeps_history() {
    let sys = hand_built();
    assert_eq!(sys.dim(), 20);
    let dir = scratch("hand");
    export_system(&sys, Path::new(&dir)).unwrap();
    let back = import_system(&dir).unwrap();
    fs::remove_dir_all(&dir).ok();
    assert_eq!(back.a, sys.a);
    assert_eq!(history(&sys), history(&back));
}
