//! Exit criteria. Each test writes one `criterion N: PASS|FAIL` line with the
//! measured quantities to stderr before asserting.

mod common;

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;

use common::{mat_vec, matching_case, oracle_instances, random_dvec, random_vec, rel_err, rng, single_body_patch_error};
use tlamg::bench::{constraint_violation, run_benchmark, run_benchmark_with_solution, Method, RunConfig};
use tlamg::coarse_amg::AmgConfig;
use tlamg::meshgen::{ContactModelSpec, ModelId};
use tlamg::oracle::{extract_operator, max_abs, rel_diff, CoarseModel, DenseSnapshot};
use tlamg::system::SaddleSystem;
use tlamg::twolevel::{CoarseSolve, Interpolation, Restriction, Smoother, TwoLevelConfig, TwoLevelPreconditioner};

const ALL_MODELS: [ModelId; 3] = [ModelId::Model1, ModelId::Model2, ModelId::Model3];

/// Written straight to stderr so the line shows without `--nocapture`.
fn report(id: u32, pass: bool, detail: &str) {
    let line = format!("criterion {id}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn snapshots() -> Vec<(String, SaddleSystem, DenseSnapshot)> {
    oracle_instances()
        .into_iter()
        .map(|(name, sys)| {
            assert!(sys.dim() <= 400, "{name}");
            let snap = DenseSnapshot::new(&sys).unwrap();
            (name, sys, snap)
        })
        .collect()
}

fn exact_config(interpolation: Interpolation) -> TwoLevelConfig {
    TwoLevelConfig {
        interpolation,
        restriction: Restriction::Ideal,
        smoother: Smoother::ExactF,
        drop_tolerance: 0.0,
        coarse: CoarseSolve::Direct,
    }
}

/// Resolutions giving at least 100,000 DOFs per model.
fn large_resolution(m: ModelId) -> usize {
    match m {
        ModelId::Model1 | ModelId::Model2 => 96,
        ModelId::Model3 => 90,
    }
}

#[test]
fn criterion_01_direct_method() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (name, sys) in oracle_instances() {
        assert!(sys.dim() <= 400, "{name}");
        let pc = TwoLevelPreconditioner::new(&sys, exact_config(Interpolation::Ideal)).unwrap();
        let x = pc.apply_vec(&sys.rhs);
        worst = worst.max(rel_err(&sys.a.spmv(&x).unwrap(), &sys.rhs));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && secs < 5.0;
    report(1, pass, &format!("max r_rel after one cycle {worst:.2e} (≤ 1e-10), {secs:.2} s (< 5 s)"));
    assert!(pass);
}

#[test]
fn criterion_02_spectrum() {
    let start = Instant::now();
    let (name, sys, snap) = snapshots().swap_remove(1);
    let pc = TwoLevelPreconditioner::new(
        &sys,
        TwoLevelConfig {
            drop_tolerance: 0.0,
            ..TwoLevelConfig::default()
        },
    )
    .unwrap();
    let amg = extract_operator(sys.split.n_coarse(), |x| pc.coarse_apply(x));
    let mut exact_worst = 0.0f64;
    for model in [CoarseModel::Exact, CoarseModel::Diagonal] {
        let (ideal, simplified) = snap.check_spectrum_theorems(&model).unwrap();
        exact_worst = exact_worst.max(ideal).max(simplified);
    }
    let (ai, asimp) = snap.check_spectrum_theorems(&CoarseModel::Inverse(amg)).unwrap();
    let amg_worst = ai.max(asimp);
    let secs = start.elapsed().as_secs_f64();
    let pass = exact_worst <= 1e-8 && amg_worst <= 1e-6 && secs < 30.0;
    report(
        2,
        pass,
        &format!(
            "{name} ({} DOFs): exact/diagonal {exact_worst:.2e} (≤ 1e-8), AMG {amg_worst:.2e} (≤ 1e-6), {secs:.1} s (< 30 s)",
            sys.dim()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_identities() {
    let mut worst = 0.0f64;
    for (name, _, snap) in snapshots() {
        let scale = |l: &nalgebra::DMatrix<f64>, r: &nalgebra::DMatrix<f64>| max_abs(l) * max_abs(&snap.a) * max_abs(r);
        let raq = &snap.r_hat * &snap.a * &snap.q;
        let qap = snap.q.transpose() * &snap.a * &snap.p_hat;
        let checks = [
            ("R̂𝒜Q", max_abs(&raq) / scale(&snap.r_hat, &snap.q)),
            ("Qᵀ𝒜P̂", max_abs(&qap) / scale(&snap.q, &snap.p_hat)),
            ("R̂𝒜P̂ − S", rel_diff(&(&snap.r_hat * &snap.a * &snap.p_hat), &snap.s, 0.0)),
            ("R̂𝒜P̃ − S", rel_diff(&(&snap.r_hat * &snap.a * &snap.p_tilde), &snap.s, 0.0)),
            ("A_FF⁻¹", rel_diff(&snap.aff_inv_closed_form().unwrap(), &snap.aff_inv, 0.0)),
        ];
        for (what, v) in checks {
            if v > 1e-12 {
                println!("  {name} {what}: {v:e}");
            }
            worst = worst.max(v);
        }
        for model in [CoarseModel::Exact, CoarseModel::Diagonal] {
            let [(hp, hq), (tp, _)] = snap.check_additive_multiplicative(&model).unwrap();
            worst = worst.max(hp).max(hq).max(tp);
        }
        let (n, nc) = (snap.dim(), snap.n_coarse());
        let nf = n - nc;
        let p_fc = snap.p_tilde.view((nc, 0), (nf, nc)).into_owned();
        let r_cf = snap.r_hat.view((0, nc), (nc, nf)).into_owned();
        let e_cf = &snap.acf + &r_cf * &snap.aff;
        worst = worst.max(max_abs(&e_cf) / max_abs(&snap.a));
        let a_h = &snap.r_hat * &snap.a * &snap.p_tilde;
        let e_fc = &snap.afc + &snap.aff * &p_fc;
        let mut upper = nalgebra::DMatrix::<f64>::identity(n, n);
        upper.view_mut((0, nc), (nc, nf)).copy_from(&(-&r_cf));
        let mut lower = nalgebra::DMatrix::<f64>::identity(n, n);
        lower.view_mut((nc, 0), (nf, nc)).copy_from(&(-&p_fc));
        let mut mid = nalgebra::DMatrix::zeros(n, n);
        mid.view_mut((0, 0), (nc, nc)).copy_from(&a_h);
        mid.view_mut((0, nc), (nc, nf)).copy_from(&e_cf);
        mid.view_mut((nc, 0), (nf, nc)).copy_from(&e_fc);
        mid.view_mut((nc, nc), (nf, nf)).copy_from(&snap.aff);
        worst = worst.max(rel_diff(&(upper * mid * lower), &snap.a, 0.0));
    }
    let pass = worst <= 1e-12;
    report(3, pass, &format!("largest identity deviation {worst:.2e} (≤ 1e-12)"));
    assert!(pass);
}

#[test]
fn criterion_04_matrix_free() {
    let mut r = rng(40);
    let mut worst = 0.0f64;
    for (_, sys, snap) in snapshots() {
        for (interpolation, p) in [(Interpolation::Ideal, &snap.p_hat), (Interpolation::Simplified, &snap.p_tilde)] {
            let pc = TwoLevelPreconditioner::new(&sys, exact_config(interpolation)).unwrap();
            for _ in 0..20 {
                let f = random_vec(&mut r, sys.dim());
                let e_h = random_vec(&mut r, sys.split.n_coarse());
                worst = worst
                    .max(rel_err(&pc.restrict(&f), &mat_vec(&snap.r_hat, &f)))
                    .max(rel_err(&pc.interpolate(&e_h), &mat_vec(p, &e_h)))
                    .max(rel_err(&pc.exact_f_apply(&f), &mat_vec(&snap.bf_inv, &f)));
            }
        }
    }
    let pass = worst <= 1e-12;
    report(4, pass, &format!("restriction/interpolation/B_F max relative error {worst:.2e} (≤ 1e-12)"));
    assert!(pass);
}

#[test]
fn criterion_05_convergence() {
    let smoothers = [("B_F", Smoother::ExactF), ("sSIMPLE", Smoother::SSimple { inner_sweeps: 1 })];
    let mut pass = true;
    let mut lines = Vec::new();
    for m in ALL_MODELS {
        for (label, smoother) in smoothers {
            let method = Method::TwoLevel(TwoLevelConfig {
                smoother,
                ..TwoLevelConfig::default()
            });
            let row = run_benchmark(&RunConfig::model(m, large_resolution(m), method)).unwrap();
            let ok = row.dofs >= 100_000
                && row.converged
                && row.final_residual <= 1e-8
                && row.iterations <= 40
                && row.total_seconds < 120.0;
            pass &= ok;
            lines.push(format!(
                "{m}/{label}: {} DOFs, {} its, r_rel {:.1e}, {:.1} s",
                row.dofs, row.iterations, row.final_residual, row.total_seconds
            ));
        }
    }
    report(5, pass, &format!("(≥ 100k DOFs, ≤ 40 its, < 120 s) {}", lines.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_06_negative_controls() {
    let mut pass = true;
    let mut lines = Vec::new();
    for m in [ModelId::Model1, ModelId::Model3] {
        let r = large_resolution(m);
        let jacobi = Method::TwoLevel(TwoLevelConfig {
            smoother: Smoother::Jacobi { sweeps: 1 },
            ..TwoLevelConfig::default()
        });
        let mut cfg = RunConfig::model(m, r, jacobi);
        cfg.solver.max_iterations = 100;
        let row = run_benchmark(&cfg).unwrap();
        pass &= !row.converged && row.final_residual > 1e-8;
        lines.push(format!("{m}/JAC: r_rel {:.1e} after {} its", row.final_residual, row.iterations));

        // Restarted GCR(30) keeps 2000 iterations within memory at this size.
        let mut cfg = RunConfig::model(m, r, Method::PlainAmg(AmgConfig::default()));
        cfg.solver.max_iterations = 2000;
        cfg.solver.restart = Some(30);
        let row = run_benchmark(&cfg).unwrap();
        pass &= !row.converged && row.final_residual > 1e-8;
        lines.push(format!("{m}/AMG: r_rel {:.1e} after {} its", row.final_residual, row.iterations));
    }
    report(6, pass, &format!("(no convergence within 100 / 2000) {}", lines.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_07_dropping() {
    let m = ModelId::Model2;
    // About 640k DOFs. Dropped rows of P keep ~21 entries at any size.
    let r = 240;
    let run = |eps: f64| {
        let method = Method::TwoLevel(TwoLevelConfig {
            drop_tolerance: eps,
            ..TwoLevelConfig::default()
        });
        run_benchmark(&RunConfig::model(m, r, method)).unwrap()
    };
    let dense = run(0.0);
    let dropped = run(1e-10);
    let p_ratio = dense.p_nnz.unwrap() as f64 / dropped.p_nnz.unwrap() as f64;
    let (i0, i1) = (dense.interp_nnz_per_row.unwrap(), dropped.interp_nnz_per_row.unwrap());
    let (c0, c1) = (dense.coarse_nnz_per_row.unwrap(), dropped.coarse_nnz_per_row.unwrap());
    let dnit = dense.iterations.abs_diff(dropped.iterations);
    let pass = dense.converged && dropped.converged && dnit <= 2 && p_ratio >= 10.0 && i1 < i0 && c1 < c0;
    report(
        7,
        pass,
        &format!(
            "{m} {} DOFs: P nnz/row {:.1} -> {:.1}, NIT {} -> {} (±2), nnz(P) ratio {p_ratio:.1} (≥ 10), interp nnz/row {i0:.1} -> {i1:.1}, coarse nnz/row {c0:.1} -> {c1:.1}",
            dense.dofs, dense.p_nnz_per_row.unwrap(), dropped.p_nnz_per_row.unwrap(), dense.iterations, dropped.iterations
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_matching_meshes() {
    let mut p_worst = 0.0f64;
    let mut a_worst = 0.0f64;
    for m in [ModelId::Model1, ModelId::Model3] {
        let (p_err, a_err) = matching_case(m, 4);
        p_worst = p_worst.max(p_err);
        a_worst = a_worst.max(a_err);
    }
    let pass = p_worst <= 1e-10 && a_worst <= 1e-10;
    report(8, pass, &format!("‖P − I‖_F {p_worst:.2e} (≤ 1e-10), A_H vs conforming {a_worst:.2e} (≤ 1e-10)"));
    assert!(pass);
}

#[test]
fn criterion_09_constraints() {
    let mut violation = 0.0f64;
    let mut all_converged = true;
    for m in ALL_MODELS {
        for smoother in [Smoother::ExactF, Smoother::SSimple { inner_sweeps: 1 }] {
            let method = Method::TwoLevel(TwoLevelConfig {
                smoother,
                ..TwoLevelConfig::default()
            });
            let (row, x) = run_benchmark_with_solution(&RunConfig::model(m, 24, method)).unwrap();
            all_converged &= row.converged;
            let sys = SaddleSystem::from_model(&ContactModelSpec::new(m, 24)).unwrap();
            violation = violation.max(constraint_violation(&sys, &x));
        }
    }
    let patch = [(2, 1), (4, 3), (7, 5)]
        .into_iter()
        .map(|(nx, ny)| single_body_patch_error(nx, ny, 10.0))
        .fold(0.0f64, f64::max);
    let pass = all_converged && violation <= 1e-6 && patch <= 1e-8;
    report(9, pass, &format!("‖Gd‖/‖d‖ {violation:.2e} (≤ 1e-6), patch test error {patch:.2e} (≤ 1e-8)"));
    assert!(pass);
}

#[test]
fn criterion_10_residual_bounds() {
    let mut r = rng(100);
    let mut pass = true;
    let mut tightest = 0.0f64;
    for (_, sys, snap) in snapshots() {
        let b = DVector::from_column_slice(&sys.rhs);
        let nf = sys.split.n_fine();
        for delta in [1e-2, 1e-6] {
            let v = random_dvec(&mut r, nf);
            let inner = &v * (delta / v.iter().map(|x| x.abs()).sum::<f64>());
            for xs in [
                snap.f_relaxation_with_inner_residual(&b, &inner),
                snap.ssimple_with_inner_residual(&b, &inner).unwrap(),
            ] {
                let (norm, bound) = snap.residual_bound(&b, &xs, delta).unwrap();
                pass &= norm <= bound * (1.0 + 1e-9);
                tightest = tightest.max(norm / bound);
            }
        }
    }
    report(10, pass, &format!("max ‖r‖₁ / bound {tightest:.3} (≤ 1)"));
    assert!(pass);
}
