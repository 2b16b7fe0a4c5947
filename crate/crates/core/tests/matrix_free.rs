mod common;

use nalgebra::{DMatrix, DVector};

use common::{mat_vec, oracle_instances, random_vec, rel_err, rng};
use tlamg::oracle::{extract_operator, rel_diff, DenseSnapshot};
use tlamg::system::SaddleSystem;
use tlamg::twolevel::{
    CoarseSolve, Interpolation, Restriction, Smoother, TwoLevelConfig, TwoLevelPreconditioner,
};

fn exact_config(interpolation: Interpolation, smoother: Smoother) -> TwoLevelConfig {
    TwoLevelConfig {
        interpolation,
        restriction: Restriction::Ideal,
        smoother,
        drop_tolerance: 0.0,
        coarse: CoarseSolve::Direct,
    }
}

fn cases() -> Vec<(String, SaddleSystem, DenseSnapshot)> {
    oracle_instances()
        .into_iter()
        .map(|(name, sys)| {
            let snap = DenseSnapshot::new(&sys).unwrap();
            (name, sys, snap)
        })
        .collect()
}

#[test]
fn restriction_matches_dense_ideal_restriction() {
    let mut r = rng(1);
    for (name, sys, snap) in cases() {
        for interpolation in [Interpolation::Ideal, Interpolation::Simplified] {
            let pc = TwoLevelPreconditioner::new(&sys, exact_config(interpolation, Smoother::ExactF)).unwrap();
            for _ in 0..20 {
                let f = random_vec(&mut r, sys.dim());
                let e = rel_err(&pc.restrict(&f), &mat_vec(&snap.r_hat, &f));
                assert!(e <= 1e-12, "{name}: {e:e}");
            }
        }
    }
}

#[test]
fn transpose_restriction_matches_dense_transpose() {
    let mut r = rng(2);
    for (name, sys, snap) in cases() {
        let cfg = TwoLevelConfig {
            restriction: Restriction::InterpolationTranspose,
            ..exact_config(Interpolation::Simplified, Smoother::ExactF)
        };
        let pc = TwoLevelPreconditioner::new(&sys, cfg).unwrap();
        let pt = snap.p_tilde.transpose();
        for _ in 0..20 {
            let f = random_vec(&mut r, sys.dim());
            assert!(rel_err(&pc.restrict(&f), &mat_vec(&pt, &f)) <= 1e-12, "{name}");
        }
    }
}

#[test]
fn interpolation_matches_dense_operators() {
    let mut r = rng(3);
    for (name, sys, snap) in cases() {
        for (interpolation, dense) in [(Interpolation::Ideal, &snap.p_hat), (Interpolation::Simplified, &snap.p_tilde)] {
            let pc = TwoLevelPreconditioner::new(&sys, exact_config(interpolation, Smoother::ExactF)).unwrap();
            for _ in 0..20 {
                let e_h = random_vec(&mut r, sys.split.n_coarse());
                let e = rel_err(&pc.interpolate(&e_h), &mat_vec(dense, &e_h));
                assert!(e <= 1e-12, "{name} {interpolation:?}: {e:e}");
            }
        }
    }
}

#[test]
fn exact_fine_smoother_matches_dense_block_inverse() {
    let mut r = rng(4);
    for (name, sys, snap) in cases() {
        let pc = TwoLevelPreconditioner::new(&sys, exact_config(Interpolation::Simplified, Smoother::ExactF)).unwrap();
        for _ in 0..20 {
            let b = random_vec(&mut r, sys.dim());
            let e = rel_err(&pc.exact_f_apply(&b), &mat_vec(&snap.bf_inv, &b));
            assert!(e <= 1e-12, "{name}: {e:e}");
            // Same vector as Q (QᵀAQ)⁻¹ Qᵀ b with the dense LU of A_FF.
            let nc = sys.split.n_coarse();
            let bf = DVector::from_column_slice(&b[nc..]);
            let xf = snap.aff.clone().lu().solve(&bf).unwrap();
            assert!(rel_err(&pc.exact_f_apply(&b)[nc..], xf.as_slice()) <= 1e-12, "{name}");
        }
    }
}

#[test]
fn coarse_operator_matches_dense_schur_complement() {
    for (name, sys, snap) in cases() {
        let pc = TwoLevelPreconditioner::new(&sys, exact_config(Interpolation::Simplified, Smoother::ExactF)).unwrap();
        let a_h = tlamg::oracle::to_dense(pc.coarse_operator());
        assert!(rel_diff(&a_h, &snap.s, 0.0) <= 1e-12, "{name}");
    }
}

#[test]
fn ssimple_with_converged_inner_solve_matches_dense_operator() {
    let mut r = rng(6);
    for (name, sys, snap) in cases() {
        let pc = TwoLevelPreconditioner::new(
            &sys,
            exact_config(Interpolation::Simplified, Smoother::SSimple { inner_sweeps: 400 }),
        )
        .unwrap();
        for _ in 0..5 {
            let b = random_vec(&mut r, sys.dim());
            let e = rel_err(&pc.smooth(&b), &mat_vec(&snap.bs_inv, &b));
            assert!(e <= 1e-8, "{name}: {e:e}");
        }
    }
}

/// With ideal transfers, exact fine smoothing and an exact coarse solve, one
/// production cycle solves the system.
#[test]
fn production_cycle_is_direct() {
    for (name, sys, _) in cases() {
        let pc = TwoLevelPreconditioner::new(&sys, exact_config(Interpolation::Ideal, Smoother::ExactF)).unwrap();
        let x = pc.apply_vec(&sys.rhs);
        let ax = sys.a.spmv(&x).unwrap();
        let res = rel_err(&ax, &sys.rhs);
        assert!(res <= 1e-10, "{name}: {res:e}");
    }
}

/// The whole production preconditioner equals the dense multiplicative
/// two-level operator `(I − (I − P S⁻¹ R̂ 𝒜)(I − B_F⁻¹ 𝒜)) 𝒜⁻¹`.
#[test]
fn production_preconditioner_matches_dense_two_level_operator() {
    for (name, sys, snap) in cases().into_iter().take(3) {
        let s_inv = snap.s.clone().try_inverse().unwrap();
        for (interpolation, p) in [(Interpolation::Ideal, &snap.p_hat), (Interpolation::Simplified, &snap.p_tilde)] {
            let pc = TwoLevelPreconditioner::new(&sys, exact_config(interpolation, Smoother::ExactF)).unwrap();
            let prod = extract_operator(sys.dim(), |x| pc.apply_vec(x));
            let dense: DMatrix<f64> = snap.two_level_inverse(p, &snap.r_hat, &s_inv);
            let e = rel_diff(&prod, &dense, 0.0);
            assert!(e <= 1e-10, "{name} {interpolation:?}: {e:e}");
        }
    }
}
