//! Two-level preconditioner for the mortar saddle-point system.
//!
//! The coarse space is `C = 𝒩 ∪ ℳ` and the fine space is `F = 𝒮 ∪ λ`. With
//! `P = D⁻¹M` the simplified interpolation is
//!
//! ```text
//! P̃ = [ I  0 ]
//!     [ 0  I ]
//!     [ 0  P ]
//!     [ 0  0 ]
//! ```
//!
//! and the ideal interpolation `P̂` additionally fills the multiplier rows with
//! `[−D⁻ᵀK_SN, −D⁻ᵀK_SS P]`. Both give the Schur complement
//! `A_H = [[K_NN, K_NM + K_NS P], [K_MN + PᵀK_SN, K_MM + PᵀK_SS P]]` as coarse
//! operator. Ideal transfers are never formed; they are applied through
//! block-tridiagonal solves with `D`.
//!
//! One application runs: pre-smoothing, residual update, restriction, one
//! coarse solve, interpolation and correction. There is no post-smoothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coarse_amg::{amg_setup, AmgConfig, AmgError, AmgHierarchy};
use crate::krylov::LinearOperator;
use crate::sparsela::{CsrMatrix, IluFactorization, Permutation, SkylineCholesky, SparseError};
use crate::system::{CfSplit, SaddleSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwoLevelError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Amg(#[from] AmgError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    /// `P̂` applied matrix-free, with the matching ideal restriction.
    Ideal,
    /// Explicit `P̃` with restriction `P̃ᵀ`.
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Restriction {
    /// `R̂ = P̂ᵀ`, applied matrix-free, regardless of the interpolation.
    Ideal,
    /// Transpose of the interpolation: `R̂` for ideal, `P̃ᵀ` for simplified.
    InterpolationTranspose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoother {
    None,
    /// Undamped Jacobi sweeps on the full saddle matrix; zero diagonal
    /// entries of the multiplier block are replaced by 1.
    Jacobi { sweeps: usize },
    /// Exact solve with `A_FF` on the fine unknowns.
    ExactF,
    /// Simplified SIMPLE: diagonal `A_CC` plus ILU(0)-preconditioned
    /// Richardson on `S̃ = A_FF − A_FC D_CC⁻¹ A_CF`.
    SSimple { inner_sweeps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoarseSolve {
    Amg(AmgConfig),
    /// Sparse Cholesky of `A_H`.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelConfig {
    pub interpolation: Interpolation,
    pub restriction: Restriction,
    pub smoother: Smoother,
    /// Entries of `P` with `|p| ≤ ε` are dropped; `0` keeps every nonzero.
    pub drop_tolerance: f64,
    pub coarse: CoarseSolve,
}

impl Default for TwoLevelConfig {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::Simplified,
            restriction: Restriction::Ideal,
            smoother: Smoother::ExactF,
            drop_tolerance: 1e-10,
            coarse: CoarseSolve::Amg(AmgConfig::default()),
        }
    }
}

/// Sizes of the transfer and coarse operators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatorStats {
    pub p_rows: usize,
    /// Nonzeros of `D⁻¹M` before dropping.
    pub p_nnz_exact: usize,
    pub p_nnz: usize,
    /// Rows and nonzeros of the explicit interpolation `P̃` (with dropped `P`).
    pub interp_rows: usize,
    pub interp_nnz: usize,
    pub coarse_rows: usize,
    pub coarse_nnz: usize,
    pub amg_levels: usize,
    pub amg_operator_complexity: f64,
}

impl OperatorStats {
    pub fn p_nnz_per_row(&self) -> f64 {
        ratio(self.p_nnz, self.p_rows)
    }

    pub fn interp_nnz_per_row(&self) -> f64 {
        ratio(self.interp_nnz, self.interp_rows)
    }

    pub fn coarse_nnz_per_row(&self) -> f64 {
        ratio(self.coarse_nnz, self.coarse_rows)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

enum CoarseHandle {
    Amg(AmgHierarchy),
    Direct(SkylineCholesky),
}

enum SmootherState {
    None,
    Jacobi { inv_diag: Vec<f64>, sweeps: usize },
    ExactF,
    SSimple(SSimpleState),
}

struct SSimpleState {
    inv_dcc: Vec<f64>,
    a_cf: CsrMatrix,
    a_fc: CsrMatrix,
    s_tilde: CsrMatrix,
    /// ILU(0) of `S̃` with each slave DOF followed by its multiplier DOF.
    ilu: IluFactorization,
    ilu_order: Permutation,
    inner_sweeps: usize,
}

/// Computes `P = D⁻¹M` column by column with block-tridiagonal solves, then
/// drops entries with `|p| ≤ ε` (nothing is dropped for `ε = 0` beyond exact zeros).
pub fn build_p_matrix(sys: &SaddleSystem, eps: f64) -> Result<CsrMatrix, SparseError> {
    let (ns, nm) = (sys.split.n_slave, sys.split.n_master);
    let mt = sys.m.transpose();
    let mut trip = Vec::new();
    let mut col = vec![0.0; ns];
    for j in 0..nm {
        col.iter_mut().for_each(|v| *v = 0.0);
        let (rows, vals) = mt.row(j);
        if rows.is_empty() {
            continue;
        }
        for (&i, &v) in rows.iter().zip(vals) {
            col[i] = v;
        }
        let x = sys.solve_d(&col)?;
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 && v.abs() > eps {
                trip.push((i, j, v));
            }
        }
    }
    CsrMatrix::from_triplets(ns, nm, &trip)
}

/// Assembles the coarse operator from a (possibly dropped) `P`.
pub fn assemble_coarse(sys: &SaddleSystem, p: &CsrMatrix) -> Result<CsrMatrix, SparseError> {
    let s = sys.split;
    let knn = sys.block(s.interior(), s.interior());
    let knm = sys.block(s.interior(), s.master());
    let kns = sys.block(s.interior(), s.slave());
    let kmm = sys.block(s.master(), s.master());
    let kss = sys.block(s.slave(), s.slave());
    let upper = knm.add(1.0, &kns.spgemm(p)?, 1.0)?;
    let lower = upper.transpose();
    let ptkp = p.transpose().spgemm(&kss.spgemm(p)?)?.symmetrize()?;
    let kmm = kmm.symmetrize()?;
    let mm = kmm.add(1.0, &ptkp, 1.0)?;
    let knn = knn.symmetrize()?;
    CsrMatrix::from_blocks(&[vec![Some(&knn), Some(&upper)], vec![Some(&lower), Some(&mm)]])
}

/// Explicit `P̃` over `C → (𝒩, ℳ, 𝒮, λ)`.
pub fn simplified_interpolation(split: &CfSplit, p: &CsrMatrix) -> CsrMatrix {
    let ic = CsrMatrix::identity(split.n_coarse());
    let zero_n = CsrMatrix::zeros(split.n_slave, split.n_interior);
    let lam = CsrMatrix::zeros(split.n_lambda, split.n_coarse());
    let slave = CsrMatrix::from_blocks(&[vec![Some(&zero_n), Some(p)]]).expect("row counts agree");
    CsrMatrix::from_blocks(&[vec![Some(&ic)], vec![Some(&slave)], vec![Some(&lam)]])
        .expect("column counts agree")
}

pub struct TwoLevelPreconditioner<'a> {
    sys: &'a SaddleSystem,
    cfg: TwoLevelConfig,
    p: CsrMatrix,
    pt: CsrMatrix,
    kns: CsrMatrix,
    ksn: CsrMatrix,
    kss: CsrMatrix,
    coarse_op: CsrMatrix,
    coarse: CoarseHandle,
    smoother: SmootherState,
    stats: OperatorStats,
}

impl<'a> TwoLevelPreconditioner<'a> {
    pub fn new(sys: &'a SaddleSystem, cfg: TwoLevelConfig) -> Result<Self, TwoLevelError> {
        if !(cfg.drop_tolerance >= 0.0) {
            return Err(TwoLevelError::Config("drop tolerance must be non-negative".into()));
        }
        let s = sys.split;
        let p_exact = build_p_matrix(sys, 0.0)?;
        let p = if cfg.drop_tolerance > 0.0 {
            p_exact.drop(cfg.drop_tolerance)
        } else {
            p_exact.clone()
        };
        let coarse_op = assemble_coarse(sys, &p)?;
        let coarse = match cfg.coarse {
            CoarseSolve::Amg(acfg) => {
                CoarseHandle::Amg(amg_setup(&coarse_op, &sys.coarse_nodes, &acfg)?)
            }
            CoarseSolve::Direct => CoarseHandle::Direct(SkylineCholesky::new(&coarse_op)?),
        };
        let smoother = match cfg.smoother {
            Smoother::None => SmootherState::None,
            Smoother::ExactF => SmootherState::ExactF,
            Smoother::Jacobi { sweeps } => {
                if sweeps == 0 {
                    return Err(TwoLevelError::Config("Jacobi needs at least one sweep".into()));
                }
                SmootherState::Jacobi {
                    inv_diag: patched_inverse_diagonal(&sys.a),
                    sweeps,
                }
            }
            Smoother::SSimple { inner_sweeps } => {
                if inner_sweeps == 0 {
                    return Err(TwoLevelError::Config("sSIMPLE needs at least one inner sweep".into()));
                }
                SmootherState::SSimple(SSimpleState::new(sys, inner_sweeps)?)
            }
        };
        let (amg_levels, amg_operator_complexity) = match &coarse {
            CoarseHandle::Amg(h) => (h.num_levels(), h.operator_complexity()),
            CoarseHandle::Direct(_) => (1, 1.0),
        };
        let stats = OperatorStats {
            p_rows: p.nrows(),
            p_nnz_exact: p_exact.nnz(),
            p_nnz: p.nnz(),
            interp_rows: s.dim(),
            interp_nnz: s.n_coarse() + p.nnz(),
            coarse_rows: coarse_op.nrows(),
            coarse_nnz: coarse_op.nnz(),
            amg_levels,
            amg_operator_complexity,
        };
        Ok(Self {
            sys,
            cfg,
            pt: p.transpose(),
            p,
            kns: sys.block(s.interior(), s.slave()),
            ksn: sys.block(s.slave(), s.interior()),
            kss: sys.block(s.slave(), s.slave()),
            coarse_op,
            coarse,
            smoother,
            stats,
        })
    }

    pub fn config(&self) -> &TwoLevelConfig {
        &self.cfg
    }

    pub fn stats(&self) -> OperatorStats {
        self.stats
    }

    /// The (possibly dropped) `P` used by the transfers and `A_H`.
    pub fn p_matrix(&self) -> &CsrMatrix {
        &self.p
    }

    pub fn coarse_operator(&self) -> &CsrMatrix {
        &self.coarse_op
    }

    fn split(&self) -> CfSplit {
        self.sys.split
    }

    /// Coarse solve `e_H ≈ A_H⁻¹ f_H`.
    pub fn coarse_apply(&self, f_h: &[f64]) -> Vec<f64> {
        match &self.coarse {
            CoarseHandle::Amg(h) => h.vcycle(f_h),
            CoarseHandle::Direct(c) => c.solve(f_h).expect("dimension checked at setup"),
        }
    }

    pub fn uses_ideal_restriction(&self) -> bool {
        self.cfg.restriction == Restriction::Ideal || self.cfg.interpolation == Interpolation::Ideal
    }

    /// Restriction of a fine residual to the coarse space.
    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        let s = self.split();
        assert_eq!(f.len(), s.dim());
        let mut f_n = f[s.interior()].to_vec();
        let f_m = &f[s.master()];
        let mut f_s = f[s.slave()].to_vec();
        if self.uses_ideal_restriction() {
            // ṽ carries w = D⁻¹f_λ in the slave slot; restrict f − 𝒜ṽ with P̃ᵀ.
            let w = self.sys.solve_d(&f[s.lambda()]).expect("factorized at setup");
            self.kns.spmv_add(-1.0, &w, &mut f_n);
            self.kss.spmv_add(-1.0, &w, &mut f_s);
        }
        let mut out = f_n;
        let mut fm = f_m.to_vec();
        self.pt.spmv_add(1.0, &f_s, &mut fm);
        out.extend_from_slice(&fm);
        out
    }

    /// Interpolation of a coarse correction to the full space.
    pub fn interpolate(&self, e_h: &[f64]) -> Vec<f64> {
        let s = self.split();
        assert_eq!(e_h.len(), s.n_coarse());
        let mut e = Vec::with_capacity(s.dim());
        e.extend_from_slice(e_h);
        let e_m = &e_h[s.n_interior..];
        let e_s = self.p.spmv(e_m).expect("dimension checked");
        e.extend_from_slice(&e_s);
        if self.cfg.interpolation == Interpolation::Ideal {
            let mut t1 = self.kss.spmv(&e_s).expect("dimension checked");
            self.ksn.spmv_add(1.0, &e_h[s.interior()], &mut t1);
            let lam = self.sys.solve_dt(&t1).expect("factorized at setup");
            e.extend(lam.into_iter().map(|v| -v));
        } else {
            e.resize(s.dim(), 0.0);
        }
        e
    }

    /// Exact fine solve: zero on `C`, `A_FF x_F = b_F`.
    pub fn exact_f_apply(&self, b: &[f64]) -> Vec<f64> {
        let s = self.split();
        let mut x = vec![0.0; s.dim()];
        let xs = self.sys.solve_d(&b[s.lambda()]).expect("factorized at setup");
        let mut rhs = b[s.slave()].to_vec();
        self.kss.spmv_add(-1.0, &xs, &mut rhs);
        let xl = self.sys.solve_dt(&rhs).expect("factorized at setup");
        x[s.slave()].copy_from_slice(&xs);
        x[s.lambda()].copy_from_slice(&xl);
        x
    }

    /// The pre-smoother `B⁻¹ b`.
    pub fn smooth(&self, b: &[f64]) -> Vec<f64> {
        match &self.smoother {
            SmootherState::None => vec![0.0; b.len()],
            SmootherState::ExactF => self.exact_f_apply(b),
            SmootherState::Jacobi { inv_diag, sweeps } => {
                jacobi_with(&self.sys.a, inv_diag, b, *sweeps)
            }
            SmootherState::SSimple(st) => st.apply(self.split(), b),
        }
    }

    /// One two-level cycle from a zero initial guess.
    pub fn apply_vec(&self, r: &[f64]) -> Vec<f64> {
        let n = self.split().dim();
        assert_eq!(r.len(), n);
        let mut z = self.smooth(r);
        let mut f = r.to_vec();
        if !matches!(self.smoother, SmootherState::None) {
            self.sys.a.spmv_add(-1.0, &z, &mut f);
        }
        let f_h = self.restrict(&f);
        let e_h = self.coarse_apply(&f_h);
        let e = self.interpolate(&e_h);
        for (zi, ei) in z.iter_mut().zip(&e) {
            *zi += ei;
        }
        z
    }
}

impl LinearOperator for TwoLevelPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.split().dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.apply_vec(x));
    }
}

/// Inverse diagonal of `a` with zero diagonal entries treated as 1.
pub fn patched_inverse_diagonal(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d == 0.0 { 1.0 } else { 1.0 / d })
        .collect()
}

/// `sweeps` Jacobi iterations from zero with a given inverse diagonal.
pub fn jacobi_with(a: &CsrMatrix, inv_diag: &[f64], b: &[f64], sweeps: usize) -> Vec<f64> {
    let n = b.len();
    let mut x: Vec<f64> = b.iter().zip(inv_diag).map(|(b, d)| b * d).collect();
    let mut ax = vec![0.0; n];
    for _ in 1..sweeps {
        a.spmv_into(&x, &mut ax);
        for i in 0..n {
            x[i] += inv_diag[i] * (b[i] - ax[i]);
        }
    }
    x
}

impl SSimpleState {
    fn new(sys: &SaddleSystem, inner_sweeps: usize) -> Result<Self, SparseError> {
        let s = sys.split;
        let dcc = sys.block(s.coarse(), s.coarse()).diagonal();
        if let Some(i) = dcc.iter().position(|&d| d == 0.0) {
            return Err(SparseError::ZeroDiagonal(i));
        }
        let inv_dcc: Vec<f64> = dcc.iter().map(|d| 1.0 / d).collect();
        let a_cf = sys.block(s.coarse(), s.fine());
        let a_fc = sys.block(s.fine(), s.coarse());
        let a_ff = sys.block(s.fine(), s.fine());
        let scaled = a_cf.scale_rows_cols(Some(&inv_dcc), None);
        let correction = a_fc.spgemm(&scaled)?;
        let s_tilde = a_ff.add(1.0, &correction, -1.0)?;
        let ilu_order = interleaved_fine_order(s);
        let ilu = IluFactorization::new(&s_tilde.permute(&ilu_order, &ilu_order))?;
        Ok(Self {
            inv_dcc,
            a_cf,
            a_fc,
            s_tilde,
            ilu,
            ilu_order,
            inner_sweeps,
        })
    }

    fn apply(&self, s: CfSplit, b: &[f64]) -> Vec<f64> {
        let nc = s.n_coarse();
        let p: Vec<f64> = b[..nc].iter().zip(&self.inv_dcc).map(|(b, d)| b * d).collect();
        let mut rhs = b[nc..].to_vec();
        self.a_fc.spmv_add(-1.0, &p, &mut rhs);
        let mut q = vec![0.0; rhs.len()];
        let mut res = rhs.clone();
        for k in 0..self.inner_sweeps {
            if k > 0 {
                self.s_tilde.spmv_into(&q, &mut res);
                for (r, f) in res.iter_mut().zip(&rhs) {
                    *r = f - *r;
                }
            }
            let mut t = self.ilu_order.apply(&res);
            self.ilu.solve_in_place(&mut t);
            res = self.ilu_order.apply_inverse(&t);
            for (qi, ri) in q.iter_mut().zip(&res) {
                *qi += ri;
            }
        }
        let cq = self.a_cf.spmv(&q).expect("dimension checked");
        let mut x: Vec<f64> = p
            .iter()
            .zip(&cq)
            .zip(&self.inv_dcc)
            .map(|((p, c), d)| p - d * c)
            .collect();
        x.extend_from_slice(&q);
        x
    }
}

/// Fine-space order `[s₀, λ₀, s₁, λ₁, …]` (new → old, local to `F`).
fn interleaved_fine_order(s: CfSplit) -> Permutation {
    let ns = s.n_slave;
    let order = (0..ns).flat_map(|i| [i, ns + i]).collect();
    Permutation::from_vec(order).expect("bijection on F")
}

/// `S̃ = A_FF − A_FC D_CC⁻¹ A_CF` assembled explicitly.
pub fn ssimple_schur(sys: &SaddleSystem) -> Result<CsrMatrix, SparseError> {
    Ok(SSimpleState::new(sys, 1)?.s_tilde)
}
