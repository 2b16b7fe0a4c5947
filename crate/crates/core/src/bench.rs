//! Benchmark runs: build or load a system, set up a preconditioner, solve with
//! GCR and summarise the outcome as one report row.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coarse_amg::{amg_setup, AmgConfig, AmgError, AmgHierarchy};
use crate::krylov::{gcr_solve, IdentityOperator, KrylovError, LinearOperator, SolveReport, SolverConfig};
use crate::meshgen::{ContactModelSpec, ModelId};
use crate::sparsela::{norm2, CsrMatrix, IluFactorization, SparseError};
use crate::system::{import_system, SaddleSystem, SystemError};
use crate::twolevel::{Interpolation, Smoother, TwoLevelConfig, TwoLevelError, TwoLevelPreconditioner};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    TwoLevel(#[from] TwoLevelError),
    #[error(transparent)]
    Amg(#[from] AmgError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemSource {
    Model(ContactModelSpec),
    /// Directory written by [`crate::system::export_system`].
    Import(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    TwoLevel(TwoLevelConfig),
    /// Block SIMPLE: one AMG V-cycle on `K`, ILU(0) on `G diag(K)⁻¹ Gᵀ`.
    Simple(AmgConfig),
    /// AMG applied to the whole saddle matrix with the zero multiplier
    /// diagonal replaced by 1.
    PlainAmg(AmgConfig),
    None,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::TwoLevel(c) => {
                let interp = match c.interpolation {
                    Interpolation::Ideal => "ideal",
                    Interpolation::Simplified => "simplified",
                };
                let smoother = match c.smoother {
                    Smoother::None => "none".to_string(),
                    Smoother::Jacobi { .. } => "jac".to_string(),
                    Smoother::ExactF => "exactf".to_string(),
                    Smoother::SSimple { .. } => "ssimple".to_string(),
                };
                let coarse = match c.coarse {
                    crate::twolevel::CoarseSolve::Amg(_) => "amg",
                    crate::twolevel::CoarseSolve::Direct => "direct",
                };
                format!("tlamg-{interp}-{smoother}-{coarse}-eps{:e}", c.drop_tolerance)
            }
            Method::Simple(_) => "simple".into(),
            Method::PlainAmg(_) => "amg".into(),
            Method::None => "none".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: ProblemSource,
    pub method: Method,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn model(model: ModelId, resolution: usize, method: Method) -> Self {
        Self {
            source: ProblemSource::Model(ContactModelSpec::new(model, resolution)),
            method,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.solver.validate().map_err(BenchError::Config)?;
        if let ProblemSource::Model(spec) = &self.source {
            spec.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub problem: String,
    pub method: String,
    pub dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    /// `‖b − 𝒜x‖₂ / ‖b‖₂` of the returned iterate.
    pub final_residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub total_seconds: f64,
    pub p_nnz: Option<usize>,
    pub p_nnz_per_row: Option<f64>,
    pub interp_nnz_per_row: Option<f64>,
    pub coarse_nnz_per_row: Option<f64>,
    /// `‖G d‖₂ / ‖d‖₂` for the displacement part `d` of the solution.
    pub constraint_violation: f64,
    /// Set when the solver stopped on an error instead of the iteration cap.
    pub solver_error: Option<String>,
    pub residual_history: Vec<f64>,
}

/// Runs one configuration. Setup failures are errors; solver failures are
/// reported in the row as a non-converged run.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkRow, BenchError> {
    let (row, _) = run_benchmark_with_solution(cfg)?;
    Ok(row)
}

pub fn run_benchmark_with_solution(cfg: &RunConfig) -> Result<(BenchmarkRow, Vec<f64>), BenchError> {
    cfg.validate()?;
    let (sys, problem) = match &cfg.source {
        ProblemSource::Model(spec) => (SaddleSystem::from_model(spec)?, format!("{}-r{}", spec.model, spec.resolution)),
        ProblemSource::Import(dir) => (import_system(dir)?, dir.display().to_string()),
    };
    solve_system(&sys, &problem, &cfg.method, &cfg.solver)
}

/// Sets up `method` on an existing system and solves `𝒜x = b`.
pub fn solve_system(
    sys: &SaddleSystem,
    problem: &str,
    method: &Method,
    solver: &SolverConfig,
) -> Result<(BenchmarkRow, Vec<f64>), BenchError> {
    let t0 = Instant::now();
    let mut stats = None;
    let pc: Box<dyn LinearOperator + Send + '_> = match method {
        Method::TwoLevel(c) => {
            let pc = TwoLevelPreconditioner::new(sys, *c)?;
            stats = Some(pc.stats());
            Box::new(pc)
        }
        Method::Simple(acfg) => Box::new(SimplePreconditioner::new(sys, acfg)?),
        Method::PlainAmg(acfg) => {
            let (a, nodes) = patched_saddle(sys);
            Box::new(amg_setup(&a, &nodes, acfg)?)
        }
        Method::None => Box::new(IdentityOperator(sys.dim())),
    };
    let setup = t0.elapsed().as_secs_f64();
    let (x, report, err) = match gcr_solve(&sys.a, &pc, &sys.rhs, solver) {
        Ok((x, r)) => (x, r, None),
        Err(e) => (vec![0.0; sys.dim()], failed_report(&e, solver), Some(e.to_string())),
    };
    let row = BenchmarkRow {
        problem: problem.to_string(),
        method: method.label(),
        dofs: sys.dim(),
        iterations: report.iterations,
        converged: report.converged,
        final_residual: report.final_true_residual,
        setup_seconds: setup,
        solve_seconds: report.solve_seconds,
        total_seconds: setup + report.solve_seconds,
        p_nnz: stats.map(|s| s.p_nnz),
        p_nnz_per_row: stats.map(|s| s.p_nnz_per_row()),
        interp_nnz_per_row: stats.map(|s| s.interp_nnz_per_row()),
        coarse_nnz_per_row: stats.map(|s| s.coarse_nnz_per_row()),
        constraint_violation: constraint_violation(sys, &x),
        solver_error: err,
        residual_history: report.residual_history,
    };
    Ok((row, x))
}

fn failed_report(e: &KrylovError, solver: &SolverConfig) -> SolveReport {
    let iterations = match e {
        KrylovError::Breakdown { iteration } => *iteration,
        _ => solver.max_iterations,
    };
    SolveReport {
        iterations,
        converged: false,
        residual_history: vec![1.0],
        final_true_residual: 1.0,
        setup_seconds: 0.0,
        solve_seconds: 0.0,
    }
}

/// `‖G d‖₂ / ‖d‖₂` where `d` is the displacement part of `x`.
pub fn constraint_violation(sys: &SaddleSystem, x: &[f64]) -> f64 {
    let nd = sys.split.n_disp();
    let d = &x[..nd];
    let gd = sys.g().spmv(d).expect("G has one column per displacement");
    let dn = norm2(d);
    if dn == 0.0 {
        norm2(&gd)
    } else {
        norm2(&gd) / dn
    }
}

/// Node id of every unknown: coarse DOFs keep their mesh nodes, slave and
/// multiplier DOFs are grouped in consecutive pairs.
fn node_ids(sys: &SaddleSystem, n: usize) -> Vec<usize> {
    let nc = sys.split.n_coarse();
    let mut nodes = sys.coarse_nodes.clone();
    let base = nodes.iter().max().map_or(0, |m| m + 1);
    nodes.extend((0..n - nc).map(|i| base + i / 2));
    nodes
}

fn patched_saddle(sys: &SaddleSystem) -> (CsrMatrix, Vec<usize>) {
    let lam = sys.split.lambda();
    let mut trip: Vec<(usize, usize, f64)> = sys.a.triplets().collect();
    trip.extend(lam.clone().map(|i| (i, i, 1.0)));
    let a = CsrMatrix::from_triplets(sys.dim(), sys.dim(), &trip).expect("indices in range");
    (a, node_ids(sys, sys.dim()))
}

/// SIMPLE block preconditioner for `[[K, Gᵀ], [G, 0]]`:
/// `u* = AMG(K) r_u`, `λ = Ŝ⁻¹(G u* − r_λ)`, `u = u* − D_K⁻¹Gᵀλ` with
/// `Ŝ = G D_K⁻¹ Gᵀ` solved by one ILU(0) application.
pub struct SimplePreconditioner {
    amg: AmgHierarchy,
    g: CsrMatrix,
    gt: CsrMatrix,
    dk_inv: Vec<f64>,
    schur: IluFactorization,
}

impl SimplePreconditioner {
    pub fn new(sys: &SaddleSystem, cfg: &AmgConfig) -> Result<Self, BenchError> {
        let nd = sys.split.n_disp();
        let k = sys.k();
        let amg = amg_setup(&k, &node_ids(sys, nd), cfg)?;
        let g = sys.g();
        let gt = g.transpose();
        let dk_inv: Vec<f64> = k.diagonal().iter().map(|&v| 1.0 / v).collect();
        let s = g.scale_rows_cols(None, Some(&dk_inv)).spgemm(&gt)?;
        let schur = IluFactorization::new(&s)?;
        Ok(Self {
            amg,
            g,
            gt,
            dk_inv,
            schur,
        })
    }
}

impl LinearOperator for SimplePreconditioner {
    fn dim(&self) -> usize {
        self.g.ncols() + self.g.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nd = self.g.ncols();
        let u = self.amg.vcycle(&x[..nd]);
        let mut lam = self.g.spmv(&u).expect("dimensions agree");
        for (l, r) in lam.iter_mut().zip(&x[nd..]) {
            *l -= r;
        }
        self.schur.solve_in_place(&mut lam);
        let corr = self.gt.spmv(&lam).expect("dimensions agree");
        for i in 0..nd {
            y[i] = u[i] - self.dk_inv[i] * corr[i];
        }
        y[nd..].copy_from_slice(&lam);
    }
}
