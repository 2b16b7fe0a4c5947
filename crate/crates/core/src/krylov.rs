//! Right-preconditioned GCR and preconditioned CG.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparsela::{axpy, dot, norm2, CsrMatrix};

/// A square linear map `y = A x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

impl<T: LinearOperator + ?Sized + Send> LinearOperator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64]) + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrylovError {
    #[error("dimension mismatch: operator {op}, preconditioner {pc}, rhs {rhs}")]
    DimensionMismatch { op: usize, pc: usize, rhs: usize },
    #[error("GCR breakdown at iteration {iteration}: search direction has zero A-norm")]
    Breakdown { iteration: usize },
    #[error("CG detected a non-positive curvature pᵀAp = {curvature:e} at iteration {iteration}")]
    IndefiniteDetected { iteration: usize, curvature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    /// GCR direction storage before restart; `None` keeps every direction.
    pub restart: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tolerance: 1e-8,
            restart: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tolerance > 0.0) {
            return Err(format!("tolerance must be positive, got {}", self.rel_tolerance));
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be at least 1".into());
        }
        if self.restart == Some(0) {
            return Err("restart must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// `‖r_k‖₂ / ‖r_0‖₂` for `k = 0..=iterations`.
    pub residual_history: Vec<f64>,
    /// `‖b − A x‖₂ / ‖b‖₂` recomputed from the returned iterate.
    pub final_true_residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

fn check_dims(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
) -> Result<(), KrylovError> {
    if a.dim() != b.len() || m.dim() != b.len() {
        return Err(KrylovError::DimensionMismatch {
            op: a.dim(),
            pc: m.dim(),
            rhs: b.len(),
        });
    }
    Ok(())
}

fn true_residual(a: &dyn LinearOperator, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    if bnorm == 0.0 {
        return 0.0;
    }
    let mut ax = vec![0.0; b.len()];
    a.apply(x, &mut ax);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum();
    r.sqrt() / bnorm
}

/// Right-preconditioned generalized conjugate residual method from `x₀ = 0`.
///
/// Stops when `‖b − A x‖₂ ≤ tol·‖b‖₂` or after `max_iterations`. The
/// recurrence residual triggers the test, which is then confirmed with the true
/// residual; if the two disagree the search directions are discarded and the
/// iteration continues from the true residual.
pub fn gcr_solve(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport), KrylovError> {
    check_dims(a, m, b)?;
    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = norm2(b);
    let mut history = Vec::with_capacity(cfg.max_iterations + 1);
    if bnorm == 0.0 {
        history.push(0.0);
        return Ok((x, report(0, true, history, 0.0, start)));
    }
    history.push(1.0);
    let restart = cfg.restart.unwrap_or(usize::MAX);
    let mut ps: Vec<Vec<f64>> = Vec::new();
    let mut qs: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut it = 0;
    while it < cfg.max_iterations {
        if ps.len() >= restart {
            ps.clear();
            qs.clear();
        }
        let mut p = vec![0.0; n];
        m.apply(&r, &mut p);
        let mut q = vec![0.0; n];
        a.apply(&p, &mut q);
        for (pj, qj) in ps.iter().zip(&qs) {
            let beta = dot(&q, qj);
            axpy(-beta, qj, &mut q);
            axpy(-beta, pj, &mut p);
        }
        let qn = norm2(&q);
        if qn == 0.0 || !qn.is_finite() {
            return Err(KrylovError::Breakdown { iteration: it + 1 });
        }
        q.iter_mut().for_each(|v| *v /= qn);
        p.iter_mut().for_each(|v| *v /= qn);
        let alpha = dot(&r, &q);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        it += 1;
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        ps.push(p);
        qs.push(q);
        if rel <= cfg.rel_tolerance {
            // Confirm against the true residual; on a mismatch restart from it.
            let mut ax = vec![0.0; n];
            a.apply(&x, &mut ax);
            let true_r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if norm2(&true_r) / bnorm <= cfg.rel_tolerance {
                converged = true;
                break;
            }
            r = true_r;
            ps.clear();
            qs.clear();
            continue;
        }
    }
    let tr = true_residual(a, &x, b, bnorm);
    Ok((x, report(it, converged, history, tr, start)))
}

fn report(
    iterations: usize,
    converged: bool,
    residual_history: Vec<f64>,
    final_true_residual: f64,
    start: Instant,
) -> SolveReport {
    SolveReport {
        iterations,
        converged,
        residual_history,
        final_true_residual,
        setup_seconds: 0.0,
        solve_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Preconditioned conjugate gradients from `x₀ = 0` with the same stopping rule.
pub fn cg_solve(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport), KrylovError> {
    check_dims(a, m, b)?;
    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = norm2(b);
    let mut history = Vec::with_capacity(cfg.max_iterations + 1);
    if bnorm == 0.0 {
        history.push(0.0);
        return Ok((x, report(0, true, history, 0.0, start)));
    }
    history.push(1.0);
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut converged = false;
    let mut it = 0;
    while it < cfg.max_iterations {
        a.apply(&p, &mut ap);
        let curv = dot(&p, &ap);
        if curv <= 0.0 || !curv.is_finite() {
            return Err(KrylovError::IndefiniteDetected {
                iteration: it + 1,
                curvature: curv,
            });
        }
        let alpha = rz / curv;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        it += 1;
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= cfg.rel_tolerance {
            converged = true;
            break;
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let tr = true_residual(a, &x, b, bnorm);
    Ok((x, report(it, converged, history, tr, start)))
}
