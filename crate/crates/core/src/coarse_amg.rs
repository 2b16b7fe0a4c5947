//! Classical (Ruge–Stüben style) algebraic multigrid for SPD systems with a
//! nodal strength graph, unknown-based direct interpolation and damped
//! Jacobi smoothing. One application is one V(1,1)-cycle from a zero initial
//! guess, which is a fixed symmetric linear operator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::krylov::LinearOperator;
use crate::sparsela::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmgError {
    #[error("AMG setup failed: {0}")]
    SetupFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmgConfig {
    /// Strength threshold θ.
    pub strength_threshold: f64,
    /// Jacobi damping weight ω.
    pub jacobi_weight: f64,
    /// Caps the weight per level at `4 / (3 ρ(D⁻¹A))` from a power-iteration
    /// estimate; for a Laplacian-like level (ρ ≈ 2) this leaves ω = 2/3.
    pub spectral_damping: bool,
    pub max_coarse: usize,
    pub max_levels: usize,
    /// Largest level accepted for a dense coarsest solve when coarsening stalls.
    pub max_dense: usize,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            strength_threshold: 0.25,
            jacobi_weight: 2.0 / 3.0,
            spectral_damping: true,
            max_coarse: 200,
            max_levels: 25,
            max_dense: 4000,
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    a: CsrMatrix,
    p: CsrMatrix,
    r: CsrMatrix,
    inv_diag: Vec<f64>,
    omega: f64,
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarsest: CoarseSolver,
    coarsest_dim: usize,
    fine_nnz: usize,
    total_nnz: usize,
}

/// Builds the hierarchy. `node_of_dof[i]` groups DOFs into mesh nodes; DOFs of a
/// node are its components in order of appearance.
pub fn amg_setup(
    a: &CsrMatrix,
    node_of_dof: &[usize],
    cfg: &AmgConfig,
) -> Result<AmgHierarchy, AmgError> {
    let n = a.nrows();
    if a.ncols() != n || node_of_dof.len() != n {
        return Err(AmgError::SetupFailure(format!(
            "operator is {:?} but node map has {} entries",
            a.shape(),
            node_of_dof.len()
        )));
    }
    let mut levels = Vec::new();
    let mut cur = a.clone();
    let mut nodes = node_of_dof.to_vec();
    let fine_nnz = a.nnz();
    let mut total_nnz = a.nnz();
    loop {
        let n = cur.nrows();
        if n <= cfg.max_coarse || levels.len() + 1 >= cfg.max_levels {
            break;
        }
        let diag = cur.diagonal();
        if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
            return Err(AmgError::SetupFailure(format!(
                "non-positive diagonal {} at row {i} on level {}",
                diag[i],
                levels.len()
            )));
        }
        let Some((p, coarse_nodes)) = coarsen(&cur, &nodes, cfg.strength_threshold) else {
            break;
        };
        if p.ncols() == 0 || p.ncols() as f64 > 0.95 * n as f64 {
            break;
        }
        let r = p.transpose();
        let ac = r
            .spgemm(&cur)
            .and_then(|ra| ra.spgemm(&p))
            .map_err(|e| AmgError::SetupFailure(e.to_string()))?;
        total_nnz += ac.nnz();
        let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let omega = if cfg.spectral_damping {
            cfg.jacobi_weight.min(4.0 / (3.0 * jacobi_spectral_radius(&cur, &inv_diag)))
        } else {
            cfg.jacobi_weight
        };
        levels.push(Level {
            a: cur,
            p,
            r,
            inv_diag,
            omega,
        });
        cur = ac;
        nodes = coarse_nodes;
    }
    let nc = cur.nrows();
    if nc > cfg.max_dense {
        return Err(AmgError::SetupFailure(format!(
            "coarsening stalled at {nc} unknowns on level {}",
            levels.len()
        )));
    }
    let dense = DMatrix::from_row_slice(nc, nc, &cur.to_dense());
    let coarsest = match dense.clone().cholesky() {
        Some(c) => CoarseSolver::Cholesky(c),
        None => {
            let lu = dense.lu();
            if !lu.is_invertible() {
                return Err(AmgError::SetupFailure("coarsest operator is singular".into()));
            }
            CoarseSolver::Lu(lu)
        }
    };
    Ok(AmgHierarchy {
        levels,
        coarsest,
        coarsest_dim: nc,
        fine_nnz,
        total_nnz,
    })
}

/// Nodal strength, Ruge–Stüben splitting on nodes, and unknown-based direct
/// interpolation. Returns `None` when no strong connections exist.
fn coarsen(a: &CsrMatrix, node_of_dof: &[usize], theta: f64) -> Option<(CsrMatrix, Vec<usize>)> {
    let n = a.nrows();
    // Compress node ids to 0..nn and record component index of each DOF.
    let mut node_id = vec![usize::MAX; n];
    let mut remap = std::collections::HashMap::new();
    let mut comp = vec![0usize; n];
    let mut node_dofs: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let id = *remap.entry(node_of_dof[i]).or_insert_with(|| {
            node_dofs.push(Vec::new());
            node_dofs.len() - 1
        });
        node_id[i] = id;
        comp[i] = node_dofs[id].len();
        node_dofs[id].push(i);
    }
    let nn = node_dofs.len();

    // Row-sum norm of each off-diagonal node block.
    let mut nbr: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nn];
    let mut acc = vec![0.0; nn];
    let mut touched: Vec<usize> = Vec::new();
    for ni in 0..nn {
        for &i in &node_dofs[ni] {
            let mut row_acc: Vec<(usize, f64)> = Vec::new();
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let nj = node_id[j];
                if nj == ni {
                    continue;
                }
                match row_acc.iter_mut().find(|e| e.0 == nj) {
                    Some(e) => e.1 += v.abs(),
                    None => row_acc.push((nj, v.abs())),
                }
            }
            for (nj, s) in row_acc {
                if acc[nj] == 0.0 {
                    touched.push(nj);
                }
                acc[nj] = f64::max(acc[nj], s);
            }
        }
        for &nj in &touched {
            nbr[ni].push((nj, acc[nj]));
            acc[nj] = 0.0;
        }
        touched.clear();
        nbr[ni].sort_unstable_by_key(|e| e.0);
    }
    // strong[i]: nodes that i strongly depends on.
    let strong: Vec<Vec<usize>> = nbr
        .iter()
        .map(|row| {
            let mx = row.iter().fold(0.0, |m: f64, e| m.max(e.1));
            row.iter()
                .filter(|e| mx > 0.0 && e.1 >= theta * mx)
                .map(|e| e.0)
                .collect()
        })
        .collect();
    if strong.iter().all(Vec::is_empty) {
        return None;
    }
    let mut influences: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for (i, s) in strong.iter().enumerate() {
        for &j in s {
            influences[j].push(i);
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        U,
        C,
        F,
    }
    let mut mark = vec![Mark::U; nn];
    for i in 0..nn {
        if strong[i].is_empty() && influences[i].is_empty() {
            mark[i] = Mark::F;
        }
    }
    // First pass: bucket-based greedy selection by measure.
    let mut measure: Vec<usize> = influences.iter().map(Vec::len).collect();
    let maxm = nn * 2 + 1;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); maxm + 1];
    for i in 0..nn {
        if mark[i] == Mark::U {
            buckets[measure[i]].push(i);
        }
    }
    let mut top = maxm;
    loop {
        while top > 0 && buckets[top].is_empty() {
            top -= 1;
        }
        if top == 0 {
            break;
        }
        let Some(i) = buckets[top].pop() else {
            continue;
        };
        if mark[i] != Mark::U || measure[i] != top {
            continue;
        }
        mark[i] = Mark::C;
        for &j in &influences[i] {
            if mark[j] == Mark::U {
                mark[j] = Mark::F;
                for &k in &strong[j] {
                    if mark[k] == Mark::U {
                        measure[k] += 1;
                        let m = measure[k].min(maxm);
                        measure[k] = m;
                        buckets[m].push(k);
                        top = top.max(m);
                    }
                }
            }
        }
        for &j in &strong[i] {
            if mark[j] == Mark::U && measure[j] > 0 {
                measure[j] -= 1;
                buckets[measure[j]].push(j);
            }
        }
    }
    for m in mark.iter_mut() {
        if *m == Mark::U {
            *m = Mark::F;
        }
    }
    // Second pass: strongly connected F-F pairs must share a C node.
    let mut is_c_nbr = vec![usize::MAX; nn];
    for i in 0..nn {
        if mark[i] != Mark::F {
            continue;
        }
        for &k in &strong[i] {
            if mark[k] == Mark::C {
                is_c_nbr[k] = i;
            }
        }
        for idx in 0..strong[i].len() {
            let j = strong[i][idx];
            if mark[j] != Mark::F {
                continue;
            }
            let shares = strong[j].iter().any(|&k| mark[k] == Mark::C && is_c_nbr[k] == i);
            if !shares {
                mark[j] = Mark::C;
                is_c_nbr[j] = i;
            }
        }
    }

    // Coarse numbering follows fine DOF order.
    let mut coarse_index = vec![usize::MAX; n];
    let mut coarse_nodes = Vec::new();
    for i in 0..n {
        if mark[node_id[i]] == Mark::C {
            coarse_index[i] = coarse_nodes.len();
            coarse_nodes.push(node_id[i]);
        }
    }
    let nc = coarse_nodes.len();

    // Direct interpolation using same-component couplings only.
    let mut strong_flag = vec![usize::MAX; nn];
    let mut trip = Vec::new();
    for i in 0..n {
        let ni = node_id[i];
        if mark[ni] == Mark::C {
            trip.push((i, coarse_index[i], 1.0));
            continue;
        }
        for &k in &strong[ni] {
            strong_flag[k] = i;
        }
        let (cols, vals) = a.row(i);
        let mut aii = 0.0;
        let (mut sum_neg, mut sum_pos) = (0.0, 0.0);
        let (mut c_neg, mut c_pos) = (0.0, 0.0);
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                aii = v;
                continue;
            }
            if comp[j] != comp[i] {
                continue;
            }
            let nj = node_id[j];
            let interp = mark[nj] == Mark::C && strong_flag[nj] == i;
            if v < 0.0 {
                sum_neg += v;
                if interp {
                    c_neg += v;
                }
            } else {
                sum_pos += v;
                if interp {
                    c_pos += v;
                }
            }
        }
        if c_pos == 0.0 {
            aii += sum_pos;
        }
        let alpha = if c_neg != 0.0 { sum_neg / c_neg } else { 0.0 };
        let beta = if c_pos != 0.0 { sum_pos / c_pos } else { 0.0 };
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i || comp[j] != comp[i] {
                continue;
            }
            let nj = node_id[j];
            if mark[nj] == Mark::C && strong_flag[nj] == i {
                let w = if v < 0.0 { -alpha * v / aii } else { -beta * v / aii };
                if w != 0.0 {
                    trip.push((i, coarse_index[j], w));
                }
            }
        }
    }
    let p = CsrMatrix::from_triplets(n, nc, &trip).ok()?;
    Some((p, coarse_nodes))
}

impl AmgHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels
            .iter()
            .map(|l| l.a.nrows())
            .chain([self.coarsest_dim])
            .collect()
    }

    /// Sum of nonzeros over all level operators divided by the fine nonzeros.
    /// Jacobi weight used on each smoothed level.
    pub fn level_weights(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.omega).collect()
    }

    pub fn operator_complexity(&self) -> f64 {
        self.total_nnz as f64 / self.fine_nnz.max(1) as f64
    }

    pub fn dim(&self) -> usize {
        self.levels.first().map_or(self.coarsest_dim, |l| l.a.nrows())
    }

    /// One V(1,1)-cycle with zero initial guess.
    pub fn vcycle(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        self.cycle(0, r, &mut z);
        z
    }

    fn coarse_solve(&self, b: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(b);
        let x = match &self.coarsest {
            CoarseSolver::Cholesky(c) => c.solve(&v),
            CoarseSolver::Lu(lu) => lu.solve(&v).expect("invertible at setup"),
        };
        x.as_slice().to_vec()
    }

    fn cycle(&self, lvl: usize, b: &[f64], x: &mut [f64]) {
        if lvl == self.levels.len() {
            x.copy_from_slice(&self.coarse_solve(b));
            return;
        }
        let l = &self.levels[lvl];
        let n = b.len();
        let w = l.omega;
        // Pre-smoothing from x = 0.
        for i in 0..n {
            x[i] = w * l.inv_diag[i] * b[i];
        }
        let mut res = vec![0.0; n];
        l.a.spmv_into(x, &mut res);
        for i in 0..n {
            res[i] = b[i] - res[i];
        }
        let mut bc = vec![0.0; l.p.ncols()];
        l.r.spmv_into(&res, &mut bc);
        let mut xc = vec![0.0; bc.len()];
        self.cycle(lvl + 1, &bc, &mut xc);
        l.p.spmv_add(1.0, &xc, x);
        // Post-smoothing.
        l.a.spmv_into(x, &mut res);
        for i in 0..n {
            x[i] += w * l.inv_diag[i] * (b[i] - res[i]);
        }
    }
}

impl LinearOperator for AmgHierarchy {
    fn dim(&self) -> usize {
        AmgHierarchy::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.vcycle(x));
    }
}

/// Power-iteration estimate of `ρ(D⁻¹A)` from a fixed start vector.
fn jacobi_spectral_radius(a: &CsrMatrix, inv_diag: &[f64]) -> f64 {
    let n = a.nrows();
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i.wrapping_mul(2654435761) % 1000) as f64) / 1000.0)
        .collect();
    let mut y = vec![0.0; n];
    let mut rho = 0.0;
    for _ in 0..20 {
        let nx = crate::sparsela::norm2(&x);
        if nx == 0.0 {
            break;
        }
        a.spmv_into(&x, &mut y);
        for (yi, d) in y.iter_mut().zip(inv_diag) {
            *yi *= d;
        }
        let ny = crate::sparsela::norm2(&y);
        rho = ny / nx;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    rho
}
