use std::collections::VecDeque;

use super::{CsrMatrix, Permutation, SparseError};

/// Envelope (skyline) Cholesky factorization `PAPᵀ = LLᵀ` with a reverse
/// Cuthill–McKee ordering `P`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    perm: Permutation,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors a symmetric positive definite matrix. Only the lower triangle
    /// of `a` is read.
    pub fn new(a: &CsrMatrix) -> Result<Self, SparseError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let perm = reverse_cuthill_mckee(a);
        let inv = perm.inverse();
        let inv = inv.as_slice();

        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in a.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            if pj < pi {
                first[pi] = first[pi].min(pj);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; offsets[n]];
        for (i, j, v) in a.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            if pj <= pi {
                values[offsets[pi] + pj - first[pi]] = v;
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[offsets[i] + j - fi];
                let ri = offsets[i] + k0 - fi;
                let rj = offsets[j] + k0 - fj;
                let len = j - k0;
                for t in 0..len {
                    s -= values[ri + t] * values[rj + t];
                }
                if j < i {
                    values[offsets[i] + j - fi] = s / values[offsets[j + 1] - 1];
                } else {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(SparseError::NotPositiveDefinite {
                            row: perm.as_slice()[i],
                            pivot: s,
                        });
                    }
                    values[offsets[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            perm,
            first,
            offsets,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored entries in the factor envelope.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        let mut y = self.perm.apply(rhs);
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            let mut s = y[i];
            for (t, &l) in row[..i - fi].iter().enumerate() {
                s -= l * y[fi + t];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (t, &l) in row[..i - fi].iter().enumerate() {
                y[fi + t] -= l * yi;
            }
        }
        Ok(self.perm.apply_inverse(&y))
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `a`, returned
/// as a new → old map. Each connected component starts from a
/// pseudo-peripheral node.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Permutation {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    let bfs_last = |start: usize, level: &mut Vec<usize>| -> (usize, usize) {
        let mut touched = vec![start];
        level[start] = 0;
        let mut q = VecDeque::from([start]);
        let mut last = start;
        while let Some(u) = q.pop_front() {
            last = u;
            for &v in &adj[u] {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    touched.push(v);
                    q.push_back(v);
                }
            }
        }
        let depth = level[last];
        // Among nodes of the last level pick the minimum degree.
        let far = touched
            .iter()
            .copied()
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(start);
        for &v in &touched {
            level[v] = usize::MAX;
        }
        (far, depth)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let mut root = seed;
        let (mut far, mut depth) = bfs_last(root, &mut level);
        for _ in 0..8 {
            let (f2, d2) = bfs_last(far, &mut level);
            if d2 <= depth {
                break;
            }
            root = far;
            far = f2;
            depth = d2;
        }
        let mut q = VecDeque::from([root]);
        visited[root] = true;
        let mut nbrs = Vec::new();
        while let Some(u) = q.pop_front() {
            order.push(u);
            nbrs.clear();
            nbrs.extend(adj[u].iter().copied().filter(|&v| !visited[v]));
            nbrs.sort_unstable_by_key(|&v| (degree[v], v));
            for &v in &nbrs {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    Permutation::from_vec(order).expect("RCM visits every node once")
}
