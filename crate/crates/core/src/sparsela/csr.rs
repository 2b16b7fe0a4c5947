use std::ops::Range;

use super::SparseError;

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structure.
    pub fn new(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if indptr.len() != nrows + 1 {
            return Err(SparseError::DimensionMismatch {
                expected: nrows + 1,
                found: indptr.len(),
            });
        }
        if indices.len() != data.len() || indptr[nrows] != indices.len() || indptr[0] != 0 {
            return Err(SparseError::DimensionMismatch {
                expected: indices.len(),
                found: data.len(),
            });
        }
        for i in 0..nrows {
            if indptr[i] > indptr[i + 1] {
                return Err(SparseError::DimensionMismatch {
                    expected: indptr[i],
                    found: indptr[i + 1],
                });
            }
            let cols = &indices[indptr[i]..indptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(SparseError::IndexOutOfBounds { index: c, dim: ncols });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(SparseError::DimensionMismatch {
                        expected: cols[k - 1] + 1,
                        found: c,
                    });
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(indptr.len(), nrows + 1);
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Sums duplicate entries and drops entries whose sum is exactly zero.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows {
                return Err(SparseError::IndexOutOfBounds { index: i, dim: nrows });
            }
            if j >= ncols {
                return Err(SparseError::IndexOutOfBounds { index: j, dim: ncols });
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            let range = counts[i]..counts[i + 1];
            order.clear();
            order.extend(range.clone());
            order.sort_by_key(|&k| cols[k]);
            let mut k = 0;
            while k < order.len() {
                let c = cols[order[k]];
                let mut sum = 0.0;
                while k < order.len() && cols[order[k]] == c {
                    sum += vals[order[k]];
                    k += 1;
                }
                if sum != 0.0 {
                    indices.push(c);
                    data.push(sum);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
        }
    }

    /// Row-major dense input; exact zeros are not stored.
    pub fn from_dense(nrows: usize, ncols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), nrows * ncols);
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = values[i * ncols + j];
                if v != 0.0 {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.ncols {
            return Err(SparseError::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x`. Panics on dimension mismatch.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "spmv: x has wrong length");
        assert_eq!(y.len(), self.nrows, "spmv: y has wrong length");
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.indptr[i]..self.indptr[i + 1];
            let mut s = 0.0;
            for (&j, &v) in self.indices[r.clone()].iter().zip(&self.data[r]) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    /// `y += alpha * A x`.
    pub fn spmv_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "spmv: x has wrong length");
        assert_eq!(y.len(), self.nrows, "spmv: y has wrong length");
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.indptr[i]..self.indptr[i + 1];
            let mut s = 0.0;
            for (&j, &v) in self.indices[r.clone()].iter().zip(&self.data[r]) {
                s += v * x[j];
            }
            *yi += alpha * s;
        }
    }

    /// `y = Aᵀ x` without forming the transpose.
    pub fn spmv_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[next[j]] = i;
                data[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            data,
        }
    }

    /// Exact sparse product `A B`. Structural entries are kept even when they
    /// cancel numerically.
    pub fn spgemm(&self, other: &CsrMatrix) -> Result<Self, SparseError> {
        if self.ncols != other.nrows {
            return Err(SparseError::DimensionMismatch {
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let n = other.ncols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![0.0; n];
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut row_cols: Vec<usize> = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            row_cols.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = a * b;
                        row_cols.push(j);
                    } else {
                        acc[j] += a * b;
                    }
                }
            }
            row_cols.sort_unstable();
            for &j in &row_cols {
                indices.push(j);
                data.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: n,
            indptr,
            indices,
            data,
        })
    }

    /// `alpha * A + beta * B` on the union pattern.
    pub fn add(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Result<Self, SparseError> {
        if self.shape() != other.shape() {
            return Err(SparseError::DimensionMismatch {
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                if q >= bc.len() || (p < ac.len() && ac[p] < bc[q]) {
                    indices.push(ac[p]);
                    data.push(alpha * av[p]);
                    p += 1;
                } else if p >= ac.len() || bc[q] < ac[p] {
                    indices.push(bc[q]);
                    data.push(beta * bv[q]);
                    q += 1;
                } else {
                    indices.push(ac[p]);
                    data.push(alpha * av[p] + beta * bv[q]);
                    p += 1;
                    q += 1;
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `diag(left) * A * diag(right)`; either side may be omitted.
    pub fn scale_rows_cols(&self, left: Option<&[f64]>, right: Option<&[f64]>) -> Self {
        let mut out = self.clone();
        for i in 0..self.nrows {
            let l = left.map_or(1.0, |l| l[i]);
            for k in self.indptr[i]..self.indptr[i + 1] {
                let r = right.map_or(1.0, |r| r[self.indices[k]]);
                out.data[k] *= l * r;
            }
        }
        out
    }

    /// Keeps an entry iff `|a_ij| > eps`.
    pub fn drop(&self, eps: f64) -> Self {
        assert!(eps >= 0.0, "drop tolerance must be non-negative");
        self.filter(|_, _, v| v.abs() > eps)
    }

    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Self {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if keep(i, j, v) {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        assert!(rows.end <= self.nrows && cols.end <= self.ncols);
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for i in rows.clone() {
            let (c, v) = self.row(i);
            let lo = c.partition_point(|&j| j < cols.start);
            let hi = c.partition_point(|&j| j < cols.end);
            for k in lo..hi {
                indices.push(c[k] - cols.start);
                data.push(v[k]);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: rows.len(),
            ncols: cols.len(),
            indptr,
            indices,
            data,
        }
    }

    /// Assembles a block matrix. `None` blocks are zero; every block row must
    /// contain at least one `Some` to fix its height, and likewise for columns.
    pub fn from_blocks(blocks: &[Vec<Option<&CsrMatrix>>]) -> Result<Self, SparseError> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, |r| r.len());
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (bi, row) in blocks.iter().enumerate() {
            if row.len() != nbc {
                return Err(SparseError::DimensionMismatch {
                    expected: nbc,
                    found: row.len(),
                });
            }
            for (bj, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, val) in [(&mut heights[bi], m.nrows), (&mut widths[bj], m.ncols)] {
                        match slot {
                            None => *slot = Some(val),
                            Some(v) if *v != val => {
                                return Err(SparseError::DimensionMismatch {
                                    expected: *v,
                                    found: val,
                                })
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights.into_iter().map(|h| h.unwrap_or(0)).collect();
        let widths: Vec<usize> = widths.into_iter().map(|w| w.unwrap_or(0)).collect();
        let mut col_off = vec![0usize; nbc + 1];
        for j in 0..nbc {
            col_off[j + 1] = col_off[j] + widths[j];
        }
        let nrows: usize = heights.iter().sum();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for (bi, row) in blocks.iter().enumerate() {
            for i in 0..heights[bi] {
                for (bj, b) in row.iter().enumerate() {
                    if let Some(m) = b {
                        let (c, v) = m.row(i);
                        indices.extend(c.iter().map(|&j| j + col_off[bj]));
                        data.extend_from_slice(v);
                    }
                }
                indptr.push(indices.len());
            }
        }
        Ok(Self {
            nrows,
            ncols: col_off[nbc],
            indptr,
            indices,
            data,
        })
    }

    /// Kronecker product with the `b × b` identity: each scalar entry becomes
    /// an identity-scaled block, with interleaved component ordering.
    pub fn kron_identity(&self, b: usize) -> Self {
        let mut indptr = Vec::with_capacity(self.nrows * b + 1);
        let mut indices = Vec::with_capacity(self.nnz() * b);
        let mut data = Vec::with_capacity(self.nnz() * b);
        indptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for c in 0..b {
                for (&j, &v) in cols.iter().zip(vals) {
                    indices.push(j * b + c);
                    data.push(v);
                }
                indptr.push(indices.len());
            }
        }
        Self {
            nrows: self.nrows * b,
            ncols: self.ncols * b,
            indptr,
            indices,
            data,
        }
    }

    /// `B[i][j] = A[row_perm[i]][col_perm[j]]`; both maps are new → old.
    pub fn permute(&self, row_perm: &Permutation, col_perm: &Permutation) -> Self {
        assert_eq!(row_perm.len(), self.nrows);
        assert_eq!(col_perm.len(), self.ncols);
        let col_inv = col_perm.inverse();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz());
        let mut data = Vec::with_capacity(self.nnz());
        let mut entries: Vec<(usize, f64)> = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            entries.clear();
            let (c, v) = self.row(row_perm.as_slice()[i]);
            entries.extend(c.iter().zip(v).map(|(&j, &x)| (col_inv.as_slice()[j], x)));
            entries.sort_unstable_by_key(|e| e.0);
            for &(j, x) in &entries {
                indices.push(j);
                data.push(x);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for (i, j, v) in self.triplets() {
            out[i * self.ncols + j] = v;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖A − Aᵀ‖_F`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.add(1.0, &self.transpose(), -1.0)
            .map(|d| d.frobenius_norm())
            .unwrap_or(f64::INFINITY)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrize(&self) -> Result<Self, SparseError> {
        self.add(0.5, &self.transpose(), 0.5)
    }

    pub fn avg_nnz_per_row(&self) -> f64 {
        if self.nrows == 0 {
            0.0
        } else {
            self.nnz() as f64 / self.nrows as f64
        }
    }
}

/// A permutation stored as a new → old index map: `(T x)[i] = x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn from_vec(perm: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return None;
            }
            seen[p] = true;
        }
        Some(Self { perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        Self { perm: inv }
    }

    /// `T x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&p| x[p]).collect()
    }

    /// `T⁻¹ x`
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = x[i];
        }
        y
    }

    /// Expands a node-level permutation to `b` interleaved components per node.
    pub fn expand(&self, b: usize) -> Self {
        Self {
            perm: self
                .perm
                .iter()
                .flat_map(|&p| (0..b).map(move |c| p * b + c))
                .collect(),
        }
    }
}

/// Runs `sweeps` Jacobi iterations `x ← x + diag(A)⁻¹ (b − A x)` from `x0`.
pub fn jacobi_sweep(
    a: &CsrMatrix,
    x0: &[f64],
    b: &[f64],
    sweeps: usize,
) -> Result<Vec<f64>, SparseError> {
    let n = a.nrows();
    if a.ncols() != n || x0.len() != n || b.len() != n {
        return Err(SparseError::DimensionMismatch {
            expected: n,
            found: x0.len().min(b.len()),
        });
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| d == 0.0) {
        return Err(SparseError::ZeroDiagonal(i));
    }
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    for _ in 0..sweeps {
        a.spmv_into(&x, &mut ax);
        for i in 0..n {
            x[i] += (b[i] - ax[i]) / diag[i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut c = vec![0.0; n * m];
        for i in 0..n {
            for l in 0..k {
                for j in 0..m {
                    c[i * m + j] += a[i * k + l] * b[l * m + j];
                }
            }
        }
        c
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_sparse(n: usize, m: usize, seed: &mut u64) -> Vec<f64> {
        (0..n * m)
            .map(|_| {
                let v = lcg(seed);
                if v.abs() < 0.4 {
                    0.0
                } else {
                    v
                }
            })
            .collect()
    }

    #[test]
    fn spmv_identity_and_zero() {
        let i = CsrMatrix::identity(4);
        let x = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(i.spmv(&x).unwrap(), x);
        let a = CsrMatrix::from_dense(2, 4, &[1.0, 0.0, 2.0, 0.0, 0.0, 3.0, 0.0, 4.0]);
        assert_eq!(a.spmv(&[0.0; 4]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            a.spmv(&[1.0; 3]),
            Err(SparseError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spmv_matches_dense_multiply() {
        let mut seed = 7;
        let d = random_sparse(5, 5, &mut seed);
        let a = CsrMatrix::from_dense(5, 5, &d);
        let x: Vec<f64> = (0..5).map(|_| lcg(&mut seed)).collect();
        let expect = dense_mul(&d, &x, 5, 5, 1);
        for (y, e) in a.spmv(&x).unwrap().iter().zip(&expect) {
            assert!((y - e).abs() <= 1e-14);
        }
    }

    #[test]
    fn spgemm_matches_dense_product() {
        let mut seed = 11;
        let da = random_sparse(6, 4, &mut seed);
        let db = random_sparse(4, 7, &mut seed);
        let c = CsrMatrix::from_dense(6, 4, &da)
            .spgemm(&CsrMatrix::from_dense(4, 7, &db))
            .unwrap();
        let expect = dense_mul(&da, &db, 6, 4, 7);
        for (v, e) in c.to_dense().iter().zip(&expect) {
            assert!((v - e).abs() <= 1e-14);
        }
    }

    #[test]
    fn spgemm_identity_and_permutations() {
        let mut seed = 3;
        let a = CsrMatrix::from_dense(4, 4, &random_sparse(4, 4, &mut seed));
        assert_eq!(a.spgemm(&CsrMatrix::identity(4)).unwrap(), a);
        let p1 = CsrMatrix::identity(4).permute(
            &Permutation::from_vec(vec![2, 0, 3, 1]).unwrap(),
            &Permutation::identity(4),
        );
        let p2 = CsrMatrix::identity(4).permute(
            &Permutation::from_vec(vec![1, 3, 0, 2]).unwrap(),
            &Permutation::identity(4),
        );
        let p = p1.spgemm(&p2).unwrap();
        for i in 0..4 {
            let (c, v) = p.row(i);
            assert_eq!(c.len(), 1);
            assert_eq!(v[0], 1.0);
        }
        assert_eq!(p.transpose().spgemm(&p).unwrap(), CsrMatrix::identity(4));
        assert!(a.spgemm(&CsrMatrix::identity(3)).is_err());
    }

    #[test]
    fn spgemm_keeps_cancelled_entries() {
        let a = CsrMatrix::from_dense(1, 2, &[1.0, 1.0]);
        let b = CsrMatrix::from_dense(2, 1, &[1.0, -1.0]);
        let c = a.spgemm(&b).unwrap();
        assert_eq!(c.nnz(), 1);
        assert_eq!(c.get(0, 0), 0.0);
    }

    #[test]
    fn drop_threshold_definition() {
        let a = CsrMatrix::from_dense(2, 2, &[1e-12, 2.0, 0.5, 1e-11]);
        let d = a.drop(1e-10);
        assert_eq!(d.to_dense(), vec![0.0, 2.0, 0.5, 0.0]);
        assert_eq!(d.nnz(), 2);
        assert_eq!(a.drop(0.0), a);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let a = CsrMatrix::from_triplets(
            2,
            3,
            &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, 1.0), (1, 1, -1.0)],
        )
        .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 2), 4.0);
        assert_eq!(a.row(1).0.len(), 0);
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn from_blocks_and_submatrix_roundtrip() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = CsrMatrix::from_dense(2, 1, &[5.0, 6.0]);
        let c = CsrMatrix::from_dense(1, 2, &[7.0, 8.0]);
        let full = CsrMatrix::from_blocks(&[vec![Some(&a), Some(&b)], vec![Some(&c), None]]).unwrap();
        assert_eq!(full.shape(), (3, 3));
        assert_eq!(
            full.to_dense(),
            vec![1.0, 2.0, 5.0, 3.0, 4.0, 6.0, 7.0, 8.0, 0.0]
        );
        assert_eq!(full.submatrix(0..2, 2..3), b);
        assert_eq!(full.submatrix(2..3, 0..2), c);
    }

    #[test]
    fn kron_identity_interleaves() {
        let a = CsrMatrix::from_dense(1, 2, &[2.0, 3.0]);
        let k = a.kron_identity(2);
        assert_eq!(k.to_dense(), vec![2.0, 0.0, 3.0, 0.0, 0.0, 2.0, 0.0, 3.0]);
    }

    #[test]
    fn jacobi_definition() {
        let a = CsrMatrix::from_dense(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let b = vec![1.0, 1.0];
        let x = jacobi_sweep(&a, &[0.0, 0.0], &b, 1).unwrap();
        assert_eq!(x, vec![0.25, 0.5]);
        let exact = vec![1.0 / 7.0, 3.0 / 7.0];
        let bx = a.spmv(&exact).unwrap();
        let y = jacobi_sweep(&a, &exact, &bx, 3).unwrap();
        assert_eq!(y, exact);
        let z = CsrMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert_eq!(jacobi_sweep(&z, &[0.0; 2], &b, 1), Err(SparseError::ZeroDiagonal(1)));
    }

    #[test]
    fn permutation_roundtrip() {
        let p = Permutation::from_vec(vec![2, 0, 1]).unwrap();
        let x = vec![10.0, 20.0, 30.0];
        assert_eq!(p.apply(&x), vec![30.0, 10.0, 20.0]);
        assert_eq!(p.apply_inverse(&p.apply(&x)), x);
        assert!(Permutation::from_vec(vec![0, 0]).is_none());
        assert_eq!(p.expand(2).as_slice(), &[4, 5, 0, 1, 2, 3]);
    }
}
