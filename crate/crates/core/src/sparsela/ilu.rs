use super::{CsrMatrix, SparseError};

/// ILU(0): unit lower `L` and upper `U` stored together on the pattern of `A`.
#[derive(Debug, Clone)]
pub struct IluFactorization {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl IluFactorization {
    pub fn new(a: &CsrMatrix) -> Result<Self, SparseError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let indptr = a.indptr();
        let indices = a.indices();
        let mut vals = a.data().to_vec();
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            let cols = &indices[indptr[i]..indptr[i + 1]];
            match cols.binary_search(&i) {
                Ok(k) if vals[indptr[i] + k] != 0.0 => diag_pos.push(indptr[i] + k),
                _ => return Err(SparseError::ZeroPivot(i)),
            }
        }
        // Position of column j within the current row, or usize::MAX.
        let mut where_col = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (indptr[i], indptr[i + 1]);
            for p in start..end {
                where_col[indices[p]] = p;
            }
            for p in start..diag_pos[i] {
                let k = indices[p];
                let pivot = vals[diag_pos[k]];
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in diag_pos[k] + 1..indptr[k + 1] {
                    let w = where_col[indices[q]];
                    if w != usize::MAX {
                        vals[w] -= lik * vals[q];
                    }
                }
            }
            let d = vals[diag_pos[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(SparseError::ZeroPivot(i));
            }
            for p in start..end {
                where_col[indices[p]] = usize::MAX;
            }
        }
        let lu = CsrMatrix::from_parts_unchecked(
            n,
            n,
            indptr.to_vec(),
            indices.to_vec(),
            vals,
        );
        Ok(Self { lu, diag_pos })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Combined `L\U` factors on the pattern of the input.
    pub fn factors(&self) -> &CsrMatrix {
        &self.lu
    }

    /// Solves `L U x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let indptr = self.lu.indptr();
        let indices = self.lu.indices();
        let vals = self.lu.data();
        for i in 0..n {
            let mut s = x[i];
            for p in indptr[i]..self.diag_pos[i] {
                s -= vals[p] * x[indices[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag_pos[i] + 1..indptr[i + 1] {
                s -= vals[p] * x[indices[p]];
            }
            x[i] = s / vals[self.diag_pos[i]];
        }
    }
}
