use super::{CsrMatrix, SparseError};

/// Row-major 2×2 block `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Block2(pub [f64; 4]);

impl Block2 {
    pub const ZERO: Block2 = Block2([0.0; 4]);
    pub const IDENTITY: Block2 = Block2([1.0, 0.0, 0.0, 1.0]);

    pub fn scaled_identity(s: f64) -> Self {
        Block2([s, 0.0, 0.0, s])
    }

    pub fn transpose(&self) -> Self {
        let [a, b, c, d] = self.0;
        Block2([a, c, b, d])
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d] = self.0;
        a * d - b * c
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Inverse, or `None` when the block is numerically singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        let scale = self.max_abs();
        if scale == 0.0 || !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
            return None;
        }
        let [a, b, c, d] = self.0;
        Some(Block2([d / det, -b / det, -c / det, a / det]))
    }

    pub fn mul(&self, o: &Block2) -> Block2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        Block2([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }

    pub fn sub(&self, o: &Block2) -> Block2 {
        let mut r = self.0;
        for (x, y) in r.iter_mut().zip(o.0) {
            *x -= y;
        }
        Block2(r)
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let [a, b, c, d] = self.0;
        [a * x[0] + b * x[1], c * x[0] + d * x[1]]
    }
}

#[derive(Debug, Clone)]
struct ThomasFactors {
    pivot_inv: Vec<Block2>,
    upper_mod: Vec<Block2>,
    lower: Vec<Block2>,
}

impl ThomasFactors {
    fn new(lower: &[Block2], diag: &[Block2], upper: &[Block2]) -> Result<Self, SparseError> {
        let n = diag.len();
        let mut pivot_inv = Vec::with_capacity(n);
        let mut upper_mod = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let w = if i == 0 {
                diag[0]
            } else {
                diag[i].sub(&lower[i - 1].mul(&upper_mod[i - 1]))
            };
            let winv = w.inverse().ok_or(SparseError::SingularPivot(i))?;
            if i + 1 < n {
                upper_mod.push(winv.mul(&upper[i]));
            }
            pivot_inv.push(winv);
        }
        Ok(Self {
            pivot_inv,
            upper_mod,
            lower: lower.to_vec(),
        })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivot_inv.len();
        let mut y = vec![[0.0; 2]; n];
        for i in 0..n {
            let mut r = [rhs[2 * i], rhs[2 * i + 1]];
            if i > 0 {
                let l = self.lower[i - 1].apply(y[i - 1]);
                r[0] -= l[0];
                r[1] -= l[1];
            }
            y[i] = self.pivot_inv[i].apply(r);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let c = self.upper_mod[i].apply(y[i + 1]);
            y[i][0] -= c[0];
            y[i][1] -= c[1];
        }
        y.into_iter().flatten().collect()
    }
}

/// Block tridiagonal matrix with 2×2 blocks, pre-factored for block Thomas
/// solves with the matrix and with its transpose.
///
/// Block row `i` holds `lower[i-1]` at block column `i-1`, `diag[i]` at `i`
/// and `upper[i]` at `i+1`.
#[derive(Debug, Clone)]
pub struct BlockTriDiagMatrix {
    lower: Vec<Block2>,
    diag: Vec<Block2>,
    upper: Vec<Block2>,
    factors: ThomasFactors,
    factors_t: ThomasFactors,
}

impl BlockTriDiagMatrix {
    pub fn new(
        lower: Vec<Block2>,
        diag: Vec<Block2>,
        upper: Vec<Block2>,
    ) -> Result<Self, SparseError> {
        let n = diag.len();
        let off = n.saturating_sub(1);
        if lower.len() != off || upper.len() != off {
            return Err(SparseError::DimensionMismatch {
                expected: off,
                found: lower.len().max(upper.len()),
            });
        }
        let factors = ThomasFactors::new(&lower, &diag, &upper)?;
        let lt: Vec<Block2> = upper.iter().map(Block2::transpose).collect();
        let dt: Vec<Block2> = diag.iter().map(Block2::transpose).collect();
        let ut: Vec<Block2> = lower.iter().map(Block2::transpose).collect();
        let factors_t = ThomasFactors::new(&lt, &dt, &ut)?;
        Ok(Self {
            lower,
            diag,
            upper,
            factors,
            factors_t,
        })
    }

    /// Reads the block tridiagonal structure out of a CSR matrix whose
    /// dimension is even. Returns `None` when any entry lies outside the
    /// block tridiagonal band.
    pub fn from_csr(a: &CsrMatrix) -> Option<Result<Self, SparseError>> {
        let (nr, nc) = a.shape();
        if nr != nc || nr % 2 != 0 {
            return None;
        }
        let n = nr / 2;
        let mut lower = vec![Block2::ZERO; n.saturating_sub(1)];
        let mut diag = vec![Block2::ZERO; n];
        let mut upper = vec![Block2::ZERO; n.saturating_sub(1)];
        for (i, j, v) in a.triplets() {
            let (bi, bj) = (i / 2, j / 2);
            let slot = (i % 2) * 2 + j % 2;
            if bj == bi {
                diag[bi].0[slot] = v;
            } else if bj + 1 == bi {
                lower[bj].0[slot] = v;
            } else if bj == bi + 1 {
                upper[bi].0[slot] = v;
            } else {
                return None;
            }
        }
        Some(Self::new(lower, diag, upper))
    }

    pub fn block_count(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.diag.len()
    }

    pub fn diag(&self) -> &[Block2] {
        &self.diag
    }

    pub fn lower(&self) -> &[Block2] {
        &self.lower
    }

    pub fn upper(&self) -> &[Block2] {
        &self.upper
    }

    /// Largest `|lower_i − upper_iᵀ|` entry, plus diagonal block asymmetry.
    pub fn asymmetry(&self) -> f64 {
        let off = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l.sub(&u.transpose()).max_abs());
        let dia = self.diag.iter().map(|d| d.sub(&d.transpose()).max_abs());
        off.chain(dia).fold(0.0, f64::max)
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check_len(x)?;
        let n = self.diag.len();
        let xb = |i: usize| [x[2 * i], x[2 * i + 1]];
        let mut y = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut r = self.diag[i].apply(xb(i));
            if i > 0 {
                let l = self.lower[i - 1].apply(xb(i - 1));
                r[0] += l[0];
                r[1] += l[1];
            }
            if i + 1 < n {
                let u = self.upper[i].apply(xb(i + 1));
                r[0] += u[0];
                r[1] += u[1];
            }
            y.extend_from_slice(&r);
        }
        Ok(y)
    }

    /// Block Thomas solve of `D̃ x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check_len(rhs)?;
        Ok(self.factors.solve(rhs))
    }

    /// Block Thomas solve of `D̃ᵀ x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check_len(rhs)?;
        Ok(self.factors_t.solve(rhs))
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.diag.len();
        let mut t = Vec::with_capacity(12 * n);
        let mut push = |bi: usize, bj: usize, b: &Block2| {
            for (s, &v) in b.0.iter().enumerate() {
                t.push((2 * bi + s / 2, 2 * bj + s % 2, v));
            }
        };
        for i in 0..n {
            if i > 0 {
                push(i, i - 1, &self.lower[i - 1]);
            }
            push(i, i, &self.diag[i]);
            if i + 1 < n {
                push(i, i + 1, &self.upper[i]);
            }
        }
        CsrMatrix::from_triplets(2 * n, 2 * n, &t).expect("indices in range")
    }

    fn check_len(&self, x: &[f64]) -> Result<(), SparseError> {
        if x.len() != self.dim() {
            return Err(SparseError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Free-function form of [`BlockTriDiagMatrix::solve`].
pub fn block_thomas_solve(dt: &BlockTriDiagMatrix, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
    dt.solve(rhs)
}
