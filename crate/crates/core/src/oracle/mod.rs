//! Dense reference implementation of the two-level operators for small
//! instances.
//!
//! Everything here is built from the generic block formulas of the C/F
//! splitting (`A_FF⁻¹` by dense LU, `P̂ = [I; −A_FF⁻¹A_FC]`, ...), never from the
//! mortar-specific shortcuts used by [`crate::twolevel`], so the two can be
//! checked against each other.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::sparsela::CsrMatrix;

mod dd;
pub use dd::{Dd, DdMat};
use crate::system::{CfSplit, SaddleSystem};

/// Largest system the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance has {0} unknowns, oracle limit is {MAX_ORACLE_DIM}")]
    TooLarge(usize),
    #[error("dense {0} is singular")]
    Singular(&'static str),
    #[error("dense eigensolver did not converge")]
    NonConvergedEig,
}

pub fn to_dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] += v;
    }
    m
}

fn inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>, OracleError> {
    m.clone().lu().try_inverse().ok_or(OracleError::Singular(what))
}

/// Max-entry norm.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `‖x − y‖_F / max(‖y‖_F, floor)`.
pub fn rel_diff(x: &DMatrix<f64>, y: &DMatrix<f64>, floor: f64) -> f64 {
    (x - y).norm() / y.norm().max(floor)
}

/// Matrix 1-norm (largest absolute column sum).
pub fn norm1_matrix(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn norm1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Dense copies of every block and operator of the two-level method.
pub struct DenseSnapshot {
    pub split: CfSplit,
    pub a: DMatrix<f64>,
    pub acc: DMatrix<f64>,
    pub acf: DMatrix<f64>,
    pub afc: DMatrix<f64>,
    pub aff: DMatrix<f64>,
    pub aff_inv: DMatrix<f64>,
    /// Schur complement `A_CC − A_CF A_FF⁻¹ A_FC`.
    pub s: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub kss: DMatrix<f64>,
    pub p_hat: DMatrix<f64>,
    pub r_hat: DMatrix<f64>,
    pub p_tilde: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub bf_inv: DMatrix<f64>,
    /// Inverse of `[[D_CC, A_CF], [A_FC, A_FF]]`.
    pub bs_inv: DMatrix<f64>,
    pub dcc: DVector<f64>,
    /// `A_FF − A_FC D_CC⁻¹ A_CF`.
    pub s_tilde: DMatrix<f64>,
}

impl DenseSnapshot {
    pub fn new(sys: &SaddleSystem) -> Result<Self, OracleError> {
        let n = sys.dim();
        if n > MAX_ORACLE_DIM {
            return Err(OracleError::TooLarge(n));
        }
        let split = sys.split;
        let (nc, nf) = (split.n_coarse(), split.n_fine());
        let a = to_dense(&sys.a);
        let acc = a.view((0, 0), (nc, nc)).into_owned();
        let acf = a.view((0, nc), (nc, nf)).into_owned();
        let afc = a.view((nc, 0), (nf, nc)).into_owned();
        let aff = a.view((nc, nc), (nf, nf)).into_owned();
        let aff_inv = inverse(&aff, "A_FF")?;
        let s = &acc - &acf * &aff_inv * &afc;

        let mut p_hat = DMatrix::zeros(n, nc);
        p_hat.view_mut((0, 0), (nc, nc)).fill_with_identity();
        p_hat
            .view_mut((nc, 0), (nf, nc))
            .copy_from(&(-(&aff_inv * &afc)));
        let mut r_hat = DMatrix::zeros(nc, n);
        r_hat.view_mut((0, 0), (nc, nc)).fill_with_identity();
        r_hat
            .view_mut((0, nc), (nc, nf))
            .copy_from(&(-(&acf * &aff_inv)));
        let mut p_tilde = p_hat.clone();
        let nl = split.n_lambda;
        p_tilde.view_mut((n - nl, 0), (nl, nc)).fill(0.0);
        let mut q = DMatrix::zeros(n, nf);
        q.view_mut((nc, 0), (nf, nf)).fill_with_identity();
        let bf_inv = &q * &aff_inv * q.transpose();

        let dcc = acc.diagonal();
        if dcc.iter().any(|&v| v == 0.0) {
            return Err(OracleError::Singular("diag(A_CC)"));
        }
        let mut bs = a.clone();
        bs.view_mut((0, 0), (nc, nc)).copy_from(&DMatrix::from_diagonal(&dcc));
        let bs_inv = inverse(&bs, "sSIMPLE operator")?;
        let dcc_inv = DMatrix::from_diagonal(&dcc.map(|v| 1.0 / v));
        let s_tilde = &aff - &afc * dcc_inv * &acf;

        let sr = split.slave();
        let kss = a
            .view((sr.start, sr.start), (sr.len(), sr.len()))
            .into_owned();
        Ok(Self {
            split,
            d: to_dense(&sys.d),
            m: to_dense(&sys.m),
            kss,
            a,
            acc,
            acf,
            afc,
            aff,
            aff_inv,
            s,
            p_hat,
            r_hat,
            p_tilde,
            q,
            bf_inv,
            bs_inv,
            dcc,
            s_tilde,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_coarse(&self) -> usize {
        self.split.n_coarse()
    }

    /// `A_FF⁻¹` from the mortar blocks: `[[0, D⁻¹], [D⁻ᵀ, −D⁻ᵀ K_SS D⁻¹]]`.
    pub fn aff_inv_closed_form(&self) -> Result<DMatrix<f64>, OracleError> {
        let ns = self.split.n_slave;
        let d_inv = inverse(&self.d, "D")?;
        let d_inv_t = d_inv.transpose();
        let mut out = DMatrix::zeros(2 * ns, 2 * ns);
        out.view_mut((0, ns), (ns, ns)).copy_from(&d_inv);
        out.view_mut((ns, 0), (ns, ns)).copy_from(&d_inv_t);
        out.view_mut((ns, ns), (ns, ns))
            .copy_from(&(-(&d_inv_t * &self.kss * &d_inv)));
        Ok(out)
    }

    /// `M⁻¹ = P G_H⁻¹ R + Q A_FF⁻¹ Qᵀ`, the block-LDU two-level preconditioner
    /// for interpolation `p` (`n × n_C`), restriction `r` and coarse solve `g_inv`.
    pub fn two_level_inverse(
        &self,
        p: &DMatrix<f64>,
        r: &DMatrix<f64>,
        g_inv: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        p * g_inv * r + &self.bf_inv
    }

    /// Multiplicative error propagation `(I − P G⁻¹ R 𝒜)(I − B⁻¹𝒜)`.
    pub fn multiplicative_error(
        &self,
        p: &DMatrix<f64>,
        r: &DMatrix<f64>,
        g_inv: &DMatrix<f64>,
        smoother_inv: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let id = DMatrix::identity(self.dim(), self.dim());
        (&id - p * g_inv * r * &self.a) * (&id - smoother_inv * &self.a)
    }

    /// Same factors in the reversed order.
    pub fn multiplicative_error_reversed(
        &self,
        p: &DMatrix<f64>,
        r: &DMatrix<f64>,
        g_inv: &DMatrix<f64>,
        smoother_inv: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let id = DMatrix::identity(self.dim(), self.dim());
        (&id - smoother_inv * &self.a) * (&id - p * g_inv * r * &self.a)
    }

    /// Inverse diagonal of `𝒜` with zero entries replaced by 1.
    pub fn jacobi_inverse(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.a.diagonal().map(|v| if v == 0.0 { 1.0 } else { 1.0 / v }))
    }

    /// One two-level iteration with ideal transfers and exact coarse solve,
    /// starting from a smoothed vector.
    pub fn ideal_step_from(&self, b: &DVector<f64>, x_s: &DVector<f64>) -> Result<DVector<f64>, OracleError> {
        let s_inv = inverse(&self.s, "Schur complement")?;
        let f = b - &self.a * x_s;
        Ok(x_s + &self.p_hat * (s_inv * (&self.r_hat * f)))
    }

    /// Closed-form residual after one exact-coarse ideal iteration:
    /// `[A_CF A_FF⁻¹ r_F; r_F]` with `r_F = b_F − A_FF x_F − A_FC x_C`.
    pub fn predicted_residual(&self, b: &DVector<f64>, x_s: &DVector<f64>) -> DVector<f64> {
        let nc = self.n_coarse();
        let nf = self.split.n_fine();
        let bf = b.rows(nc, nf);
        let (xc, xf) = (x_s.rows(0, nc), x_s.rows(nc, nf));
        let rf = bf - &self.aff * xf - &self.afc * xc;
        let rc = &self.acf * &self.aff_inv * &rf;
        let mut r = DVector::zeros(self.dim());
        r.rows_mut(0, nc).copy_from(&rc);
        r.rows_mut(nc, nf).copy_from(&rf);
        r
    }

    /// Largest entry of `|r_actual − r_predicted|` over the iteration from `x_s`,
    /// relative to `max(‖b‖_∞, 1)`.
    pub fn check_prop_residual_formula(&self, b: &DVector<f64>, x_s: &DVector<f64>) -> Result<f64, OracleError> {
        let x1 = self.ideal_step_from(b, x_s)?;
        let actual = b - &self.a * x1;
        let predicted = self.predicted_residual(b, x_s);
        let scale = b.amax().max((&self.a * x_s).amax()).max(1.0);
        Ok((actual - predicted).amax() / scale)
    }

    /// Max entry of both orderings of the ideal/B_F error propagation with an
    /// exact coarse solve (zero for a direct method).
    pub fn check_direct_method(&self) -> Result<(f64, f64), OracleError> {
        self.direct_method_with(&self.bf_inv)
    }

    /// As [`Self::check_direct_method`] with an arbitrary smoother.
    pub fn direct_method_with(&self, smoother_inv: &DMatrix<f64>) -> Result<(f64, f64), OracleError> {
        let ah = &self.r_hat * &self.a * &self.p_hat;
        let ah_inv = inverse(&ah, "R̂𝒜P̂")?;
        let e1 = self.multiplicative_error(&self.p_hat, &self.r_hat, &ah_inv, smoother_inv);
        let e2 = self.multiplicative_error_reversed(&self.p_hat, &self.r_hat, &ah_inv, smoother_inv);
        Ok((max_abs(&e1), max_abs(&e2)))
    }

    /// Dense sSIMPLE output with the inner system solved up to a prescribed
    /// residual `r_S̃` (exact when `inner_residual` is zero).
    pub fn ssimple_with_inner_residual(
        &self,
        b: &DVector<f64>,
        inner_residual: &DVector<f64>,
    ) -> Result<DVector<f64>, OracleError> {
        let nc = self.n_coarse();
        let nf = self.split.n_fine();
        let p = b.rows(0, nc).component_div(&self.dcc);
        let rhs = b.rows(nc, nf) - &self.afc * &p;
        let q = self
            .s_tilde
            .clone()
            .lu()
            .solve(&(rhs - inner_residual))
            .ok_or(OracleError::Singular("S̃"))?;
        let xc = p - (&self.acf * &q).component_div(&self.dcc);
        let mut x = DVector::zeros(self.dim());
        x.rows_mut(0, nc).copy_from(&xc);
        x.rows_mut(nc, nf).copy_from(&q);
        Ok(x)
    }

    /// F-only smoothed vector with `‖b_F − A_FF x_F‖` equal to `inner_residual`.
    pub fn f_relaxation_with_inner_residual(&self, b: &DVector<f64>, inner_residual: &DVector<f64>) -> DVector<f64> {
        let nc = self.n_coarse();
        let nf = self.split.n_fine();
        let xf = &self.aff_inv * (b.rows(nc, nf) - inner_residual);
        let mut x = DVector::zeros(self.dim());
        x.rows_mut(nc, nf).copy_from(&xf);
        x
    }

    /// `1 + ‖A_CF A_FF⁻¹‖₁`.
    pub fn residual_bound_constant(&self) -> f64 {
        1.0 + norm1_matrix(&(&self.acf * &self.aff_inv))
    }

    /// Runs one exact-coarse ideal iteration from `x_s` and returns
    /// `(‖r‖₁, (1 + ‖A_CF A_FF⁻¹‖₁)·δ)` with `δ = ‖inner residual‖₁`.
    pub fn residual_bound(&self, b: &DVector<f64>, x_s: &DVector<f64>, delta: f64) -> Result<(f64, f64), OracleError> {
        let x1 = self.ideal_step_from(b, x_s)?;
        let r = b - &self.a * x1;
        Ok((norm1(&r), self.residual_bound_constant() * delta))
    }
}

/// Coarse solver model for the spectrum check.
#[derive(Debug, Clone)]
pub enum CoarseModel {
    /// `G_H = S`.
    Exact,
    /// `G_H = diag(S)`.
    Diagonal,
    /// A fixed linear operator given by its dense matrix `G_H⁻¹`.
    Inverse(DMatrix<f64>),
}

impl DenseSnapshot {
    /// Compares `σ(M⁻¹𝒜)` with `{1}^{|F|} ∪ σ(G_H⁻¹S)` for the ideal (`P̂`, `R̂`)
    /// and simplified (`P̃`, `R̂`) constructions, with `M⁻¹ = P G_H⁻¹ R̂ + Q A_FF⁻¹ Qᵀ`.
    /// Returns the two matching distances.
    ///
    /// Every inverse, product and eigenvalue is evaluated in double-double
    /// arithmetic from the `f64` entries of `𝒜` (and of `G_H⁻¹` when given). With
    /// simplified interpolation and an exact coarse solve the eigenvalue 1 is
    /// defective, and double precision alone perturbs it by `O(√ε)`.
    pub fn check_spectrum_theorems(&self, coarse: &CoarseModel) -> Result<(f64, f64), OracleError> {
        let dd = self.dd_parts(coarse)?;
        let mut expected = dd
            .g_inv
            .matmul(&dd.s)
            .eigenvalues()
            .ok_or(OracleError::NonConvergedEig)?;
        expected.extend(std::iter::repeat_n(Complex::new(1.0, 0.0), self.split.n_fine()));
        let mut out = [0.0; 2];
        for (k, p) in [&dd.p_hat, &dd.p_tilde].into_iter().enumerate() {
            let actual = dd
                .two_level_inverse(p)
                .matmul(&dd.a)
                .eigenvalues()
                .ok_or(OracleError::NonConvergedEig)?;
            out[k] = spectrum_distance(&actual, &expected);
        }
        Ok((out[0], out[1]))
    }

    /// Lemma-1 deviations in double-double: for `P̂` and `P̃`, the largest
    /// entry of `(I − M⁻¹𝒜) − (I − P G⁻¹ R̂ 𝒜)(I − B_F⁻¹𝒜)` and of the same
    /// with the factors reversed, relative to `max(‖I − M⁻¹𝒜‖_max, 1)`.
    pub fn check_additive_multiplicative(&self, coarse: &CoarseModel) -> Result<[(f64, f64); 2], OracleError> {
        let dd = self.dd_parts(coarse)?;
        let n = self.dim();
        let id = DdMat::identity(n);
        let smooth = id.add(&dd.bf_inv().matmul(&dd.a), -1.0);
        let mut out = [(0.0, 0.0); 2];
        for (k, p) in [&dd.p_hat, &dd.p_tilde].into_iter().enumerate() {
            let additive = id.add(&dd.two_level_inverse(p).matmul(&dd.a), -1.0);
            let coarse_err = id.add(&p.matmul(&dd.g_inv).matmul(&dd.r_hat).matmul(&dd.a), -1.0);
            let pre = coarse_err.matmul(&smooth);
            let post = smooth.matmul(&coarse_err);
            let scale = additive.max_abs().max(1.0);
            out[k] = (
                additive.add(&pre, -1.0).max_abs() / scale,
                additive.add(&post, -1.0).max_abs() / scale,
            );
        }
        Ok(out)
    }

    fn dd_parts(&self, coarse: &CoarseModel) -> Result<DdParts, OracleError> {
        let n = self.dim();
        let (nc, nf, nl) = (self.n_coarse(), self.split.n_fine(), self.split.n_lambda);
        let a = DdMat::from_f64(&self.a);
        let acc = a.submatrix(0, 0, nc, nc);
        let acf = a.submatrix(0, nc, nc, nf);
        let afc = a.submatrix(nc, 0, nf, nc);
        let aff = a.submatrix(nc, nc, nf, nf);
        let aff_inv = aff.inverse().ok_or(OracleError::Singular("A_FF"))?;
        let s = acc.add(&acf.matmul(&aff_inv).matmul(&afc), -1.0);
        let g_inv = match coarse {
            CoarseModel::Exact => s.inverse().ok_or(OracleError::Singular("Schur complement"))?,
            CoarseModel::Diagonal => {
                let mut g = DdMat::zeros(nc, nc);
                for i in 0..nc {
                    g[(i, i)] = Dd::ONE / s[(i, i)];
                }
                g
            }
            CoarseModel::Inverse(g) => DdMat::from_f64(g),
        };
        let pfc = aff_inv.matmul(&afc).negate();
        let mut r_hat = DdMat::zeros(nc, n);
        r_hat.set_block(0, 0, &DdMat::identity(nc));
        r_hat.set_block(0, nc, &acf.matmul(&aff_inv).negate());
        let interp = |keep: usize| {
            let mut p = DdMat::zeros(n, nc);
            p.set_block(0, 0, &DdMat::identity(nc));
            p.set_block(nc, 0, &pfc.submatrix(0, 0, keep, nc));
            p
        };
        Ok(DdParts {
            p_hat: interp(nf),
            p_tilde: interp(nf - nl),
            a,
            aff_inv,
            s,
            g_inv,
            r_hat,
            nc,
        })
    }
}

/// Double-double copies of the operators used by the exact-arithmetic checks.
struct DdParts {
    a: DdMat,
    aff_inv: DdMat,
    s: DdMat,
    g_inv: DdMat,
    p_hat: DdMat,
    p_tilde: DdMat,
    r_hat: DdMat,
    nc: usize,
}

impl DdParts {
    /// `Q A_FF⁻¹ Qᵀ` embedded in the full space.
    fn bf_inv(&self) -> DdMat {
        let mut b = DdMat::zeros(self.a.nrows(), self.a.ncols());
        b.set_block(self.nc, self.nc, &self.aff_inv);
        b
    }

    /// `P G⁻¹ R̂ + Q A_FF⁻¹ Qᵀ`.
    fn two_level_inverse(&self, p: &DdMat) -> DdMat {
        p.matmul(&self.g_inv).matmul(&self.r_hat).add(&self.bf_inv(), 1.0)
    }
}

/// Eigenvalues of a general real matrix, computed in double-double precision.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, OracleError> {
    DdMat::from_f64(m).eigenvalues().ok_or(OracleError::NonConvergedEig)
}

/// Largest distance of a greedy nearest-neighbour matching between two
/// multisets of equal size (an upper bound on the bottleneck distance).
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut sorted: Vec<Complex<f64>> = a.to_vec();
    sorted.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in sorted {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("sizes agree");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

/// Dense matrix of a linear map given by its action on unit vectors.
pub fn extract_operator(n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = f(&e);
        e[j] = 0.0;
        out.column_mut(j).copy_from_slice(&col);
    }
    out
}
