//! Mortar coupling matrices for tied contact on straight interfaces.
//!
//! Multipliers use the standard slave trace basis (`Φ_j = N_j` of the slave
//! side), so the slave mortar matrix `D` is a 1D mass matrix: symmetric and
//! tridiagonal along each interface chain. The slave-to-master map is the
//! arclength identification along the common line.

use thiserror::Error;

use crate::elasticity::DofMap;
use crate::meshgen::MultiBodyMesh;
use crate::sparsela::{BlockTriDiagMatrix, CsrMatrix, Permutation, SparseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MortarError {
    #[error("interface geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("mortar matrix is not block tridiagonal under any column permutation (block row {row})")]
    NotTridiagonalizable { row: usize },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Sub-segment of the slave interface over which both the slave segment and
/// the master segment under the slave-to-master map are fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationCell {
    pub t0: f64,
    pub t1: f64,
    pub slave_seg: usize,
    pub master_seg: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfacePairing {
    pub pair: usize,
    /// Body-local slave node indices along the chain.
    pub slave_nodes: Vec<usize>,
    pub master_nodes: Vec<usize>,
    /// Arclength coordinate of each slave node, measured from the first slave node.
    pub slave_t: Vec<f64>,
    /// Arclength coordinate of each master node on the same axis.
    pub master_t: Vec<f64>,
    pub cells: Vec<IntegrationCell>,
    pub length: f64,
}

const GEOM_TOL: f64 = 1e-10;

/// Builds integration cells for contact pair `k` by merging slave and master
/// breakpoints along the shared line.
pub fn build_pairing(mesh: &MultiBodyMesh, k: usize) -> Result<InterfacePairing, MortarError> {
    let p = &mesh.pairs[k];
    let sb = &mesh.bodies[p.slave_body];
    let mb = &mesh.bodies[p.master_body];
    let slave_nodes = mesh.slave_chain(k);
    let master_nodes = mesh.master_chain(k);
    let spts: Vec<[f64; 2]> = slave_nodes.iter().map(|&n| sb.nodes[n]).collect();
    let mpts: Vec<[f64; 2]> = master_nodes.iter().map(|&n| mb.nodes[n]).collect();
    let origin = spts[0];
    let end = *spts.last().expect("chains have at least two nodes");
    let length = ((end[0] - origin[0]).powi(2) + (end[1] - origin[1]).powi(2)).sqrt();
    if length <= GEOM_TOL {
        return Err(MortarError::GeometryMismatch(format!("pair {k} has zero length")));
    }
    let dir = [(end[0] - origin[0]) / length, (end[1] - origin[1]) / length];
    let project = |q: [f64; 2]| -> (f64, f64) {
        let d = [q[0] - origin[0], q[1] - origin[1]];
        (d[0] * dir[0] + d[1] * dir[1], d[0] * dir[1] - d[1] * dir[0])
    };
    let mut slave_t = Vec::with_capacity(spts.len());
    let mut master_t = Vec::with_capacity(mpts.len());
    for (pts, out) in [(&spts, &mut slave_t), (&mpts, &mut master_t)] {
        for &q in pts.iter() {
            let (t, off) = project(q);
            if off.abs() > GEOM_TOL {
                return Err(MortarError::GeometryMismatch(format!(
                    "pair {k}: node at ({}, {}) is {off:e} off the interface line",
                    q[0], q[1]
                )));
            }
            out.push(t);
        }
        if out.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MortarError::GeometryMismatch(format!(
                "pair {k}: chain is not monotone along the interface"
            )));
        }
    }
    let m_first = master_t[0];
    let m_last = *master_t.last().expect("non-empty");
    if m_first.abs() > GEOM_TOL || (m_last - length).abs() > GEOM_TOL {
        return Err(MortarError::GeometryMismatch(format!(
            "pair {k}: master chain spans [{m_first}, {m_last}], slave spans [0, {length}]"
        )));
    }
    // Snap the master endpoints so both chains cover exactly [0, length].
    master_t[0] = 0.0;
    *master_t.last_mut().expect("non-empty") = length;
    *slave_t.last_mut().expect("non-empty") = length;

    let mut breaks: Vec<f64> = slave_t.iter().chain(&master_t).copied().collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * length);
    let locate = |ts: &[f64], x: f64| -> usize {
        let i = ts.partition_point(|&t| t <= x);
        i.clamp(1, ts.len() - 1) - 1
    };
    let cells = breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            IntegrationCell {
                t0: w[0],
                t1: w[1],
                slave_seg: locate(&slave_t, mid),
                master_seg: locate(&master_t, mid),
            }
        })
        .collect();
    Ok(InterfacePairing {
        pair: k,
        slave_nodes,
        master_nodes,
        slave_t,
        master_t,
        cells,
        length,
    })
}

/// Scalar (per-node) mortar matrices of one contact pair over the full chains.
#[derive(Debug, Clone)]
pub struct ScalarMortar {
    /// `D_jk = ∫ Φ_j N_k^(slave)`, slave chain × slave chain.
    pub d: CsrMatrix,
    /// `M_jl = ∫ Φ_j N_l^(master) ∘ χ_h`, slave chain × master chain.
    pub m: CsrMatrix,
}

/// Integrates the mortar matrices with 3-point Gauss quadrature per cell.
pub fn assemble_mortar(pairing: &InterfacePairing) -> ScalarMortar {
    let ns = pairing.slave_t.len();
    let nm = pairing.master_t.len();
    let r = (0.6f64).sqrt();
    let gauss = [(-r, 5.0 / 9.0), (0.0, 8.0 / 9.0), (r, 5.0 / 9.0)];
    let mut dt = Vec::with_capacity(pairing.cells.len() * 4);
    let mut mt = Vec::with_capacity(pairing.cells.len() * 4);
    let hat = |ts: &[f64], seg: usize, t: f64| -> [f64; 2] {
        let (a, b) = (ts[seg], ts[seg + 1]);
        let s = (t - a) / (b - a);
        [1.0 - s, s]
    };
    for c in &pairing.cells {
        let half = 0.5 * (c.t1 - c.t0);
        let mid = 0.5 * (c.t1 + c.t0);
        for &(xi, w) in &gauss {
            let t = mid + half * xi;
            let wt = w * half;
            let ns_ = hat(&pairing.slave_t, c.slave_seg, t);
            let nm_ = hat(&pairing.master_t, c.master_seg, t);
            for a in 0..2 {
                let j = c.slave_seg + a;
                for b in 0..2 {
                    dt.push((j, c.slave_seg + b, wt * ns_[a] * ns_[b]));
                    mt.push((j, c.master_seg + b, wt * ns_[a] * nm_[b]));
                }
            }
        }
    }
    ScalarMortar {
        d: CsrMatrix::from_triplets(ns, ns, &dt).expect("chain indices in range"),
        m: CsrMatrix::from_triplets(ns, nm, &mt).expect("chain indices in range"),
    }
}

/// DOF-level mortar operators over all contact pairs, restricted to the
/// non-eliminated slave (rows and `D` columns) and master (`M` columns) DOFs.
#[derive(Debug, Clone)]
pub struct MortarMatrices {
    /// `|𝒮| × |𝒮|`
    pub d: CsrMatrix,
    /// `|𝒮| × |ℳ|`
    pub m: CsrMatrix,
    /// `|λ| × n_displacement`
    pub g: CsrMatrix,
    pub dtilde: BlockTriDiagMatrix,
    pub t: Permutation,
}

impl MortarMatrices {
    pub fn build(mesh: &MultiBodyMesh, dofs: &DofMap) -> Result<Self, MortarError> {
        let (ni, nm, ns) = (dofs.n_interior, dofs.n_master, dofs.n_slave);
        let mut dt = Vec::new();
        let mut mt = Vec::new();
        for k in 0..mesh.pairs.len() {
            let sm = assemble_mortar(&build_pairing(mesh, k)?);
            let srow = &dofs.slave_chains[k];
            let mcol = &dofs.master_chains[k];
            for (j, kk, v) in sm.d.triplets() {
                if let (Some(r), Some(c)) = (srow[j], srow[kk]) {
                    for comp in 0..2 {
                        dt.push((r - ni - nm + comp, c - ni - nm + comp, v));
                    }
                }
            }
            for (j, l, v) in sm.m.triplets() {
                if let (Some(r), Some(c)) = (srow[j], mcol[l]) {
                    for comp in 0..2 {
                        mt.push((r - ni - nm + comp, c - ni + comp, v));
                    }
                }
            }
        }
        let d = CsrMatrix::from_triplets(ns, ns, &dt).expect("slave DOFs in range");
        let m = CsrMatrix::from_triplets(ns, nm, &mt).expect("master DOFs in range");
        let g = build_g(&d, &m, ni);
        let (dtilde, t) = factor_block_tridiag(&d)?;
        Ok(Self { d, m, g, dtilde, t })
    }
}

/// `G = [0_𝒩, −M, D]` over the displacement ordering `[𝒩, ℳ, 𝒮]`.
pub fn build_g(d: &CsrMatrix, m: &CsrMatrix, n_interior: usize) -> CsrMatrix {
    assert_eq!(d.nrows(), m.nrows());
    let zero = CsrMatrix::zeros(d.nrows(), n_interior);
    let neg_m = m.scale(-1.0);
    CsrMatrix::from_blocks(&[vec![Some(&zero), Some(&neg_m), Some(d)]])
        .expect("blocks share the row count")
}

/// Finds a block column permutation `T` and block tridiagonal `D̃` with
/// `D = D̃ T`. Each block row is matched to its dominant block column.
pub fn factor_block_tridiag(
    d: &CsrMatrix,
) -> Result<(BlockTriDiagMatrix, Permutation), MortarError> {
    let n = d.nrows();
    if d.ncols() != n || !n.is_multiple_of(2) {
        return Err(MortarError::Sparse(SparseError::DimensionMismatch {
            expected: n,
            found: d.ncols(),
        }));
    }
    let nb = n / 2;
    let mut block_perm = vec![usize::MAX; nb];
    let mut taken = vec![false; nb];
    for bi in 0..nb {
        let mut weight: Vec<(usize, f64)> = Vec::new();
        for r in [2 * bi, 2 * bi + 1] {
            let (cols, vals) = d.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                match weight.iter_mut().find(|(b, _)| *b == c / 2) {
                    Some(e) => e.1 = e.1.max(v.abs()),
                    None => weight.push((c / 2, v.abs())),
                }
            }
        }
        if weight.len() > 3 {
            return Err(MortarError::NotTridiagonalizable { row: bi });
        }
        let best = weight
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(b, _)| *b)
            .ok_or(MortarError::Sparse(SparseError::SingularPivot(bi)))?;
        if taken[best] {
            return Err(MortarError::NotTridiagonalizable { row: bi });
        }
        taken[best] = true;
        block_perm[bi] = best;
    }
    let t = Permutation::from_vec(block_perm)
        .expect("matching is a bijection")
        .expand(2);
    // D̃[:, i] = D[:, perm[i]]
    let dt = d.permute(&Permutation::identity(n), &t);
    let dtilde = BlockTriDiagMatrix::from_csr(&dt)
        .ok_or_else(|| {
            let row = dt
                .triplets()
                .find(|&(i, j, _)| (i / 2).abs_diff(j / 2) > 1)
                .map_or(0, |(i, _, _)| i / 2);
            MortarError::NotTridiagonalizable { row }
        })??;
    Ok((dtilde, t))
}

impl MortarMatrices {
    /// `D⁻¹ f = T⁻¹ D̃⁻¹ f`
    pub fn solve_d(&self, f: &[f64]) -> Result<Vec<f64>, SparseError> {
        Ok(self.t.apply_inverse(&self.dtilde.solve(f)?))
    }

    /// `D⁻ᵀ f = D̃⁻ᵀ T f`
    pub fn solve_dt(&self, f: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.dtilde.solve_transpose(&self.t.apply(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen::{generate_model, ContactModelSpec, ModelId, Ratio};

    fn model3(r: usize, ratio: Ratio) -> MultiBodyMesh {
        let mut s = ContactModelSpec::new(ModelId::Model3, r);
        s.mismatch = ratio;
        s.allow_matching = true;
        generate_model(&s).unwrap()
    }

    #[test]
    fn breakpoint_merge_three_vs_two() {
        let p = build_pairing(&model3(2, Ratio::THREE_HALVES), 0).unwrap();
        let b: Vec<f64> = p.cells.iter().map(|c| c.t0).chain([1.0]).collect();
        let expect = [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
        assert_eq!(b.len(), expect.len());
        for (a, e) in b.iter().zip(expect) {
            assert!((a - e).abs() <= 1e-15);
        }
        assert_eq!(
            p.cells.iter().map(|c| (c.slave_seg, c.master_seg)).collect::<Vec<_>>(),
            vec![(0, 0), (1, 0), (1, 1), (2, 1)]
        );
    }

    #[test]
    fn matching_cells_are_slave_segments() {
        let p = build_pairing(&model3(4, Ratio::ONE), 0).unwrap();
        assert_eq!(p.cells.len(), 4);
        for (i, c) in p.cells.iter().enumerate() {
            assert_eq!((c.slave_seg, c.master_seg), (i, i));
        }
        let sm = assemble_mortar(&p);
        let diff = sm.d.add(1.0, &sm.m, -1.0).unwrap();
        assert!(diff.max_abs() <= 1e-15);
    }

    #[test]
    fn single_segment_is_mass_matrix() {
        let p = InterfacePairing {
            pair: 0,
            slave_nodes: vec![0, 1],
            master_nodes: vec![0, 1],
            slave_t: vec![0.0, 0.7],
            master_t: vec![0.0, 0.7],
            cells: vec![IntegrationCell {
                t0: 0.0,
                t1: 0.7,
                slave_seg: 0,
                master_seg: 0,
            }],
            length: 0.7,
        };
        let sm = assemble_mortar(&p);
        let h = 0.7;
        let expect = [h / 3.0, h / 6.0, h / 6.0, h / 3.0];
        for (a, e) in sm.d.to_dense().iter().zip(expect) {
            assert!((a - e).abs() <= 1e-15);
        }
    }

    #[test]
    fn row_sums_agree() {
        for ratio in [Ratio::THREE_HALVES, Ratio { num: 7, den: 3 }, Ratio { num: 2, den: 5 }] {
            let mesh = model3(5, ratio);
            let sm = assemble_mortar(&build_pairing(&mesh, 0).unwrap());
            let ones_s = vec![1.0; sm.d.ncols()];
            let ones_m = vec![1.0; sm.m.ncols()];
            let rd = sm.d.spmv(&ones_s).unwrap();
            let rm = sm.m.spmv(&ones_m).unwrap();
            for (a, b) in rd.iter().zip(&rm) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn geometry_mismatch_detected() {
        let mut mesh = model3(3, Ratio::THREE_HALVES);
        let n = *mesh.master_chain(0).last().unwrap();
        mesh.bodies[1].nodes[n][0] += 1e-6;
        assert!(matches!(
            build_pairing(&mesh, 0),
            Err(MortarError::GeometryMismatch(_))
        ));
    }

    #[test]
    fn natural_order_gives_identity_permutation() {
        let mesh = model3(4, Ratio::THREE_HALVES);
        let asm = crate::elasticity::assemble(&mesh, &Default::default()).unwrap();
        let mm = MortarMatrices::build(&mesh, &asm.dofs).unwrap();
        assert!(mm.t.is_identity());
        assert!(mm.dtilde.asymmetry() <= 1e-14);
    }

    #[test]
    fn permuted_columns_recovered() {
        let mesh = model3(6, Ratio::THREE_HALVES);
        let asm = crate::elasticity::assemble(&mesh, &Default::default()).unwrap();
        let mm = MortarMatrices::build(&mesh, &asm.dofs).unwrap();
        let nb = mm.d.nrows() / 2;
        assert_eq!(nb, 10);
        let shuffle: Vec<usize> = (0..nb).map(|i| (i * 7 + 3) % nb).collect();
        let p = Permutation::from_vec(shuffle).unwrap().expand(2);
        let n = mm.d.nrows();
        let dp = mm.d.permute(&Permutation::identity(n), &p);
        let (dt, t) = factor_block_tridiag(&dp).unwrap();
        let back = dt.to_csr().permute(&Permutation::identity(n), &t.inverse());
        assert_eq!(back.add(1.0, &dp, -1.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn wide_coupling_rejected() {
        let mut t = Vec::new();
        for i in 0..8 {
            t.push((i, i, 4.0));
        }
        t.push((0, 6, 1.0));
        t.push((0, 4, 1.0));
        t.push((0, 2, 1.0));
        let d = CsrMatrix::from_triplets(8, 8, &t).unwrap();
        assert!(matches!(
            factor_block_tridiag(&d),
            Err(MortarError::NotTridiagonalizable { .. })
        ));
    }
}
