//! Plane-stress linear elasticity with constant-strain triangles.
//!
//! Degrees of freedom are interleaved `(u_x, u_y)` per node. The global
//! ordering places all interior displacement DOFs first (body by body), then
//! master interface DOFs (pair by pair, along each chain), then slave
//! interface DOFs in the same fashion. Dirichlet components are eliminated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meshgen::{EdgeTag, MultiBodyMesh};
use crate::sparsela::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElasticityError {
    #[error("degenerate element with signed area {area:e}")]
    DegenerateElement { area: f64 },
    #[error("body {body} node {node} lies on an interface but is only partially constrained")]
    PartiallyConstrainedInterface { body: usize, node: usize },
    #[error("body {body} node {node} belongs to more than one interface chain")]
    SharedInterfaceNode { body: usize, node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            youngs_modulus: 20.0,
            poisson_ratio: 0.3,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return Err(format!("Young's modulus must be positive, got {}", self.youngs_modulus));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(format!("Poisson ratio must lie in [0, 0.5), got {}", self.poisson_ratio));
        }
        Ok(())
    }

    /// Plane-stress constitutive matrix in Voigt notation `(xx, yy, xy)`.
    pub fn plane_stress(&self) -> [[f64; 3]; 3] {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        let c = e / (1.0 - nu * nu);
        [
            [c, c * nu, 0.0],
            [c * nu, c, 0.0],
            [0.0, 0.0, c * (1.0 - nu) / 2.0],
        ]
    }
}

/// Constant-strain-triangle stiffness (unit thickness), DOFs ordered
/// `(u1x, u1y, u2x, u2y, u3x, u3y)`.
pub fn element_stiffness(
    tri: &[[f64; 2]; 3],
    mat: &MaterialParams,
) -> Result<[[f64; 6]; 6], ElasticityError> {
    let [p1, p2, p3] = *tri;
    let area = 0.5 * ((p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]));
    if area <= 1e-14 {
        return Err(ElasticityError::DegenerateElement { area });
    }
    let b = [p2[1] - p3[1], p3[1] - p1[1], p1[1] - p2[1]];
    let c = [p3[0] - p2[0], p1[0] - p3[0], p2[0] - p1[0]];
    let s = 1.0 / (2.0 * area);
    let mut bm = [[0.0; 6]; 3];
    for i in 0..3 {
        bm[0][2 * i] = b[i] * s;
        bm[1][2 * i + 1] = c[i] * s;
        bm[2][2 * i] = c[i] * s;
        bm[2][2 * i + 1] = b[i] * s;
    }
    let cm = mat.plane_stress();
    let mut cb = [[0.0; 6]; 3];
    for i in 0..3 {
        for j in 0..6 {
            cb[i][j] = (0..3).map(|k| cm[i][k] * bm[k][j]).sum();
        }
    }
    let mut ke = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            ke[i][j] = area * (0..3).map(|k| bm[k][i] * cb[k][j]).sum::<f64>();
        }
    }
    Ok(ke)
}

/// Global numbering of displacement DOFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofMap {
    /// Per body, per local node: global DOF of each component, `None` when eliminated.
    pub node_dofs: Vec<Vec<[Option<usize>; 2]>>,
    pub n_interior: usize,
    pub n_master: usize,
    pub n_slave: usize,
    /// Per pair, per master chain node: the node's first DOF, `None` when eliminated.
    pub master_chains: Vec<Vec<Option<usize>>>,
    /// Per pair, per slave chain node: the node's first DOF, `None` when eliminated.
    pub slave_chains: Vec<Vec<Option<usize>>>,
    /// Mesh-wide node id of each DOF.
    pub node_of_dof: Vec<usize>,
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        self.n_interior + self.n_master + self.n_slave
    }

    pub fn build(mesh: &MultiBodyMesh) -> Result<Self, ElasticityError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Role {
            Interior,
            Interface,
        }
        let mut fixed: Vec<Vec<[bool; 2]>> = mesh
            .bodies
            .iter()
            .map(|b| vec![[false; 2]; b.node_count()])
            .collect();
        for (bi, body) in mesh.bodies.iter().enumerate() {
            for e in &body.boundary {
                if let EdgeTag::Dirichlet(c) = e.tag {
                    for n in e.nodes {
                        fixed[bi][n][0] |= c.x;
                        fixed[bi][n][1] |= c.y;
                    }
                }
            }
        }
        let mut role: Vec<Vec<Role>> = mesh
            .bodies
            .iter()
            .map(|b| vec![Role::Interior; b.node_count()])
            .collect();
        let chains: Vec<(usize, Vec<usize>, usize, Vec<usize>)> = (0..mesh.pairs.len())
            .map(|k| {
                let p = &mesh.pairs[k];
                (p.master_body, mesh.master_chain(k), p.slave_body, mesh.slave_chain(k))
            })
            .collect();
        for (mb, mc, sb, sc) in &chains {
            for (b, chain) in [(*mb, mc), (*sb, sc)] {
                for &n in chain {
                    if role[b][n] == Role::Interface {
                        return Err(ElasticityError::SharedInterfaceNode { body: b, node: n });
                    }
                    role[b][n] = Role::Interface;
                    let f = fixed[b][n];
                    if f[0] != f[1] {
                        return Err(ElasticityError::PartiallyConstrainedInterface {
                            body: b,
                            node: n,
                        });
                    }
                }
            }
        }

        let offsets: Vec<usize> = mesh
            .bodies
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.node_count();
                Some(o)
            })
            .collect();
        let mut node_dofs: Vec<Vec<[Option<usize>; 2]>> = mesh
            .bodies
            .iter()
            .map(|b| vec![[None; 2]; b.node_count()])
            .collect();
        let mut node_of_dof = Vec::new();
        let mut next = 0usize;
        for (bi, body) in mesh.bodies.iter().enumerate() {
            for n in 0..body.node_count() {
                if role[bi][n] != Role::Interior {
                    continue;
                }
                for c in 0..2 {
                    if !fixed[bi][n][c] {
                        node_dofs[bi][n][c] = Some(next);
                        node_of_dof.push(offsets[bi] + n);
                        next += 1;
                    }
                }
            }
        }
        let n_interior = next;
        let mut number_chain = |b: usize, chain: &[usize], next: &mut usize| -> Vec<Option<usize>> {
            chain
                .iter()
                .map(|&n| {
                    if fixed[b][n][0] {
                        return None;
                    }
                    let first = *next;
                    node_dofs[b][n] = [Some(first), Some(first + 1)];
                    node_of_dof.extend([offsets[b] + n; 2]);
                    *next += 2;
                    Some(first)
                })
                .collect()
        };
        let master_chains: Vec<_> = chains
            .iter()
            .map(|(mb, mc, _, _)| number_chain(*mb, mc, &mut next))
            .collect();
        let n_master = next - n_interior;
        let slave_chains: Vec<_> = chains
            .iter()
            .map(|(_, _, sb, sc)| number_chain(*sb, sc, &mut next))
            .collect();
        let n_slave = next - n_interior - n_master;
        Ok(Self {
            node_dofs,
            n_interior,
            n_master,
            n_slave,
            master_chains,
            slave_chains,
            node_of_dof,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AssembledElasticity {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    pub dofs: DofMap,
}

/// Assembles the block-diagonal (across bodies) stiffness matrix and the
/// Neumann load vector over the free DOFs.
pub fn assemble(
    mesh: &MultiBodyMesh,
    mat: &MaterialParams,
) -> Result<AssembledElasticity, ElasticityError> {
    let dofs = DofMap::build(mesh)?;
    let n = dofs.n_dofs();
    warn_unconstrained(mesh);
    let mut trip = Vec::with_capacity(mesh.triangle_count() * 36);
    for (bi, body) in mesh.bodies.iter().enumerate() {
        let nd = &dofs.node_dofs[bi];
        for tri in &body.triangles {
            let ke = element_stiffness(&tri.map(|v| body.nodes[v]), mat)?;
            let ids: [Option<usize>; 6] =
                std::array::from_fn(|a| nd[tri[a / 2]][a % 2]);
            for (a, ia) in ids.iter().enumerate() {
                let Some(ia) = ia else { continue };
                for (b, ib) in ids.iter().enumerate() {
                    if let Some(ib) = ib {
                        trip.push((*ia, *ib, ke[a][b]));
                    }
                }
            }
        }
    }
    let k = CsrMatrix::from_triplets(n, n, &trip).expect("DOF indices in range");
    let mut f = vec![0.0; n];
    for (bi, body) in mesh.bodies.iter().enumerate() {
        for e in &body.boundary {
            let EdgeTag::Neumann(t) = e.tag else { continue };
            let [a, b] = e.nodes.map(|v| body.nodes[v]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            // Two-point Gauss rule on linear shape functions times a constant traction.
            let g = 0.5 / 3f64.sqrt();
            let weights = [0.5 - g, 0.5 + g];
            for (slot, &node) in e.nodes.iter().enumerate() {
                let share: f64 = weights
                    .iter()
                    .map(|&xi| 0.5 * len * if slot == 0 { 1.0 - xi } else { xi })
                    .sum();
                for c in 0..2 {
                    if let Some(d) = dofs.node_dofs[bi][node][c] {
                        f[d] += share * t[c];
                    }
                }
            }
        }
    }
    Ok(AssembledElasticity { k, f, dofs })
}

fn warn_unconstrained(mesh: &MultiBodyMesh) {
    let nb = mesh.bodies.len();
    let mut reach: Vec<bool> = mesh
        .bodies
        .iter()
        .map(|b| b.boundary.iter().any(|e| matches!(e.tag, EdgeTag::Dirichlet(_))))
        .collect();
    for _ in 0..nb {
        for p in &mesh.pairs {
            let r = reach[p.slave_body] || reach[p.master_body];
            reach[p.slave_body] = r;
            reach[p.master_body] = r;
        }
    }
    for (b, ok) in reach.iter().enumerate() {
        if !ok {
            log::warn!("body {b} has no Dirichlet constraint on any path; system is singular");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rigid_modes(tri: &[[f64; 2]; 3]) -> [[f64; 6]; 3] {
        let mut m = [[0.0; 6]; 3];
        for (i, p) in tri.iter().enumerate() {
            m[0][2 * i] = 1.0;
            m[1][2 * i + 1] = 1.0;
            m[2][2 * i] = -p[1];
            m[2][2 * i + 1] = p[0];
        }
        m
    }

    #[test]
    fn rigid_body_modes_in_kernel() {
        let mat = MaterialParams::default();
        for tri in [
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            [[0.3, -0.2], [2.1, 0.4], [0.7, 1.9]],
        ] {
            let ke = element_stiffness(&tri, &mat).unwrap();
            for mode in rigid_modes(&tri) {
                for row in &ke {
                    let v: f64 = row.iter().zip(&mode).map(|(a, b)| a * b).sum();
                    assert!(v.abs() <= 1e-10);
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    assert!((ke[i][j] - ke[j][i]).abs() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn unit_right_triangle_closed_form() {
        // Hand-expanded B^T C B * area for nodes (0,0), (1,0), (0,1).
        let (e, nu) = (20.0, 0.3);
        let c = e / (1.0 - nu * nu);
        let g = c * (1.0 - nu) / 2.0;
        let ke = element_stiffness(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            &MaterialParams {
                youngs_modulus: e,
                poisson_ratio: nu,
            },
        )
        .unwrap();
        let expect = [
            [c + g, c * nu + g, -c, -g, -g, -c * nu],
            [c * nu + g, c + g, -c * nu, -g, -g, -c],
            [-c, -c * nu, c, 0.0, 0.0, c * nu],
            [-g, -g, 0.0, g, g, 0.0],
            [-g, -g, 0.0, g, g, 0.0],
            [-c * nu, -c, c * nu, 0.0, 0.0, c],
        ];
        for i in 0..6 {
            for j in 0..6 {
                assert!(
                    (0.5 * expect[i][j] - ke[i][j]).abs() <= 1e-12,
                    "({i},{j}) {} vs {}",
                    ke[i][j],
                    0.5 * expect[i][j]
                );
            }
        }
    }

    #[test]
    fn reflection_permutes_stiffness() {
        let mat = MaterialParams::default();
        let tri = [[0.0, 0.0], [2.0, 0.5], [0.5, 1.5]];
        // Mirror across the y axis; reverse node order to keep orientation.
        let refl = [[-0.0, 0.0], [-0.5, 1.5], [-2.0, 0.5]];
        let k1 = element_stiffness(&tri, &mat).unwrap();
        let k2 = element_stiffness(&refl, &mat).unwrap();
        let node = [0usize, 2, 1];
        for a in 0..6 {
            for b in 0..6 {
                let (na, ca) = (a / 2, a % 2);
                let (nb, cb) = (b / 2, b % 2);
                let sign = if ca == 0 { -1.0 } else { 1.0 } * if cb == 0 { -1.0 } else { 1.0 };
                let v = k2[2 * node[na] + ca][2 * node[nb] + cb];
                assert!((k1[a][b] - sign * v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_rejected() {
        let r = element_stiffness(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], &MaterialParams::default());
        assert!(matches!(r, Err(ElasticityError::DegenerateElement { .. })));
        let cw = element_stiffness(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], &MaterialParams::default());
        assert!(cw.is_err());
    }

    #[test]
    fn material_validation() {
        assert!(MaterialParams::default().validate().is_ok());
        let bad = MaterialParams {
            youngs_modulus: 1.0,
            poisson_ratio: 0.5,
        };
        assert!(bad.validate().is_err());
    }
}
