#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tlamg::elasticity::{assemble, DofMap, MaterialParams};
use tlamg::meshgen::{generate_model, BodySpec, Constraint, ContactModelSpec, EdgeTag, ModelId, MultiBodyMesh, PairSpec, Side};
use tlamg::sparsela::CsrMatrix;
use tlamg::system::SaddleSystem;
use tlamg::twolevel::{build_p_matrix, TwoLevelConfig, TwoLevelPreconditioner};

/// Small instances of every model topology (all below the oracle limit).
pub fn oracle_instances() -> Vec<(String, SaddleSystem)> {
    [(ModelId::Model1, 2), (ModelId::Model1, 4), (ModelId::Model2, 3), (ModelId::Model3, 3), (ModelId::Model3, 4)]
        .into_iter()
        .map(|(m, r)| {
            let sys = SaddleSystem::from_model(&ContactModelSpec::new(m, r)).unwrap();
            (format!("{m}-r{r}"), sys)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_dvec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_vec(random_vec(rng, n))
}

pub fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// Rectangle on a roller along its bottom edge with the given left and right tags.
pub fn uniaxial_body(rect: [f64; 4], nx: usize, ny: usize, left: EdgeTag, right: EdgeTag) -> BodySpec {
    let bottom = EdgeTag::Dirichlet(Constraint::Y);
    BodySpec {
        rect,
        nx,
        ny,
        sides: [bottom, right, EdgeTag::Free, left],
    }
}

/// Analytic plane-stress displacement under uniaxial tension `p` with the
/// origin fixed: `u = (p x / E, −ν p y / E)`.
pub fn uniaxial_solution(x: [f64; 2], p: f64, mat: &MaterialParams) -> [f64; 2] {
    [p * x[0] / mat.youngs_modulus, -mat.poisson_ratio * p * x[1] / mat.youngs_modulus]
}

/// Single-body patch test: returns the largest nodal deviation from the
/// analytic solution.
pub fn single_body_patch_error(nx: usize, ny: usize, p: f64) -> f64 {
    let mat = MaterialParams::default();
    let body = uniaxial_body(
        [0.0, 0.0, 2.0, 1.0],
        nx,
        ny,
        EdgeTag::Dirichlet(Constraint::X),
        EdgeTag::Neumann([p, 0.0]),
    );
    let mesh = MultiBodyMesh::from_specs(vec![body], vec![]).unwrap();
    let asm = assemble(&mesh, &mat).unwrap();
    let n = asm.dofs.n_dofs();
    let k = DMatrix::from_row_slice(n, n, &asm.k.to_dense());
    let u = k.lu().solve(&DVector::from_vec(asm.f.clone())).unwrap();
    let mut worst = 0.0f64;
    for (node, ids) in mesh.bodies[0].nodes.iter().zip(&asm.dofs.node_dofs[0]) {
        let exact = uniaxial_solution(*node, p, &mat);
        for c in 0..2 {
            let v = ids[c].map_or(0.0, |d| u[d]);
            worst = worst.max((v - exact[c]).abs());
        }
    }
    worst
}

/// Two bodies tied along `x = 1` with non-matching interface meshes, clamped
/// on the left and pulled by `p` on the right; the slave side is body 0. With
/// `ν = 0` the exact field is [`uniaxial_solution`].
pub fn tied_uniaxial_mesh(p: f64, n_left: usize, n_right: usize) -> MultiBodyMesh {
    let left = BodySpec {
        rect: [0.0, 0.0, 1.0, 1.0],
        nx: n_left,
        ny: n_left,
        sides: [EdgeTag::Free, EdgeTag::SlaveInterface(0), EdgeTag::Free, EdgeTag::Dirichlet(Constraint::BOTH)],
    };
    let right = BodySpec {
        rect: [1.0, 0.0, 2.0, 1.0],
        nx: n_right,
        ny: n_right,
        sides: [EdgeTag::Free, EdgeTag::Neumann([p, 0.0]), EdgeTag::Free, EdgeTag::MasterInterface(0)],
    };
    MultiBodyMesh::from_specs(
        vec![left, right],
        vec![PairSpec {
            slave_body: 0,
            slave_side: Side::Right,
            master_body: 1,
            master_side: Side::Left,
        }],
    )
    .unwrap()
}

/// Coordinates of every coarse DOF of a tied system, keyed for lookup in a
/// single-body assembly of the union domain.
fn dof_keys(mesh: &MultiBodyMesh, dofs: &DofMap, range: std::ops::Range<usize>) -> HashMap<usize, (i64, i64, usize)> {
    let mut keys = HashMap::new();
    for (b, body) in mesh.bodies.iter().enumerate() {
        for (node, ids) in body.nodes.iter().zip(&dofs.node_dofs[b]) {
            for (c, id) in ids.iter().enumerate() {
                if let Some(d) = id {
                    if range.contains(d) {
                        keys.insert(*d, ((node[0] * 1e9).round() as i64, (node[1] * 1e9).round() as i64, c));
                    }
                }
            }
        }
    }
    keys
}

/// `(‖P − I‖_F, relative Frobenius distance of A_H from the conforming
/// single-body stiffness)` for the matching-mesh variant of `model`.
pub fn matching_case(model: ModelId, r: usize) -> (f64, f64) {
    let union = match model {
        ModelId::Model1 => BodySpec {
            rect: [0.0, 0.0, 3.0, 1.0],
            nx: 3 * r,
            ny: r,
            sides: [EdgeTag::Free, EdgeTag::Free, EdgeTag::Free, EdgeTag::Dirichlet(Constraint::BOTH)],
        },
        ModelId::Model3 => BodySpec {
            rect: [0.0, 0.0, 1.0, 4.0],
            nx: r,
            ny: 4 * r,
            sides: [EdgeTag::Dirichlet(Constraint::BOTH), EdgeTag::Free, EdgeTag::Free, EdgeTag::Free],
        },
        ModelId::Model2 => panic!("no single-body union for model 2"),
    };
    let spec = ContactModelSpec::new(model, r).matching();
    let mesh = generate_model(&spec).unwrap();
    let sys = SaddleSystem::from_mesh(&mesh, &spec.material).unwrap();
    let p = build_p_matrix(&sys, 0.0).unwrap();
    let p_err = p.add(1.0, &CsrMatrix::identity(p.nrows()), -1.0).unwrap().frobenius_norm();

    let pc = TwoLevelPreconditioner::new(&sys, TwoLevelConfig::default()).unwrap();
    let a_h = pc.coarse_operator();
    let nc = sys.split.n_coarse();
    let tied_keys = dof_keys(&mesh, &DofMap::build(&mesh).unwrap(), 0..nc);

    let single = MultiBodyMesh::from_specs(vec![union], vec![]).unwrap();
    let asm = assemble(&single, &spec.material).unwrap();
    let single_keys = dof_keys(&single, &asm.dofs, 0..asm.dofs.n_dofs());
    let lookup: HashMap<(i64, i64, usize), usize> = single_keys.into_iter().map(|(d, k)| (k, d)).collect();
    assert_eq!(lookup.len(), nc, "conforming mesh has one DOF per coarse DOF");
    let map: Vec<usize> = (0..nc).map(|i| lookup[&tied_keys[&i]]).collect();
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    for i in 0..nc {
        for j in 0..nc {
            let conf = asm.k.get(map[i], map[j]);
            diff2 += (a_h.get(i, j) - conf).powi(2);
            norm2 += conf * conf;
        }
    }
    (p_err, (diff2 / norm2).sqrt())
}
