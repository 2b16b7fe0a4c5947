//! Multi-body structured triangle meshes for the tied-contact test models.
//!
//! Every body is an axis-aligned rectangle split into `nx × ny` quads, each
//! cut into two counter-clockwise triangles along the lower-left to
//! upper-right diagonal. Node `(i, j)` of a body has local index
//! `j * (nx + 1) + i`.
//!
//! # Text export format
//!
//! [`MultiBodyMesh::write_text`] writes a line-oriented format meant for
//! debugging and plotting:
//!
//! ```text
//! tlamg-mesh 1
//! bodies <count>
//! body <index> nodes <n> triangles <t> edges <e>
//! <x> <y>                      (n lines)
//! <a> <b> <c>                  (t lines, 0-based local node indices)
//! <a> <b> <tag>                (e lines)
//! pairs <count>
//! pair <k> slave <body> <side> master <body> <side>
//! ```
//!
//! Edge tags are `free`, `dirichlet-x`, `dirichlet-y`, `dirichlet`,
//! `neumann <tx> <ty>`, `slave <k>` and `master <k>`. Sides are `bottom`,
//! `right`, `top` and `left`.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elasticity::MaterialParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    Model1,
    Model2,
    Model3,
}

impl ModelId {
    pub fn body_count(self) -> usize {
        match self {
            ModelId::Model1 | ModelId::Model2 => 3,
            ModelId::Model3 => 2,
        }
    }

    /// Traction magnitude used in the reference experiments.
    pub fn default_traction(self) -> f64 {
        match self {
            ModelId::Model1 | ModelId::Model2 => 10.0,
            ModelId::Model3 => 1.0,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            ModelId::Model1 => 1,
            ModelId::Model2 => 2,
            ModelId::Model3 => 3,
        };
        write!(f, "model{n}")
    }
}

impl std::str::FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().trim_start_matches("model") {
            "1" => Ok(ModelId::Model1),
            "2" => Ok(ModelId::Model2),
            "3" => Ok(ModelId::Model3),
            _ => Err(format!("unknown model '{s}' (expected 1, 2 or 3)")),
        }
    }
}

/// Slave-to-master interface element count ratio `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };
    pub const THREE_HALVES: Ratio = Ratio { num: 3, den: 2 };

    /// `ceil(n * num / den)`
    pub fn scale(self, n: usize) -> usize {
        let (num, den) = (self.num as usize, self.den as usize);
        (n * num).div_ceil(den)
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactModelSpec {
    pub model: ModelId,
    /// Element count along the shortest edge of the master body.
    pub resolution: usize,
    pub mismatch: Ratio,
    pub traction_magnitude: f64,
    pub material: MaterialParams,
    /// Must be set to generate matching interface meshes (ratio 1).
    pub allow_matching: bool,
}

impl ContactModelSpec {
    pub fn new(model: ModelId, resolution: usize) -> Self {
        Self {
            model,
            resolution,
            mismatch: Ratio::THREE_HALVES,
            traction_magnitude: model.default_traction(),
            material: MaterialParams::default(),
            allow_matching: false,
        }
    }

    /// Same model with matching interface meshes.
    pub fn matching(mut self) -> Self {
        self.mismatch = Ratio::ONE;
        self.allow_matching = true;
        self
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.resolution < 2 {
            return Err(MeshError::InvalidSpec(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        if self.mismatch.num == 0 || self.mismatch.den == 0 {
            return Err(MeshError::InvalidSpec("mismatch ratio must be positive".into()));
        }
        if self.mismatch.is_one() && !self.allow_matching {
            return Err(MeshError::InvalidSpec(
                "mismatch ratio 1 requires allow_matching".into(),
            ));
        }
        if !self.traction_magnitude.is_finite() {
            return Err(MeshError::InvalidSpec("traction must be finite".into()));
        }
        self.material.validate().map_err(MeshError::InvalidSpec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }
}

/// Which displacement components a Dirichlet edge fixes to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub x: bool,
    pub y: bool,
}

impl Constraint {
    pub const BOTH: Constraint = Constraint { x: true, y: true };
    pub const X: Constraint = Constraint { x: true, y: false };
    pub const Y: Constraint = Constraint { x: false, y: true };

    pub fn is_full(self) -> bool {
        self.x && self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EdgeTag {
    Free,
    Dirichlet(Constraint),
    /// Uniform traction vector (force per unit length).
    Neumann([f64; 2]),
    SlaveInterface(usize),
    MasterInterface(usize),
}

impl fmt::Display for EdgeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeTag::Free => write!(f, "free"),
            EdgeTag::Dirichlet(c) => match (c.x, c.y) {
                (true, true) => write!(f, "dirichlet"),
                (true, false) => write!(f, "dirichlet-x"),
                (false, true) => write!(f, "dirichlet-y"),
                (false, false) => write!(f, "free"),
            },
            EdgeTag::Neumann([tx, ty]) => write!(f, "neumann {tx:e} {ty:e}"),
            EdgeTag::SlaveInterface(k) => write!(f, "slave {k}"),
            EdgeTag::MasterInterface(k) => write!(f, "master {k}"),
        }
    }
}

/// Input description of one rectangular body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    /// `[x0, y0, x1, y1]`
    pub rect: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    /// Tags for the bottom, right, top and left sides.
    pub sides: [EdgeTag; 4],
}

impl BodySpec {
    pub fn side_tag(&self, side: Side) -> EdgeTag {
        self.sides[side as usize]
    }

    pub fn area(&self) -> f64 {
        (self.rect[2] - self.rect[0]) * (self.rect[3] - self.rect[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub slave_body: usize,
    pub slave_side: Side,
    pub master_body: usize,
    pub master_side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    pub tag: EdgeTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub spec: BodySpec,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
}

impl Body {
    fn build(spec: BodySpec) -> Self {
        let (nx, ny) = (spec.nx, spec.ny);
        let [x0, y0, x1, y1] = spec.rect;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = if j == ny { y1 } else { y0 + (y1 - y0) * j as f64 / ny as f64 };
            for i in 0..=nx {
                let x = if i == nx { x1 } else { x0 + (x1 - x0) * i as f64 / nx as f64 };
                nodes.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for side in Side::ALL {
            let tag = spec.side_tag(side);
            let chain = side_chain(nx, ny, side);
            for w in chain.windows(2) {
                boundary.push(BoundaryEdge {
                    nodes: [w[0], w[1]],
                    side,
                    tag,
                });
            }
        }
        Self {
            spec,
            nodes,
            triangles,
            boundary,
        }
    }

    /// Node indices along a side, ordered by increasing coordinate.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        side_chain(self.spec.nx, self.spec.ny, side)
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|n| self.nodes[n]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

fn side_chain(nx: usize, ny: usize, side: Side) -> Vec<usize> {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    match side {
        Side::Bottom => (0..=nx).map(|i| id(i, 0)).collect(),
        Side::Top => (0..=nx).map(|i| id(i, ny)).collect(),
        Side::Left => (0..=ny).map(|j| id(0, j)).collect(),
        Side::Right => (0..=ny).map(|j| id(nx, j)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBodyMesh {
    pub bodies: Vec<Body>,
    pub pairs: Vec<PairSpec>,
}

impl MultiBodyMesh {
    /// Builds a mesh from body and contact-pair descriptions. Pair `k` must
    /// reference sides tagged `SlaveInterface(k)` and `MasterInterface(k)`.
    pub fn from_specs(bodies: Vec<BodySpec>, pairs: Vec<PairSpec>) -> Result<Self, MeshError> {
        for (b, s) in bodies.iter().enumerate() {
            if s.nx == 0 || s.ny == 0 {
                return Err(MeshError::InvalidSpec(format!("body {b} has no elements")));
            }
            if !(s.rect[2] > s.rect[0] && s.rect[3] > s.rect[1]) {
                return Err(MeshError::InvalidSpec(format!("body {b} has an empty rectangle")));
            }
        }
        for (k, p) in pairs.iter().enumerate() {
            let sb = bodies.get(p.slave_body);
            let mb = bodies.get(p.master_body);
            let ok = matches!(sb.map(|b| b.side_tag(p.slave_side)), Some(EdgeTag::SlaveInterface(j)) if j == k)
                && matches!(mb.map(|b| b.side_tag(p.master_side)), Some(EdgeTag::MasterInterface(j)) if j == k)
                && p.slave_body != p.master_body;
            if !ok {
                return Err(MeshError::InvalidSpec(format!(
                    "pair {k} does not reference matching interface tags"
                )));
            }
        }
        for (b, s) in bodies.iter().enumerate() {
            for side in Side::ALL {
                let k = match s.side_tag(side) {
                    EdgeTag::SlaveInterface(k) | EdgeTag::MasterInterface(k) => k,
                    _ => continue,
                };
                let used = pairs.get(k).is_some_and(|p| {
                    (p.slave_body == b && p.slave_side == side)
                        || (p.master_body == b && p.master_side == side)
                });
                if !used {
                    return Err(MeshError::InvalidSpec(format!(
                        "body {b} side {} tagged for unknown pair {k}",
                        side.name()
                    )));
                }
            }
        }
        Ok(Self {
            bodies: bodies.into_iter().map(Body::build).collect(),
            pairs,
        })
    }

    pub fn node_count(&self) -> usize {
        self.bodies.iter().map(Body::node_count).sum()
    }

    pub fn triangle_count(&self) -> usize {
        self.bodies.iter().map(|b| b.triangles.len()).sum()
    }

    pub fn slave_chain(&self, k: usize) -> Vec<usize> {
        let p = &self.pairs[k];
        self.bodies[p.slave_body].side_nodes(p.slave_side)
    }

    pub fn master_chain(&self, k: usize) -> Vec<usize> {
        let p = &self.pairs[k];
        self.bodies[p.master_body].side_nodes(p.master_side)
    }

    pub fn write_text(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "tlamg-mesh 1")?;
        writeln!(w, "bodies {}", self.bodies.len())?;
        for (b, body) in self.bodies.iter().enumerate() {
            writeln!(
                w,
                "body {b} nodes {} triangles {} edges {}",
                body.nodes.len(),
                body.triangles.len(),
                body.boundary.len()
            )?;
            for [x, y] in &body.nodes {
                writeln!(w, "{x:e} {y:e}")?;
            }
            for [a, b, c] in &body.triangles {
                writeln!(w, "{a} {b} {c}")?;
            }
            for e in &body.boundary {
                writeln!(w, "{} {} {}", e.nodes[0], e.nodes[1], e.tag)?;
            }
        }
        writeln!(w, "pairs {}", self.pairs.len())?;
        for (k, p) in self.pairs.iter().enumerate() {
            writeln!(
                w,
                "pair {k} slave {} {} master {} {}",
                p.slave_body,
                p.slave_side.name(),
                p.master_body,
                p.master_side.name()
            )?;
        }
        Ok(())
    }
}

fn model_layout(spec: &ContactModelSpec) -> (Vec<BodySpec>, Vec<PairSpec>) {
    use EdgeTag::*;
    let r = spec.resolution;
    let s = spec.mismatch.scale(r);
    let p = spec.traction_magnitude;
    match spec.model {
        ModelId::Model1 | ModelId::Model2 => {
            let (left_side, right_side, bottom, top) = if spec.model == ModelId::Model1 {
                (Dirichlet(Constraint::BOTH), Neumann([p, 0.0]), Free, Free)
            } else {
                (Free, Free, Dirichlet(Constraint::BOTH), Neumann([0.0, -p]))
            };
            let bodies = vec![
                BodySpec {
                    rect: [0.0, 0.0, 1.0, 1.0],
                    nx: s,
                    ny: s,
                    sides: [bottom, SlaveInterface(0), top, left_side],
                },
                BodySpec {
                    rect: [1.0, 0.0, 2.0, 1.0],
                    nx: r,
                    ny: r,
                    sides: [bottom, MasterInterface(1), top, MasterInterface(0)],
                },
                BodySpec {
                    rect: [2.0, 0.0, 3.0, 1.0],
                    nx: s,
                    ny: s,
                    sides: [bottom, right_side, top, SlaveInterface(1)],
                },
            ];
            let pairs = vec![
                PairSpec {
                    slave_body: 0,
                    slave_side: Side::Right,
                    master_body: 1,
                    master_side: Side::Left,
                },
                PairSpec {
                    slave_body: 2,
                    slave_side: Side::Left,
                    master_body: 1,
                    master_side: Side::Right,
                },
            ];
            (bodies, pairs)
        }
        ModelId::Model3 => {
            let bodies = vec![
                BodySpec {
                    rect: [0.0, 0.0, 1.0, 2.0],
                    nx: s,
                    ny: 2 * s,
                    sides: [Dirichlet(Constraint::BOTH), Free, SlaveInterface(0), Free],
                },
                BodySpec {
                    rect: [0.0, 2.0, 1.0, 4.0],
                    nx: r,
                    ny: 2 * r,
                    sides: [MasterInterface(0), Free, Neumann([0.0, -p]), Free],
                },
            ];
            let pairs = vec![PairSpec {
                slave_body: 0,
                slave_side: Side::Top,
                master_body: 1,
                master_side: Side::Bottom,
            }];
            (bodies, pairs)
        }
    }
}

/// Generates the mesh of one of the three test models.
pub fn generate_model(spec: &ContactModelSpec) -> Result<MultiBodyMesh, MeshError> {
    spec.validate()?;
    let (bodies, pairs) = model_layout(spec);
    MultiBodyMesh::from_specs(bodies, pairs)
}

/// Uniform refinement: every body's element counts are multiplied by
/// `factor`, so interface mismatch ratios and tags carry over.
pub fn refine(mesh: &MultiBodyMesh, factor: usize) -> MultiBodyMesh {
    assert!(factor >= 1, "refinement factor must be positive");
    if factor == 1 {
        return mesh.clone();
    }
    let bodies = mesh
        .bodies
        .iter()
        .map(|b| BodySpec {
            nx: b.spec.nx * factor,
            ny: b.spec.ny * factor,
            ..b.spec.clone()
        })
        .collect();
    MultiBodyMesh::from_specs(bodies, mesh.pairs.clone()).expect("refined specs stay valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model3_tiny_has_mismatched_interface() {
        let m = generate_model(&ContactModelSpec::new(ModelId::Model3, 2)).unwrap();
        assert_eq!(m.bodies.len(), 2);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.slave_chain(0).len() - 1, 3);
        assert_eq!(m.master_chain(0).len() - 1, 2);
    }

    #[test]
    fn model1_dirichlet_only_on_global_left() {
        let m = generate_model(&ContactModelSpec::new(ModelId::Model1, 4)).unwrap();
        assert_eq!(m.bodies.len(), 3);
        assert_eq!(m.pairs.len(), 2);
        for (b, body) in m.bodies.iter().enumerate() {
            for e in &body.boundary {
                let dir = matches!(e.tag, EdgeTag::Dirichlet(_));
                assert_eq!(dir, b == 0 && e.side == Side::Left);
                for n in e.nodes {
                    if dir {
                        assert_eq!(body.nodes[n][0], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn model2_downward_traction_on_tops() {
        for r in [2, 5] {
            let m = generate_model(&ContactModelSpec::new(ModelId::Model2, r)).unwrap();
            for body in &m.bodies {
                for e in &body.boundary {
                    let is_neumann = matches!(e.tag, EdgeTag::Neumann(_));
                    assert_eq!(is_neumann, e.side == Side::Top);
                    if let EdgeTag::Neumann(t) = e.tag {
                        assert_eq!(t, [0.0, -10.0]);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate_model(&ContactModelSpec::new(ModelId::Model1, 1)).is_err());
        let mut s = ContactModelSpec::new(ModelId::Model1, 4);
        s.mismatch = Ratio::ONE;
        assert!(generate_model(&s).is_err());
        assert!(generate_model(&s.matching()).is_ok());
    }

    #[test]
    fn refine_scales_counts() {
        let m = generate_model(&ContactModelSpec::new(ModelId::Model3, 3)).unwrap();
        assert_eq!(refine(&m, 1), m);
        let r = refine(&m, 2);
        assert_eq!(r.triangle_count(), 4 * m.triangle_count());
        assert_eq!(r.slave_chain(0).len() - 1, 2 * (m.slave_chain(0).len() - 1));
    }

    #[test]
    fn areas_and_orientation() {
        for model in [ModelId::Model1, ModelId::Model2, ModelId::Model3] {
            let m = generate_model(&ContactModelSpec::new(model, 5)).unwrap();
            for body in &m.bodies {
                let total: f64 = (0..body.triangles.len()).map(|t| body.signed_area(t)).sum();
                assert!((0..body.triangles.len()).all(|t| body.signed_area(t) > 0.0));
                assert!((total - body.spec.area()).abs() <= 1e-12 * body.spec.area());
            }
        }
    }

    #[test]
    fn text_export_lists_every_body() {
        let m = generate_model(&ContactModelSpec::new(ModelId::Model3, 2)).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("tlamg-mesh 1\nbodies 2\n"));
        assert!(s.contains("pair 0 slave 0 top master 1 bottom"));
        assert!(s.contains("neumann 0e0 -1e0"));
    }
}
