//! The assembled saddle-point system and its on-disk exchange format.
//!
//! Unknowns are ordered `[𝒩, ℳ, 𝒮, λ]`: interior displacements, master
//! interface displacements, slave interface displacements and multipliers.
//! The matrix is
//!
//! ```text
//! 𝒜 = [ K_NN  K_NM  K_NS   0  ]
//!     [ K_MN  K_MM   0   −Mᵀ  ]
//!     [ K_SN   0    K_SS  Dᵀ  ]
//!     [  0    −M     D    0   ]
//! ```
//!
//! # Directory format
//!
//! [`export_system`] writes `A.mtx`, `D.mtx`, `M.mtx` (MatrixMarket
//! coordinate, general), `rhs.mtx` (MatrixMarket array) and `manifest.txt`:
//!
//! ```text
//! tlamg-system 1
//! dim <n>
//! interior <start> <end>
//! master <start> <end>
//! slave <start> <end>
//! lambda <start> <end>
//! ```
//!
//! Ranges are half-open, must appear in this order, and must tile `0..n`
//! contiguously. `K.mtx` and `G.mtx` are written for inspection and ignored on
//! import.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::elasticity::{self, ElasticityError, MaterialParams};
use crate::meshgen::{self, ContactModelSpec, MeshError, MultiBodyMesh};
use crate::mortar::{self, MortarError, MortarMatrices};
use crate::sparsela::{mm, BlockTriDiagMatrix, CsrMatrix, Permutation, SparseError};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error(transparent)]
    Mortar(#[from] MortarError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{file}{}: {message}", .line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct FormatError {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl FormatError {
    fn new(file: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Coarse/fine partition of the saddle unknowns: `C = 𝒩 ∪ ℳ`, `F = 𝒮 ∪ λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CfSplit {
    pub n_interior: usize,
    pub n_master: usize,
    pub n_slave: usize,
    pub n_lambda: usize,
}

impl CfSplit {
    pub fn dim(&self) -> usize {
        self.n_interior + self.n_master + self.n_slave + self.n_lambda
    }

    pub fn n_disp(&self) -> usize {
        self.n_interior + self.n_master + self.n_slave
    }

    pub fn n_coarse(&self) -> usize {
        self.n_interior + self.n_master
    }

    pub fn n_fine(&self) -> usize {
        self.n_slave + self.n_lambda
    }

    pub fn interior(&self) -> Range<usize> {
        0..self.n_interior
    }

    pub fn master(&self) -> Range<usize> {
        self.n_interior..self.n_coarse()
    }

    pub fn slave(&self) -> Range<usize> {
        self.n_coarse()..self.n_disp()
    }

    pub fn lambda(&self) -> Range<usize> {
        self.n_disp()..self.dim()
    }

    pub fn coarse(&self) -> Range<usize> {
        0..self.n_coarse()
    }

    pub fn fine(&self) -> Range<usize> {
        self.n_coarse()..self.dim()
    }

    pub fn displacement(&self) -> Range<usize> {
        0..self.n_disp()
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub rhs: Vec<f64>,
    pub split: CfSplit,
    /// `|𝒮| × |𝒮|`
    pub d: CsrMatrix,
    /// `|𝒮| × |ℳ|`
    pub m: CsrMatrix,
    pub dtilde: BlockTriDiagMatrix,
    pub t: Permutation,
    /// Node id of each coarse (𝒩 ∪ ℳ) DOF, used for nodal AMG strength.
    pub coarse_nodes: Vec<usize>,
}

impl SaddleSystem {
    pub fn from_model(spec: &ContactModelSpec) -> Result<Self, SystemError> {
        let mesh = meshgen::generate_model(spec)?;
        Self::from_mesh(&mesh, &spec.material)
    }

    pub fn from_mesh(mesh: &MultiBodyMesh, mat: &MaterialParams) -> Result<Self, SystemError> {
        let asm = elasticity::assemble(mesh, mat)?;
        let mort = MortarMatrices::build(mesh, &asm.dofs)?;
        let split = CfSplit {
            n_interior: asm.dofs.n_interior,
            n_master: asm.dofs.n_master,
            n_slave: asm.dofs.n_slave,
            n_lambda: asm.dofs.n_slave,
        };
        let gt = mort.g.transpose();
        let a = CsrMatrix::from_blocks(&[
            vec![Some(&asm.k), Some(&gt)],
            vec![Some(&mort.g), None],
        ])
        .expect("block shapes agree");
        let mut rhs = asm.f;
        rhs.resize(split.dim(), 0.0);
        let coarse_nodes = asm.dofs.node_of_dof[..split.n_coarse()].to_vec();
        Ok(Self {
            a,
            rhs,
            split,
            d: mort.d,
            m: mort.m,
            dtilde: mort.dtilde,
            t: mort.t,
            coarse_nodes,
        })
    }

    /// Builds a system from raw blocks, checking that `𝒜` carries `G = [0, −M, D]`
    /// in its multiplier rows. `coarse_nodes` defaults to consecutive pairs.
    pub fn from_parts(
        a: CsrMatrix,
        rhs: Vec<f64>,
        split: CfSplit,
        d: CsrMatrix,
        m: CsrMatrix,
    ) -> Result<Self, String> {
        let n = split.dim();
        if a.shape() != (n, n) || rhs.len() != n {
            return Err(format!(
                "matrix {:?} / rhs {} do not match dimension {n}",
                a.shape(),
                rhs.len()
            ));
        }
        if split.n_slave != split.n_lambda {
            return Err("slave and multiplier ranges must have equal size".into());
        }
        if d.shape() != (split.n_slave, split.n_slave) {
            return Err(format!("D has shape {:?}, expected square {}", d.shape(), split.n_slave));
        }
        if m.shape() != (split.n_slave, split.n_master) {
            return Err(format!(
                "M has shape {:?}, expected {}x{}",
                m.shape(),
                split.n_slave,
                split.n_master
            ));
        }
        let g_rows = a.submatrix(split.lambda(), 0..n);
        let g_expect = CsrMatrix::from_blocks(&[vec![
            Some(&CsrMatrix::zeros(split.n_lambda, split.n_interior)),
            Some(&m.scale(-1.0)),
            Some(&d),
            Some(&CsrMatrix::zeros(split.n_lambda, split.n_lambda)),
        ]])
        .map_err(|e| e.to_string())?;
        if g_rows.add(1.0, &g_expect, -1.0).map_err(|e| e.to_string())?.max_abs() != 0.0 {
            return Err("multiplier rows of A differ from [0, -M, D, 0]".into());
        }
        let (dtilde, t) = mortar::factor_block_tridiag(&d).map_err(|e| e.to_string())?;
        let coarse_nodes = (0..split.n_coarse()).map(|i| i / 2).collect();
        Ok(Self {
            a,
            rhs,
            split,
            d,
            m,
            dtilde,
            t,
            coarse_nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.split.dim()
    }

    /// Stiffness block over the displacement unknowns.
    pub fn k(&self) -> CsrMatrix {
        let r = self.split.displacement();
        self.a.submatrix(r.clone(), r)
    }

    /// Constraint matrix `G` (multiplier rows, displacement columns).
    pub fn g(&self) -> CsrMatrix {
        self.a.submatrix(self.split.lambda(), self.split.displacement())
    }

    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> CsrMatrix {
        self.a.submatrix(rows, cols)
    }

    /// `D⁻¹ f = T⁻¹ D̃⁻¹ f`
    pub fn solve_d(&self, f: &[f64]) -> Result<Vec<f64>, SparseError> {
        Ok(self.t.apply_inverse(&self.dtilde.solve(f)?))
    }

    /// `D⁻ᵀ f = D̃⁻ᵀ T f`
    pub fn solve_dt(&self, f: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.dtilde.solve_transpose(&self.t.apply(f))
    }
}

/// Parsed contents of `manifest.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dim: usize,
    pub split: CfSplit,
}

const MANIFEST: &str = "manifest.txt";

pub fn parse_manifest(text: &str) -> Result<Manifest, FormatError> {
    let err = |line: usize, msg: String| FormatError::new(MANIFEST, Some(line), msg);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, "tlamg-system 1")) => {}
        Some((ln, other)) => return Err(err(ln, format!("expected 'tlamg-system 1', found '{other}'"))),
        None => return Err(FormatError::new(MANIFEST, None, "empty manifest")),
    }
    let (ln, dim_line) = lines
        .next()
        .ok_or_else(|| FormatError::new(MANIFEST, None, "missing 'dim' line"))?;
    let dim = match dim_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["dim", n] => n
            .parse::<usize>()
            .map_err(|_| err(ln, format!("invalid dimension '{n}'")))?,
        _ => return Err(err(ln, "expected 'dim <n>'".into())),
    };
    let mut sizes = [0usize; 4];
    let mut cursor = 0usize;
    for (slot, name) in ["interior", "master", "slave", "lambda"].iter().enumerate() {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| FormatError::new(MANIFEST, None, format!("missing '{name}' range")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != *name {
            return Err(err(ln, format!("expected '{name} <start> <end>'")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(ln, format!("invalid index '{s}'")))
        };
        let (s, e) = (parse(toks[1])?, parse(toks[2])?);
        if e < s {
            return Err(err(ln, format!("{name} range {s}..{e} is reversed")));
        }
        if s < cursor {
            return Err(err(ln, format!("{name} range {s}..{e} overlaps the previous range")));
        }
        if s > cursor {
            return Err(err(ln, format!("gap before {name} range: {cursor}..{s} is unassigned")));
        }
        sizes[slot] = e - s;
        cursor = e;
    }
    if let Some((ln, l)) = lines.next() {
        return Err(err(ln, format!("unexpected line '{l}'")));
    }
    if cursor != dim {
        return Err(FormatError::new(
            MANIFEST,
            None,
            format!("ranges cover 0..{cursor} but dim is {dim}"),
        ));
    }
    let split = CfSplit {
        n_interior: sizes[0],
        n_master: sizes[1],
        n_slave: sizes[2],
        n_lambda: sizes[3],
    };
    if split.n_slave != split.n_lambda {
        return Err(FormatError::new(
            MANIFEST,
            None,
            "slave and lambda ranges must have equal length",
        ));
    }
    Ok(Manifest { dim, split })
}

pub fn write_manifest(split: &CfSplit) -> String {
    let s = split;
    format!(
        "tlamg-system 1\ndim {}\ninterior {} {}\nmaster {} {}\nslave {} {}\nlambda {} {}\n",
        s.dim(),
        s.interior().start,
        s.interior().end,
        s.master().start,
        s.master().end,
        s.slave().start,
        s.slave().end,
        s.lambda().start,
        s.lambda().end
    )
}

/// File names read by [`import_system`].
pub const SYSTEM_FILES: [&str; 5] = ["A.mtx", "D.mtx", "M.mtx", "rhs.mtx", MANIFEST];

/// Builds a system from in-memory file contents keyed by file name.
pub fn import_from_sources(files: &HashMap<&str, &str>) -> Result<SaddleSystem, FormatError> {
    let get = |name: &str| {
        files
            .get(name)
            .copied()
            .ok_or_else(|| FormatError::new(name, None, "file missing"))
    };
    let wrap = |name: &str| {
        let name = name.to_string();
        move |e: mm::MmError| FormatError::new(&name, e.line(), e.to_string())
    };
    let manifest = parse_manifest(get(MANIFEST)?)?;
    let a = mm::parse_matrix(get("A.mtx")?).map_err(wrap("A.mtx"))?;
    let d = mm::parse_matrix(get("D.mtx")?).map_err(wrap("D.mtx"))?;
    let m = mm::parse_matrix(get("M.mtx")?).map_err(wrap("M.mtx"))?;
    let rhs = mm::parse_vector(get("rhs.mtx")?).map_err(wrap("rhs.mtx"))?;
    if a.shape() != (manifest.dim, manifest.dim) {
        return Err(FormatError::new(
            "A.mtx",
            None,
            format!("shape {:?} does not match manifest dim {}", a.shape(), manifest.dim),
        ));
    }
    SaddleSystem::from_parts(a, rhs, manifest.split, d, m)
        .map_err(|msg| FormatError::new(MANIFEST, None, msg))
}

pub fn import_system(dir: &Path) -> Result<SaddleSystem, SystemError> {
    let mut contents = Vec::with_capacity(SYSTEM_FILES.len());
    for name in SYSTEM_FILES {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|source| SystemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        contents.push((name, text));
    }
    let files: HashMap<&str, &str> = contents.iter().map(|(n, t)| (*n, t.as_str())).collect();
    Ok(import_from_sources(&files)?)
}

pub fn export_system(sys: &SaddleSystem, dir: &Path) -> Result<(), SystemError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SystemError::Io {
            path: path.clone(),
            source,
        }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| {
        let path = dir.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(io(&path))?;
        fs::write(&path, buf).map_err(io(&path))
    };
    write("A.mtx", &|b| mm::write_matrix(b, &sys.a, false))?;
    write("D.mtx", &|b| mm::write_matrix(b, &sys.d, false))?;
    write("M.mtx", &|b| mm::write_matrix(b, &sys.m, false))?;
    write("K.mtx", &|b| mm::write_matrix(b, &sys.k(), false))?;
    write("G.mtx", &|b| mm::write_matrix(b, &sys.g(), false))?;
    write("rhs.mtx", &|b| mm::write_vector(b, &sys.rhs))?;
    write(MANIFEST, &|b| {
        b.extend_from_slice(write_manifest(&sys.split).as_bytes());
        Ok(())
    })?;
    Ok(())
}
