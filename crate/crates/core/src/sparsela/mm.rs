//! MatrixMarket coordinate (sparse matrix) and array (dense vector) I/O.
//!
//! Supported headers: `matrix coordinate {real|integer|pattern} {general|symmetric}`
//! and `matrix array {real|integer} general` with a single column. Indices are
//! 1-based. Values are written in shortest round-trip form, so write → read
//! reproduces every entry bit for bit.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::CsrMatrix;

/// Largest accepted row or column count.
pub const MAX_DIM: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum MmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl MmError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        MmError::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            MmError::Parse { line, .. } => Some(*line),
            MmError::Io(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

struct Header {
    format: Format,
    field: Field,
    symmetric: bool,
}

fn parse_header(line: &str) -> Result<Header, MmError> {
    let toks: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(MmError::at(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match toks[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        f => return Err(MmError::at(1, format!("unsupported format '{f}'"))),
    };
    let field = match toks[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" if format == Format::Coordinate => Field::Pattern,
        f => return Err(MmError::at(1, format!("unsupported field '{f}'"))),
    };
    let symmetric = match toks[4].as_str() {
        "general" => false,
        "symmetric" if format == Format::Coordinate => true,
        s => return Err(MmError::at(1, format!("unsupported symmetry '{s}'"))),
    };
    Ok(Header {
        format,
        field,
        symmetric,
    })
}

/// Yields `(line_number, trimmed_line)` for data lines, skipping comments and blanks.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize, MmError> {
    let tok = tok.ok_or_else(|| MmError::at(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| MmError::at(line, format!("invalid {what} '{tok}'")))
}

fn parse_value(tok: Option<&str>, field: Field, line: usize) -> Result<f64, MmError> {
    if field == Field::Pattern {
        return Ok(1.0);
    }
    let tok = tok.ok_or_else(|| MmError::at(line, "missing value"))?;
    let v: f64 = match field {
        Field::Integer => tok
            .parse::<i64>()
            .map(|i| i as f64)
            .map_err(|_| MmError::at(line, format!("invalid integer '{tok}'")))?,
        _ => tok
            .parse()
            .map_err(|_| MmError::at(line, format!("invalid number '{tok}'")))?,
    };
    if !v.is_finite() {
        return Err(MmError::at(line, "non-finite value"));
    }
    Ok(v)
}

fn check_dim(d: usize, line: usize) -> Result<usize, MmError> {
    if d > MAX_DIM {
        return Err(MmError::at(line, format!("dimension {d} exceeds limit {MAX_DIM}")));
    }
    Ok(d)
}

fn ensure_no_trailing<'a>(mut it: impl Iterator<Item = &'a str>, line: usize) -> Result<(), MmError> {
    if it.next().is_some() {
        return Err(MmError::at(line, "unexpected trailing token"));
    }
    Ok(())
}

/// Parses a coordinate-format matrix. Symmetric files must store only the
/// lower triangle; the upper triangle is mirrored on read.
pub fn parse_matrix(text: &str) -> Result<CsrMatrix, MmError> {
    let first = text.lines().next().ok_or_else(|| MmError::at(1, "empty file"))?;
    let header = parse_header(first)?;
    if header.format != Format::Coordinate {
        return Err(MmError::at(1, "expected coordinate format for a sparse matrix"));
    }
    let mut lines = data_lines(text);
    let (sl, size) = lines.next().ok_or_else(|| MmError::at(2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let nrows = check_dim(parse_usize(toks.next(), sl, "row count")?, sl)?;
    let ncols = check_dim(parse_usize(toks.next(), sl, "column count")?, sl)?;
    let nnz = parse_usize(toks.next(), sl, "entry count")?;
    ensure_no_trailing(toks, sl)?;
    if header.symmetric && nrows != ncols {
        return Err(MmError::at(sl, "symmetric matrix must be square"));
    }
    if nrows.checked_mul(ncols).is_some_and(|cap| nnz > cap) {
        return Err(MmError::at(sl, "entry count exceeds matrix size"));
    }
    let mut triplets = Vec::with_capacity(nnz.min(1 << 20));
    let mut seen = 0usize;
    let mut last_line = sl;
    for (ln, l) in lines {
        last_line = ln;
        if seen == nnz {
            return Err(MmError::at(ln, "more entries than declared"));
        }
        let mut toks = l.split_whitespace();
        let i = parse_usize(toks.next(), ln, "row index")?;
        let j = parse_usize(toks.next(), ln, "column index")?;
        if i == 0 || i > nrows || j == 0 || j > ncols {
            return Err(MmError::at(ln, format!("index ({i}, {j}) out of range")));
        }
        let v = parse_value(toks.next(), header.field, ln)?;
        ensure_no_trailing(toks, ln)?;
        let (i, j) = (i - 1, j - 1);
        if header.symmetric {
            if j > i {
                return Err(MmError::at(ln, "symmetric file stores an upper-triangle entry"));
            }
            if i != j {
                triplets.push((j, i, v));
            }
        }
        triplets.push((i, j, v));
        seen += 1;
    }
    if seen != nnz {
        return Err(MmError::at(
            last_line,
            format!("expected {nnz} entries, found {seen}"),
        ));
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets).map_err(|e| MmError::at(sl, e.to_string()))
}

/// Parses a single-column array-format vector.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, MmError> {
    let first = text.lines().next().ok_or_else(|| MmError::at(1, "empty file"))?;
    let header = parse_header(first)?;
    if header.format != Format::Array {
        return Err(MmError::at(1, "expected array format for a vector"));
    }
    let mut lines = data_lines(text);
    let (sl, size) = lines.next().ok_or_else(|| MmError::at(2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let n = check_dim(parse_usize(toks.next(), sl, "row count")?, sl)?;
    let m = parse_usize(toks.next(), sl, "column count")?;
    ensure_no_trailing(toks, sl)?;
    if m != 1 {
        return Err(MmError::at(sl, "vector must have exactly one column"));
    }
    let mut out = Vec::with_capacity(n.min(1 << 20));
    let mut last_line = sl;
    for (ln, l) in lines {
        last_line = ln;
        if out.len() == n {
            return Err(MmError::at(ln, "more entries than declared"));
        }
        let mut toks = l.split_whitespace();
        out.push(parse_value(toks.next(), header.field, ln)?);
        ensure_no_trailing(toks, ln)?;
    }
    if out.len() != n {
        return Err(MmError::at(
            last_line,
            format!("expected {n} entries, found {}", out.len()),
        ));
    }
    Ok(out)
}

pub fn read_matrix(mut r: impl BufRead) -> Result<CsrMatrix, MmError> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    parse_matrix(&s)
}

pub fn read_vector(mut r: impl BufRead) -> Result<Vec<f64>, MmError> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    parse_vector(&s)
}

/// Writes `a` in coordinate format. With `symmetric`, only the lower triangle
/// is written; the caller is responsible for `a` actually being symmetric.
pub fn write_matrix(mut w: impl Write, a: &CsrMatrix, symmetric: bool) -> io::Result<()> {
    let sym = if symmetric { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate real {sym}")?;
    let keep = |i: usize, j: usize| !symmetric || j <= i;
    let nnz = a.triplets().filter(|&(i, j, _)| keep(i, j)).count();
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), nnz)?;
    for (i, j, v) in a.triplets() {
        if keep(i, j) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

pub fn write_vector(mut w: impl Write, x: &[f64]) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", x.len())?;
    for v in x {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_string(f: impl FnOnce(&mut Vec<u8>)) -> String {
        let mut buf = Vec::new();
        f(&mut buf);
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn general_roundtrip_is_exact() {
        let a = CsrMatrix::from_dense(
            2,
            3,
            &[0.1, 0.0, -1.0 / 3.0, 0.0, 1e-300, 12345.678901234567],
        );
        let s = to_string(|b| write_matrix(b, &a, false).unwrap());
        assert_eq!(parse_matrix(&s).unwrap(), a);
    }

    #[test]
    fn symmetric_mirrors_lower_triangle() {
        let a = CsrMatrix::from_dense(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, 0.5, 0.0, 0.5, 3.0]);
        let s = to_string(|b| write_matrix(b, &a, true).unwrap());
        assert!(s.lines().nth(1).unwrap().ends_with(" 5"));
        assert_eq!(parse_matrix(&s).unwrap(), a);
    }

    #[test]
    fn vector_roundtrip() {
        let x = vec![1.0, -0.0, f64::MIN_POSITIVE, 1.0 / 7.0];
        let s = to_string(|b| write_vector(b, &x).unwrap());
        let y = parse_vector(&s).unwrap();
        assert_eq!(x.len(), y.len());
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.0\n3 1 2.0\n";
        assert_eq!(parse_matrix(bad).unwrap_err().line(), Some(5));
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(parse_matrix(short).is_err());
        let upper = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n";
        assert_eq!(parse_matrix(upper).unwrap_err().line(), Some(3));
        assert!(parse_matrix("%%MatrixMarket matrix coordinate complex general\n").is_err());
        assert!(parse_matrix("").is_err());
        let huge = "%%MatrixMarket matrix coordinate real general\n999999999999 1 0\n";
        assert!(parse_matrix(huge).is_err());
    }

    #[test]
    fn pattern_and_integer_fields() {
        let p = "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 1\n2 1\n";
        assert_eq!(parse_matrix(p).unwrap().to_dense(), vec![1.0, 0.0, 1.0, 0.0]);
        let i = "%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 -3\n";
        assert_eq!(parse_matrix(i).unwrap().get(0, 0), -3.0);
    }
}
