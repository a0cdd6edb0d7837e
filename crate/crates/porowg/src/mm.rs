//! MatrixMarket coordinate-format import/export (1-based indices, exact
//! decimal round-trip of binary doubles via shortest-roundtrip
//! formatting).

use crate::sparse::CsrMatrix;
use crate::{Error, Result};
use std::io::{BufRead, Write};
use std::path::Path;

/// Write `m` in coordinate format. With `symmetric = true` only the lower
/// triangle is stored under the `symmetric` qualifier (caller asserts the
/// matrix is symmetric).
pub fn write_matrix_market(m: &CsrMatrix, symmetric: bool, w: &mut dyn Write) -> Result<()> {
    let kind = if symmetric { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    let mut entries = Vec::new();
    for i in 0..m.nrows() {
        for (j, v) in m.row_iter(i) {
            if !symmetric || j <= i {
                entries.push((i, j, v));
            }
        }
    }
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn write_matrix_market_file(path: &Path, m: &CsrMatrix, symmetric: bool) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix_market(m, symmetric, &mut f)
}

/// Read a real coordinate MatrixMarket matrix; `symmetric` storage is
/// mirrored into a full matrix.
pub fn read_matrix_market(r: &mut dyn BufRead) -> Result<CsrMatrix> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))?
        .map_err(Error::Io)?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 5 || !h[0].starts_with("%%MatrixMarket") || h[1] != "matrix" {
        return Err(Error::Parse(format!("bad MatrixMarket header: {header}")));
    }
    if h[2] != "coordinate" || h[3] != "real" {
        return Err(Error::Parse(format!(
            "unsupported MatrixMarket kind: {header}"
        )));
    }
    let symmetric = match h[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::Parse(format!("unsupported symmetry '{other}'"))),
    };
    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line.map_err(Error::Io)?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some(line);
        break;
    }
    let size_line = size_line.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|s| s.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::Parse(format!("bad size line: {size_line}")));
    }
    let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut seen = 0usize;
    for line in lines {
        let line = line.map_err(Error::Io)?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let i: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad entry line: {t}")))?
            .parse()
            .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
        let j: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad entry line: {t}")))?
            .parse()
            .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
        let v: f64 = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad entry line: {t}")))?
            .parse()
            .map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(Error::Parse(format!("entry out of bounds: {t}")));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Parse(format!(
            "expected {nnz} entries, found {seen}"
        )));
    }
    Ok(CsrMatrix::from_triplets(nrows, ncols, &triplets))
}

pub fn read_matrix_market_file(path: &Path) -> Result<CsrMatrix> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_matrix_market(&mut f)
}
