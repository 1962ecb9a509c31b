//! Coordinate-format Matrix Market I/O for real general matrices.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write<T: Real, W: Write>(a: &CsrMatrix<T>, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v.to_f64_lossy())?;
        }
    }
    Ok(())
}

pub fn read<T: Real, R: BufRead>(input: R) -> Result<CsrMatrix<T>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::MatrixMarket("empty input".into()))??;
    let lower = header.to_ascii_lowercase();
    if !lower.starts_with("%%matrixmarket") || !lower.contains("coordinate") || !lower.contains("real") {
        return Err(Error::MatrixMarket(format!("unsupported header: {header}")));
    }
    let symmetric = lower.contains("symmetric");

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut stored = 0usize;
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(Error::MatrixMarket(format!("bad size line: {trimmed}")));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::MatrixMarket(format!("{s}: {e}")));
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                triplets.reserve(dims.2);
                size = Some(dims);
            }
            Some((m, n, _)) => {
                if fields.len() != 3 {
                    return Err(Error::MatrixMarket(format!("bad entry line: {trimmed}")));
                }
                let i: usize = fields[0].parse().map_err(|e| Error::MatrixMarket(format!("{trimmed}: {e}")))?;
                let j: usize = fields[1].parse().map_err(|e| Error::MatrixMarket(format!("{trimmed}: {e}")))?;
                let v: f64 = fields[2].parse().map_err(|e| Error::MatrixMarket(format!("{trimmed}: {e}")))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(Error::MatrixMarket(format!("entry ({i}, {j}) outside {m}x{n}")));
                }
                stored += 1;
                triplets.push((i - 1, j - 1, T::lit(v)));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, T::lit(v)));
                }
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    if stored != nnz {
        return Err(Error::MatrixMarket(format!("expected {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(m, n, &triplets)
}
