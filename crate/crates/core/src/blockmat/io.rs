//! Text format: a header line `n d`, then `n·d` rows of `n·d` space-separated
//! floats. Values are written with 17 significant digits so they round-trip.

use std::io::{BufRead, Write};

use super::BlockMatrix;
use crate::error::{Result, SyncError};

const SYMMETRY_TOL: f64 = 1e-9;

pub fn write_block_matrix<W: Write>(a: &BlockMatrix, mut out: W) -> Result<()> {
    let dim = a.dim();
    writeln!(out, "{} {}", a.n(), a.d())?;
    let mut line = String::with_capacity(dim * 24);
    for r in 0..dim {
        line.clear();
        for c in 0..dim {
            if c > 0 {
                line.push(' ');
            }
            push_float(&mut line, a.entry(r, c));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn push_float(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(line, "{v:.16e}");
}

/// Reads the text format, checks symmetry to 1e-9 and mirrors the upper
/// triangle so the result is exactly symmetric.
pub fn read_block_matrix<R: BufRead>(input: R) -> Result<BlockMatrix> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| SyncError::Parse("empty matrix file".into()))??;
    let mut fields = header.split_whitespace();
    let n = parse_usize(fields.next(), "n")?;
    let d = parse_usize(fields.next(), "d")?;
    if fields.next().is_some() || n == 0 || d == 0 {
        return Err(SyncError::Parse(format!("bad matrix header {header:?}")));
    }
    let dim = n * d;
    let mut data = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        let line = lines.next().ok_or_else(|| SyncError::Parse(format!("expected {dim} rows, found {r}")))??;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| SyncError::Parse(format!("row {}: bad number {tok:?}", r + 1)))?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(SyncError::Parse(format!("row {} has {} entries, expected {dim}", r + 1, data.len() - before)));
        }
    }
    for r in 0..dim {
        for c in (r + 1)..dim {
            let (upper, lower) = (data[r * dim + c], data[c * dim + r]);
            let scale = 1.0_f64.max(upper.abs()).max(lower.abs());
            if (upper - lower).abs() > SYMMETRY_TOL * scale {
                return Err(SyncError::Asymmetric { row: r, col: c, diff: (upper - lower).abs() });
            }
            data[c * dim + r] = upper;
        }
    }
    BlockMatrix::from_dense(n, d, data)
}

pub(crate) fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| SyncError::Parse(format!("missing {what} in header")))?
        .parse()
        .map_err(|_| SyncError::Parse(format!("{what} is not a non-negative integer")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmat::Mat;

    #[test]
    fn round_trip_is_exact() {
        let a = BlockMatrix::from_upper_blocks(2, 2, |i, j| {
            Mat::from_fn(2, 2, |r, c| {
                (1.0 + i as f64) / 3.0 + (j as f64).sqrt() - (r * c) as f64 * 1e-17 + 0.1 * (r + c) as f64
            })
        });
        let mut buf = Vec::new();
        write_block_matrix(&a, &mut buf).unwrap();
        let back = read_block_matrix(buf.as_slice()).unwrap();
        assert_eq!(a, back);
        assert!(String::from_utf8(buf).unwrap().starts_with("2 2\n"));
    }

    #[test]
    fn small_asymmetry_is_repaired_large_is_rejected() {
        let ok = "1 2\n1 0.5\n0.5000000000001 2\n";
        let a = read_block_matrix(ok.as_bytes()).unwrap();
        assert_eq!(a.entry(1, 0), 0.5);
        let bad = "1 2\n1 0.5\n0.6 2\n";
        assert!(matches!(read_block_matrix(bad.as_bytes()), Err(SyncError::Asymmetric { .. })));
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_block_matrix("".as_bytes()).is_err());
        assert!(read_block_matrix("1 2\n1 0\n".as_bytes()).is_err());
        assert!(read_block_matrix("1 2\n1 0 3\n0 1\n".as_bytes()).is_err());
        assert!(read_block_matrix("1 x\n".as_bytes()).is_err());
    }
}
