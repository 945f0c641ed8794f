//! Group elements: orthogonal matrices and permutation matrices.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::blockmat::Mat;
use crate::error::{Result, SyncError};

pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Orthogonal,
    Permutation,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKind::Orthogonal => "orthogonal",
            GroupKind::Permutation => "permutation",
        })
    }
}

impl FromStr for GroupKind {
    type Err = SyncError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(GroupKind::Orthogonal),
            "permutation" => Ok(GroupKind::Permutation),
            other => Err(SyncError::Parse(format!("unknown group kind {other:?}"))),
        }
    }
}

/// A permutation `σ` of `0..d`, as the matrix `R` with `R[r, σ(r)] = 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(d: usize) -> Self {
        Self((0..d).collect())
    }

    pub fn from_word(word: Vec<usize>) -> Result<Self> {
        let d = word.len();
        let mut seen = vec![false; d];
        for &w in &word {
            if w >= d || seen[w] {
                return Err(SyncError::KindMismatch(format!("{word:?} is not a permutation of 0..{d}")));
            }
            seen[w] = true;
        }
        Ok(Self(word))
    }

    /// Reads a 0/1 matrix with exactly one unit entry per row and column.
    pub fn from_mat(m: &Mat) -> Result<Self> {
        let d = m.rows();
        if m.cols() != d {
            return Err(SyncError::KindMismatch("permutation matrices are square".into()));
        }
        let mut word = Vec::with_capacity(d);
        for r in 0..d {
            let row = m.row(r);
            if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(SyncError::KindMismatch(format!("row {r} has entries outside {{0, 1}}")));
            }
            let ones: Vec<usize> = row.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(c, _)| c).collect();
            if ones.len() != 1 {
                return Err(SyncError::KindMismatch(format!("row {r} has {} unit entries", ones.len())));
            }
            word.push(ones[0]);
        }
        Self::from_word(word)
    }

    pub fn word(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_mat(&self) -> Mat {
        let d = self.0.len();
        let mut m = Mat::zeros(d, d);
        for (r, &c) in self.0.iter().enumerate() {
            m[(r, c)] = 1.0;
        }
        m
    }
}

/// An ordered list of `n` group elements of size `d × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTuple {
    n: usize,
    d: usize,
    kind: GroupKind,
    elements: Vec<Mat>,
}

impl GroupTuple {
    /// Validates orthogonality (to 1e-10) and, for permutations, the 0/1 pattern.
    pub fn new(kind: GroupKind, elements: Vec<Mat>) -> Result<Self> {
        let n = elements.len();
        let d = elements.first().map_or(0, Mat::rows);
        if n == 0 || d == 0 {
            return Err(SyncError::DimensionMismatch("a group tuple needs n, d >= 1".into()));
        }
        let eye = Mat::identity(d);
        for (i, g) in elements.iter().enumerate() {
            if g.shape() != (d, d) {
                return Err(SyncError::DimensionMismatch(format!("element {i} is not {d}x{d}")));
            }
            let defect = g.t_matmul(g).max_abs_diff(&eye);
            if !(defect <= ORTHOGONALITY_TOL) {
                return Err(SyncError::KindMismatch(format!("element {i} is not orthogonal (defect {defect:.2e})")));
            }
            if kind == GroupKind::Permutation {
                Permutation::from_mat(g)?;
            }
        }
        Ok(Self { n, d, kind, elements })
    }

    pub fn identity(n: usize, d: usize, kind: GroupKind) -> Self {
        Self { n, d, kind, elements: vec![Mat::identity(d); n] }
    }

    pub fn from_permutations(perms: &[Permutation]) -> Result<Self> {
        Self::new(GroupKind::Permutation, perms.iter().map(Permutation::to_mat).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn element(&self, i: usize) -> &Mat {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[Mat] {
        &self.elements
    }

    pub fn is_identity(&self) -> bool {
        let eye = Mat::identity(self.d);
        self.elements.iter().all(|g| *g == eye)
    }

    /// `G_a · G_iᵀ`.
    pub fn relative(&self, anchor: usize, i: usize) -> Mat {
        self.elements[anchor].matmul_t(&self.elements[i])
    }

    /// Right-multiplies every element by `q` (a common gauge).
    pub fn right_mul(&self, q: &Mat) -> Result<Self> {
        Self::new(self.kind, self.elements.iter().map(|g| g.matmul(q)).collect())
    }

    pub fn check_compatible(&self, other: &GroupTuple) -> Result<()> {
        if (self.n, self.d) != (other.n, other.d) {
            return Err(SyncError::DimensionMismatch(format!(
                "tuples have shapes (n={}, d={}) and (n={}, d={})",
                self.n, self.d, other.n, other.d
            )));
        }
        Ok(())
    }
}

/// Text format: header `n d kind`, then `n·d` lines of `d` floats (elements stacked).
pub fn write_group_tuple<W: Write>(g: &GroupTuple, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {}", g.n, g.d, g.kind)?;
    let mut line = String::new();
    for e in &g.elements {
        for r in 0..g.d {
            line.clear();
            for (c, &v) in e.row(r).iter().enumerate() {
                if c > 0 {
                    line.push(' ');
                }
                crate::blockmat::io_push_float(&mut line, v);
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_group_tuple<R: BufRead>(input: R) -> Result<GroupTuple> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| SyncError::Parse("empty tuple file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(SyncError::Parse(format!("bad tuple header {header:?}")));
    }
    let n: usize = fields[0].parse().map_err(|_| SyncError::Parse("n is not an integer".into()))?;
    let d: usize = fields[1].parse().map_err(|_| SyncError::Parse("d is not an integer".into()))?;
    let kind: GroupKind = fields[2].parse()?;
    let mut elements = Vec::with_capacity(n);
    for i in 0..n {
        let mut data = Vec::with_capacity(d * d);
        for r in 0..d {
            let line = lines
                .next()
                .ok_or_else(|| SyncError::Parse(format!("element {} is missing row {}", i + 1, r + 1)))??;
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|_| SyncError::Parse(format!("bad number {tok:?}")))?);
            }
            if data.len() - before != d {
                return Err(SyncError::Parse(format!("element {} row {} needs {d} entries", i + 1, r + 1)));
            }
        }
        elements.push(Mat::new(d, d, data));
    }
    GroupTuple::new(kind, elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_matrix_convention() {
        let p = Permutation::from_word(vec![2, 0, 1]).unwrap();
        let m = p.to_mat();
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(Permutation::from_mat(&m).unwrap(), p);
        assert!(Permutation::from_word(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_mat(&Mat::identity(3).scale(0.5)).is_err());
    }

    #[test]
    fn tuple_validation() {
        assert!(GroupTuple::new(GroupKind::Orthogonal, vec![Mat::identity(2).scale(1.1)]).is_err());
        let rot = Mat::from_rows(&[&[0.6, -0.8], &[0.8, 0.6]]);
        assert!(GroupTuple::new(GroupKind::Orthogonal, vec![rot.clone()]).is_ok());
        assert!(GroupTuple::new(GroupKind::Permutation, vec![rot]).is_err());
    }

    #[test]
    fn tuple_file_round_trip() {
        let rot = Mat::from_rows(&[&[0.6, -0.8], &[0.8, 0.6]]);
        let g = GroupTuple::new(GroupKind::Orthogonal, vec![rot, Mat::identity(2)]).unwrap();
        let mut buf = Vec::new();
        write_group_tuple(&g, &mut buf).unwrap();
        assert!(buf.starts_with(b"2 2 orthogonal\n"));
        assert_eq!(read_group_tuple(buf.as_slice()).unwrap(), g);
        assert!(read_group_tuple("1 2 cyclic\n1 0\n0 1\n".as_bytes()).is_err());
    }
}
