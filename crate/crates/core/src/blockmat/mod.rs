//! Block-structured dense linear algebra.
//!
//! A [`BlockMatrix`] is a symmetric `nd × nd` matrix viewed as an `n × n` grid
//! of `d × d` blocks; a [`TallBlockVector`] is an `nd × d` matrix viewed as a
//! column of `n` blocks. The solver entry point is [`top_d_eigenpairs`].

mod dense;
mod eigh;
mod io;
mod lanczos;
mod svd;

pub use dense::Mat;
pub use eigh::sym_eigen;
pub(crate) use io::push_float as io_push_float;
pub use io::{read_block_matrix, write_block_matrix};
pub use lanczos::{lanczos_top, sym_norm, EigenOptions, Negated, RitzPairs, SymOperator, LANCZOS_START_SEED};
pub use svd::{polar_project, sigma_min, singular_values, spectral_norm, svd, Svd, EXACT_SVD_MAX_DIM};

use crate::error::{Result, SyncError};
use dense::dot;

/// Symmetric `nd × nd` matrix addressed as an `n × n` grid of `d × d` blocks.
#[derive(Clone, PartialEq)]
pub struct BlockMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl BlockMatrix {
    /// Wraps row-major storage; rejects non-finite entries and any asymmetry.
    pub fn from_dense(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        let dim = n * d;
        if n == 0 || d == 0 || data.len() != dim * dim {
            return Err(SyncError::DimensionMismatch(format!(
                "expected {dim}x{dim} storage for n={n}, d={d}, got {} values",
                data.len()
            )));
        }
        for r in 0..dim {
            for c in 0..dim {
                let v = data[r * dim + c];
                if !v.is_finite() {
                    return Err(SyncError::NonFinite { row: r, col: c });
                }
                if c > r {
                    let w = data[c * dim + r];
                    if v != w {
                        return Err(SyncError::Asymmetric { row: r, col: c, diff: (v - w).abs() });
                    }
                }
            }
        }
        Ok(Self { n, d, data })
    }

    /// Builds from a block function evaluated on the upper triangle `i <= j`;
    /// lower blocks are the transposes, so the result is exactly symmetric.
    /// Diagonal blocks are symmetrized from their upper halves.
    pub fn from_upper_blocks(n: usize, d: usize, mut block: impl FnMut(usize, usize) -> Mat) -> Self {
        let dim = n * d;
        let mut data = vec![0.0; dim * dim];
        for i in 0..n {
            for j in i..n {
                let b = block(i, j);
                assert_eq!(b.shape(), (d, d), "block ({i},{j}) has the wrong shape");
                for r in 0..d {
                    for c in 0..d {
                        if i == j && c < r {
                            continue;
                        }
                        let v = b[(r, c)];
                        data[(i * d + r) * dim + j * d + c] = v;
                        data[(j * d + c) * dim + i * d + r] = v;
                    }
                }
            }
        }
        Self { n, d, data }
    }

    /// Copies a dense symmetric matrix whose symmetry is already guaranteed by
    /// construction (e.g. block rows produced independently from the same
    /// deterministic formula).
    pub(crate) fn from_dense_unchecked(n: usize, d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * d * n * d);
        Self { n, d, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.n * self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim() + c]
    }

    pub fn block(&self, i: usize, j: usize) -> Mat {
        let (d, dim) = (self.d, self.dim());
        Mat::from_fn(d, d, |r, c| self.data[(i * d + r) * dim + j * d + c])
    }

    /// `i`-th block column as an `nd × d` matrix.
    pub fn block_column(&self, i: usize) -> TallBlockVector {
        let (d, dim) = (self.d, self.dim());
        let m = Mat::from_fn(dim, d, |r, c| self.data[r * dim + i * d + c]);
        TallBlockVector { n: self.n, d, data: m }
    }

    pub fn to_mat(&self) -> Mat {
        Mat::new(self.dim(), self.dim(), self.data.clone())
    }

    /// Replaces block `(i, j)` and its mirror `(j, i)`.
    pub fn set_block_sym(&mut self, i: usize, j: usize, b: &Mat) {
        let (d, dim) = (self.d, self.dim());
        assert_eq!(b.shape(), (d, d));
        if i == j {
            assert!(b.max_abs_diff(&b.transpose()) == 0.0, "diagonal block must be symmetric");
        }
        for r in 0..d {
            for c in 0..d {
                self.data[(i * d + r) * dim + j * d + c] = b[(r, c)];
                self.data[(j * d + c) * dim + i * d + r] = b[(r, c)];
            }
        }
    }

    /// Entry-wise linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &BlockMatrix, b: f64) -> BlockMatrix {
        assert_eq!((self.n, self.d), (other.n, other.d));
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        BlockMatrix { n: self.n, d: self.d, data }
    }

    /// Spectral norm, via the extreme eigenvalues.
    pub fn norm(&self, opts: &EigenOptions) -> Result<f64> {
        sym_norm(self, opts)
    }
}

impl SymOperator for BlockMatrix {
    fn dim(&self) -> usize {
        BlockMatrix::dim(self)
    }

    fn apply(&self, x: &Mat) -> Mat {
        let dim = BlockMatrix::dim(self);
        assert_eq!(x.rows(), dim, "operand has the wrong number of rows");
        let xt = x.transpose();
        let mut out = Mat::zeros(dim, x.cols());
        for r in 0..dim {
            let a_row = &self.data[r * dim..(r + 1) * dim];
            for c in 0..x.cols() {
                out[(r, c)] = dot(a_row, xt.row(c));
            }
        }
        out
    }
}

impl std::fmt::Debug for BlockMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BlockMatrix(n={}, d={})", self.n, self.d)
    }
}

/// An `nd × d` matrix viewed as `n` stacked `d × d` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct TallBlockVector {
    n: usize,
    d: usize,
    data: Mat,
}

impl TallBlockVector {
    pub fn new(n: usize, d: usize, data: Mat) -> Result<Self> {
        if data.shape() != (n * d, d) {
            return Err(SyncError::DimensionMismatch(format!(
                "tall block vector for n={n}, d={d} needs shape {}x{d}, got {:?}",
                n * d,
                data.shape()
            )));
        }
        if !data.is_finite() {
            return Err(SyncError::NonFinite { row: 0, col: 0 });
        }
        Ok(Self { n, d, data })
    }

    /// Stacks `n` blocks of size `d × d`.
    pub fn from_blocks(blocks: &[Mat]) -> Result<Self> {
        let n = blocks.len();
        let d = blocks.first().map_or(0, Mat::rows);
        let mut data = Vec::with_capacity(n * d * d);
        for b in blocks {
            if b.shape() != (d, d) {
                return Err(SyncError::DimensionMismatch("blocks must all be d x d".into()));
            }
            data.extend_from_slice(b.as_slice());
        }
        Self::new(n, d, Mat::new(n * d, d, data))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_mat(&self) -> &Mat {
        &self.data
    }

    pub fn into_mat(self) -> Mat {
        self.data
    }

    pub fn block(&self, i: usize) -> Mat {
        self.data.row_block(i * self.d, self.d)
    }

    pub fn blocks(&self) -> impl Iterator<Item = Mat> + '_ {
        (0..self.n).map(|i| self.block(i))
    }

    /// Right-multiplies every block by the `d × d` matrix `r`.
    pub fn mul_right(&self, r: &Mat) -> TallBlockVector {
        TallBlockVector { n: self.n, d: self.d, data: self.data.matmul(r) }
    }
}

/// `Z`: `n` stacked copies of `I_d`.
pub fn stack_identity(n: usize, d: usize) -> TallBlockVector {
    let data = Mat::from_fn(n * d, d, |r, c| if r % d == c { 1.0 } else { 0.0 });
    TallBlockVector { n, d, data }
}

/// Top-`d` eigenpairs with the synchronization normalization `ΦᵀΦ = n·I_d`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub phi: TallBlockVector,
    /// Non-increasing.
    pub lambda: Vec<f64>,
    /// Solver-reported `‖AΦ − ΦΛ‖_F` in the scaled normalization.
    pub residual: f64,
    pub iterations: usize,
}

impl EigenBasis {
    pub fn lambda_d(&self) -> f64 {
        *self.lambda.last().expect("eigen basis holds at least one eigenvalue")
    }
}

/// The `d` largest-algebraic eigenpairs of `a`, scaled so `ΦᵀΦ = n·I_d`.
///
/// `a.d()` is the block size and also the number of eigenpairs returned. The
/// residual bound `‖AΦ − ΦΛ‖ ≤ tol·‖A‖` holds for the scaled basis.
pub fn top_d_eigenpairs(a: &BlockMatrix, opts: &EigenOptions) -> Result<EigenBasis> {
    let n = a.n();
    let d = a.d();
    let scale = (n as f64).sqrt();
    let unit_opts = EigenOptions { tol: opts.tol / scale, max_iter: opts.max_iter };
    let ritz = lanczos_top(a, d, &unit_opts)?;
    let phi = TallBlockVector::new(n, d, ritz.vectors.scale(scale))?;
    Ok(EigenBasis { phi, lambda: ritz.values, residual: ritz.residual * scale, iterations: ritz.iterations })
}
