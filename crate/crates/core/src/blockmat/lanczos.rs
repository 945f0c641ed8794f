//! Block Lanczos with full reorthogonalization and thick restarts for the
//! largest-algebraic eigenpairs of a symmetric operator.
//!
//! Each step extends the Krylov basis by the residual block of the current top
//! Ritz pairs (equivalent to the block three-term recurrence in exact arithmetic),
//! orthogonalized twice against the whole basis. The projected matrix is kept
//! explicitly and diagonalized with [`sym_eigen`]. When the basis reaches its
//! size cap it is compressed to the leading Ritz vectors and the iteration
//! continues from their residuals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dense::{dot, Mat};
use super::eigh::sym_eigen;
use crate::error::{Result, SyncError};

/// Start-block seed; combined with the operator dimensions so identical
/// problems always start from identical blocks.
pub const LANCZOS_START_SEED: u64 = 0x6A09_E667_F3BC_C908;

/// A symmetric linear operator on `R^dim`.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;

    /// `A·X` for a `dim × b` block `X`.
    fn apply(&self, x: &Mat) -> Mat;
}

/// `-A`, used to reach the bottom of the spectrum with the same solver.
pub struct Negated<'a, O: SymOperator>(pub &'a O);

impl<O: SymOperator> SymOperator for Negated<'_, O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self.0.apply(x).scale(-1.0)
    }
}

impl SymOperator for Mat {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self.matmul(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Convergence when `‖A·Y − Y·Θ‖_F ≤ tol·‖A‖` for the wanted unit Ritz vectors.
    pub tol: f64,
    /// Maximum number of block operator applications.
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000 }
    }
}

/// Output of [`lanczos_top`]: unit-norm eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Mat,
    pub residual: f64,
    pub iterations: usize,
    /// Largest |Ritz value| seen; a lower bound on ‖A‖ used to scale `tol`.
    pub norm_estimate: f64,
}

/// The `k` largest-algebraic eigenpairs of `op`, values non-increasing.
pub fn lanczos_top<O: SymOperator + ?Sized>(op: &O, k: usize, opts: &EigenOptions) -> Result<RitzPairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(SyncError::DimensionMismatch(format!("requested {k} eigenpairs of a {n}-dimensional operator")));
    }
    if !(opts.tol > 0.0) {
        return Err(SyncError::DimensionMismatch(format!("tolerance must be positive, got {}", opts.tol)));
    }

    let block = k;
    let max_basis = n.min((20 * block).max(64));
    let keep_on_restart = k.max(max_basis / 2).min(max_basis.saturating_sub(block)).max(k);

    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_START_SEED ^ ((n as u64) << 24) ^ (k as u64));
    let start = Mat::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
    let mut basis = orthonormal_extension(&Mat::zeros(n, 0), start, &mut rng);
    let mut images = op.apply(&basis);
    let mut projected = basis.t_matmul(&images).symmetrize();
    let mut iterations = 1;
    let mut norm_estimate = 0.0_f64;

    loop {
        let (theta, s) = sym_eigen(&projected);
        norm_estimate = theta.iter().fold(norm_estimate, |m, t| m.max(t.abs()));

        let s_top = s.col_block(0, k);
        let ritz = basis.matmul(&s_top);
        let mut residual_block = images.matmul(&s_top);
        for r in 0..n {
            let row = residual_block.row_mut(r);
            for (c, value) in row.iter_mut().enumerate() {
                *value -= theta[c] * ritz[(r, c)];
            }
        }
        let residual = residual_block.frobenius_norm();

        if residual <= opts.tol * norm_estimate {
            return Ok(RitzPairs { values: theta[..k].to_vec(), vectors: ritz, residual, iterations, norm_estimate });
        }
        if iterations >= opts.max_iter || basis.cols() == n {
            return Err(SyncError::NonConvergence {
                iterations,
                residual: residual / norm_estimate.max(f64::MIN_POSITIVE),
            });
        }

        if basis.cols() + block > max_basis && basis.cols() > keep_on_restart {
            let s_keep = s.col_block(0, keep_on_restart);
            basis = basis.matmul(&s_keep);
            images = images.matmul(&s_keep);
            projected = Mat::diag(&theta[..keep_on_restart]);
        }

        let fresh = orthonormal_extension(&basis, residual_block, &mut rng);
        if fresh.cols() == 0 {
            return Err(SyncError::NonConvergence {
                iterations,
                residual: residual / norm_estimate.max(f64::MIN_POSITIVE),
            });
        }
        let fresh_images = op.apply(&fresh);
        iterations += 1;

        let coupling = basis.t_matmul(&fresh_images);
        let corner = fresh.t_matmul(&fresh_images).symmetrize();
        projected = extend_projection(&projected, &coupling, &corner);
        basis = basis.hcat(&fresh);
        images = images.hcat(&fresh_images);
    }
}

fn extend_projection(t: &Mat, coupling: &Mat, corner: &Mat) -> Mat {
    let old = t.rows();
    let add = corner.rows();
    let size = old + add;
    Mat::from_fn(size, size, |r, c| match (r < old, c < old) {
        (true, true) => t[(r, c)],
        (true, false) => coupling[(r, c - old)],
        (false, true) => coupling[(c, r - old)],
        (false, false) => corner[(r - old, c - old)],
    })
}

/// Orthonormalizes the columns of `candidates` against `basis` and each other.
/// Columns that collapse are replaced by random directions; columns are
/// dropped only when the basis already spans the whole space.
fn orthonormal_extension(basis: &Mat, candidates: Mat, rng: &mut ChaCha8Rng) -> Mat {
    let n = candidates.rows();
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(candidates.cols());
    let basis_cols: Vec<Vec<f64>> = (0..basis.cols()).map(|j| basis.column(j)).collect();

    for j in 0..candidates.cols() {
        if basis_cols.len() + accepted.len() >= n {
            break;
        }
        let mut v = candidates.column(j);
        let mut attempts = 0;
        loop {
            let before = dot(&v, &v).sqrt();
            for _ in 0..2 {
                for b in basis_cols.iter().chain(accepted.iter()) {
                    let p = dot(&v, b);
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= p * y;
                    }
                }
            }
            let after = dot(&v, &v).sqrt();
            if before > 0.0 && after > 1e-8 * before && after > f64::MIN_POSITIVE {
                v.iter_mut().for_each(|x| *x /= after);
                accepted.push(v);
                break;
            }
            attempts += 1;
            if attempts > 8 {
                break;
            }
            v = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        }
    }
    Mat::from_fn(n, accepted.len(), |r, c| accepted[c][r])
}

/// Spectral norm of a symmetric operator: the larger of `|λ_max|` and `|λ_min|`.
pub fn sym_norm<O: SymOperator>(op: &O, opts: &EigenOptions) -> Result<f64> {
    let top = lanczos_top(op, 1, opts)?.values[0];
    let bottom = -lanczos_top(&Negated(op), 1, opts)?.values[0];
    Ok(top.abs().max(bottom.abs()))
}
