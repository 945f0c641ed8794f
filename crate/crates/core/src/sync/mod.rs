//! Spectral synchronization: top-`d` eigenvectors followed by block-wise
//! rounding, either to the nearest orthogonal matrix or, for permutations,
//! through polar products and a linear assignment.

mod assignment;

pub use assignment::{hungarian, AssignmentProblem};

use rayon::prelude::*;

use crate::blockmat::{polar_project, top_d_eigenpairs, BlockMatrix, EigenBasis, EigenOptions, Mat};
use crate::error::{Result, SyncError};
use crate::models::{GroupKind, GroupTuple};

/// What the estimates approximate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// `Ĝ_i ≈ G_i·Q` for one unknown orthogonal `Q` shared by all `i`.
    Absolute,
    /// `Ĝ_i ≈ G_anchor·G_iᵀ`.
    Relative,
}

#[derive(Clone, Debug)]
pub struct SyncEstimate {
    pub estimates: GroupTuple,
    pub basis: EigenBasis,
    /// 0-based.
    pub anchor: usize,
    pub convention: Convention,
    /// `P(Φ_i)` for every block.
    pub polar_blocks: Vec<Mat>,
}

impl SyncEstimate {
    /// The estimate of `G_b·G_iᵀ`: `Ĝ_b·Ĝ_iᵀ` for absolute estimates and
    /// `Ĝ_bᵀ·Ĝ_i` for relative ones (exact group algebra in both cases).
    pub fn pairwise(&self, b: usize, i: usize) -> Mat {
        let g = &self.estimates;
        match self.convention {
            Convention::Absolute => g.relative(b, i),
            Convention::Relative => g.element(b).t_matmul(g.element(i)),
        }
    }

    /// `M_i = P(Φ_anchor)·P(Φ_i)ᵀ`, the matrix rounded by the permutation solver.
    pub fn rounding_score(&self, i: usize) -> Mat {
        self.polar_blocks[self.anchor].matmul_t(&self.polar_blocks[i])
    }
}

fn polar_blocks(basis: &EigenBasis) -> Vec<Mat> {
    (0..basis.phi.n()).into_par_iter().map(|i| polar_project(&basis.phi.block(i))).collect()
}

/// Orthogonal synchronization: `Ĝ_i = P(Φ_i)`.
pub fn solve_orthogonal(a: &BlockMatrix, opts: &EigenOptions) -> Result<SyncEstimate> {
    let basis = top_d_eigenpairs(a, opts)?;
    let polar = polar_blocks(&basis);
    let estimates = GroupTuple::new(GroupKind::Orthogonal, polar.clone())?;
    Ok(SyncEstimate { estimates, basis, anchor: 0, convention: Convention::Absolute, polar_blocks: polar })
}

/// Permutation synchronization: `Ĝ_i` maximizes `⟨R, P(Φ_anchor)·P(Φ_i)ᵀ⟩`
/// over permutation matrices. `Ĝ_anchor = I_d`; estimates are relative.
pub fn solve_permutation(a: &BlockMatrix, opts: &EigenOptions, anchor: usize) -> Result<SyncEstimate> {
    if anchor >= a.n() {
        return Err(SyncError::IndexOutOfRange { index: anchor, len: a.n() });
    }
    let basis = top_d_eigenpairs(a, opts)?;
    let polar = polar_blocks(&basis);
    let head = &polar[anchor];
    let perms: Vec<Mat> = polar.par_iter().map(|p| hungarian(&head.matmul_t(p)).to_mat()).collect();
    let estimates = GroupTuple::new(GroupKind::Permutation, perms)?;
    Ok(SyncEstimate { estimates, basis, anchor, convention: Convention::Relative, polar_blocks: polar })
}

/// Resolves the global ambiguity against `truth`. Absolute estimates become
/// `Ĝ_i·Qᵀ` with `Q = G_anchorᵀ·Ĝ_anchor`; relative estimates become
/// `Ĝ_iᵀ·G_anchor`. Either way the result approximates `G_i` itself.
pub fn align_global(est: &SyncEstimate, truth: &GroupTuple) -> Result<GroupTuple> {
    est.estimates.check_compatible(truth)?;
    let a = est.anchor;
    let elements = match est.convention {
        Convention::Absolute => {
            let q = truth.element(a).t_matmul(est.estimates.element(a));
            est.estimates.elements().iter().map(|g| g.matmul_t(&q)).collect()
        }
        Convention::Relative => est.estimates.elements().iter().map(|g| g.t_matmul(truth.element(a))).collect(),
    };
    GroupTuple::new(est.estimates.kind(), elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_od, generate_pm};

    #[test]
    fn noiseless_orthogonal_recovers_pairwise_products() {
        let prob = generate_od(8, 3, 0.0, 1, true).unwrap();
        let est = solve_orthogonal(&prob.observed, &EigenOptions::default()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!(est.pairwise(i, j).max_abs_diff(&prob.truth.relative(i, j)) < 1e-8);
            }
        }
        let aligned = align_global(&est, &prob.truth).unwrap();
        for i in 0..8 {
            assert!(aligned.element(i).max_abs_diff(prob.truth.element(i)) < 1e-8);
        }
    }

    #[test]
    fn noiseless_permutation_is_relative_truth() {
        let prob = generate_pm(10, 4, 1.0, 3, true).unwrap();
        let est = solve_permutation(&prob.observed, &EigenOptions::default(), 2).unwrap();
        assert_eq!(*est.estimates.element(2), Mat::identity(4));
        for i in 0..10 {
            assert_eq!(*est.estimates.element(i), prob.truth.relative(2, i));
        }
        assert_eq!(align_global(&est, &prob.truth).unwrap(), prob.truth);
    }

    #[test]
    fn anchor_out_of_range() {
        let prob = generate_pm(4, 2, 1.0, 3, false).unwrap();
        assert!(matches!(
            solve_permutation(&prob.observed, &EigenOptions::default(), 4),
            Err(SyncError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn estimates_stay_orthogonal_at_high_noise() {
        let prob = generate_od(30, 3, 40.0, 9, false).unwrap();
        let est = solve_orthogonal(&prob.observed, &EigenOptions::default()).unwrap();
        for g in est.estimates.elements() {
            assert!(g.t_matmul(g).max_abs_diff(&Mat::identity(3)) < 1e-8);
        }
    }
}
