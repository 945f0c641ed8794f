//! Spectral methods for orthogonal and permutation group synchronization.
//!
//! Given noisy pairwise measurements `G_ij ≈ G_i·G_jᵀ` stacked into a
//! symmetric block matrix, the solvers take the top-`d` eigenvectors `Φ` and
//! round each `d × d` block of `Φ` back to the group: to the nearest orthogonal
//! matrix, or through a linear assignment for permutations.
//!
//! ```
//! use groupsync::{generate_pm, solve_permutation, evaluate, EigenOptions};
//!
//! let problem = generate_pm(40, 3, 0.9, 7, true).unwrap();
//! let est = solve_permutation(&problem.observed, &EigenOptions::default(), 0).unwrap();
//! let report = evaluate(&est, &problem.truth, 0, None).unwrap();
//! assert!(report.exact);
//! ```

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockmat;
pub mod diagnostics;
pub mod error;
pub mod expt;
pub mod metrics;
pub mod models;
pub mod sync;

pub use blockmat::{
    polar_project, read_block_matrix, spectral_norm, stack_identity, top_d_eigenpairs, write_block_matrix, BlockMatrix,
    EigenBasis, EigenOptions, Mat, TallBlockVector,
};
pub use error::{Result, SyncError};
pub use metrics::{evaluate, RecoveryReport};
pub use models::{
    generate_od, generate_pm, read_group_tuple, write_group_tuple, GroupKind, GroupTuple, NoiseModel, Permutation,
    SyncProblem,
};
pub use sync::{align_global, hungarian, solve_orthogonal, solve_permutation, SyncEstimate};
