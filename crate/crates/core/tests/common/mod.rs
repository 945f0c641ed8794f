//! Independent reference computations (nalgebra) and random inputs shared by
//! the integration tests.

#![allow(dead_code)]

use groupsync::{Mat, Permutation};
use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Q factor of a Gaussian matrix: a tall matrix with orthonormal columns.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let q = to_na(&gaussian(rows, cols, rng)).qr().q();
    from_na(&q.columns(0, cols).into_owned())
}

pub fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Mat {
    random_orthonormal(d, d, rng)
}

/// Oracle: eigenvalues in non-increasing order with matching eigenvectors.
pub fn sorted_eigen(a: &Mat) -> (Vec<f64>, DMatrix<f64>) {
    let eig = to_na(a).symmetric_eigen();
    let order: Vec<usize> =
        (0..a.rows()).sorted_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i])).collect();
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(a.rows(), a.rows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Oracle spectral norm from the full SVD.
pub fn oracle_norm(m: &Mat) -> f64 {
    to_na(m).singular_values().iter().copied().fold(0.0, f64::max)
}

/// `‖(I − UUᵀ)V‖` for orthonormal-column `U`, `V` of equal width.
pub fn subspace_distance(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let resid = v - u * (u.transpose() * v);
    resid.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Oracle: maximize `Σ_r score[r, σ(r)]` by enumeration; ties keep the first
/// permutation in lexicographic order.
pub fn brute_force_assignment(score: &Mat) -> (Permutation, f64) {
    let d = score.rows();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for word in (0..d).permutations(d) {
        let value: f64 = word.iter().enumerate().map(|(r, &c)| score[(r, c)]).sum();
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((word, value));
        }
    }
    let (word, value) = best.expect("d >= 1");
    (Permutation::from_word(word).unwrap(), value)
}

pub fn assignment_value(score: &Mat, p: &Permutation) -> f64 {
    p.word().iter().enumerate().map(|(r, &c)| score[(r, c)]).sum()
}
