//! Synthetic problem generation for the Gaussian orthogonal model (OD) and the
//! uniform-corruption permutation model (PM), and the matrix-spike view
//! `A = Z·Zᵀ + Δ` used by the diagnostics.

mod rng;
mod tuple;

pub use rng::{block_rng, mix_key, splitmix64, Stream, KEY_MULTIPLIER};
pub use tuple::{read_group_tuple, write_group_tuple, GroupKind, GroupTuple, Permutation, ORTHOGONALITY_TOL};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::blockmat::{BlockMatrix, Mat};
use crate::error::{Result, SyncError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// `G_ij = G_i G_jᵀ + σ W_ij`.
    Od { sigma: f64 },
    /// `G_ij = G_i G_jᵀ` with probability `p`, else a uniform random permutation.
    Pm { p: f64 },
}

impl NoiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Od { .. } => "od",
            NoiseModel::Pm { .. } => "pm",
        }
    }

    /// σ for OD, p for PM.
    pub fn parameter(&self) -> f64 {
        match *self {
            NoiseModel::Od { sigma } => sigma,
            NoiseModel::Pm { p } => p,
        }
    }
}

/// The PM draws for every unordered pair `i < j`: the Bernoulli indicator
/// `X_ij` and the replacement permutation `P_ij` (drawn whether used or not).
#[derive(Clone, Debug, PartialEq)]
pub struct PmDraws {
    n: usize,
    clean: Vec<bool>,
    replacements: Vec<Permutation>,
}

impl PmDraws {
    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// `X_ij` for `i ≠ j`.
    pub fn is_clean(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.clean[self.pair_index(a, b)]
    }

    /// `P_ij` for `i < j`.
    pub fn replacement(&self, i: usize, j: usize) -> &Permutation {
        &self.replacements[self.pair_index(i, j)]
    }

    pub fn corrupted_fraction(&self) -> f64 {
        let bad = self.clean.iter().filter(|c| !**c).count();
        bad as f64 / self.clean.len().max(1) as f64
    }
}

/// Ground truth, observation and the parameters that produced it.
#[derive(Clone, Debug)]
pub struct SyncProblem {
    pub truth: GroupTuple,
    /// `A_G`, the matrix of pairwise measurements.
    pub observed: BlockMatrix,
    pub model: NoiseModel,
    pub seed: u64,
    /// Present for PM problems.
    pub draws: Option<PmDraws>,
}

/// `Δ`, the noise part of the spike form.
#[derive(Clone, Debug)]
pub struct NoiseMatrix {
    pub delta: BlockMatrix,
}

/// `A = Z·Zᵀ + Δ` for an identity-truth problem.
#[derive(Clone, Debug)]
pub struct SpikeForm {
    pub a: BlockMatrix,
    pub delta: BlockMatrix,
}

/// Ground truth for OD: Haar-distributed elements of O(d), or all `I_d`.
pub fn sample_orthogonal_tuple(n: usize, d: usize, seed: u64, haar: bool) -> GroupTuple {
    if !haar {
        return GroupTuple::identity(n, d, GroupKind::Orthogonal);
    }
    let elements = (0..n)
        .map(|i| {
            let mut rng = block_rng(seed, Stream::Truth, i, 0);
            let g = Mat::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
            haar_from_gaussian(&g)
        })
        .collect();
    GroupTuple::new(GroupKind::Orthogonal, elements).expect("QR factor is orthogonal")
}

/// Q factor of `g = Q·R` normalized so that `diag(R) > 0`, which makes `Q`
/// Haar-distributed when `g` has iid Gaussian entries.
fn haar_from_gaussian(g: &Mat) -> Mat {
    let d = g.rows();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = g.column(j);
        for _ in 0..2 {
            for u in &q {
                let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
        }
        // Gram–Schmidt leaves R_jj = ‖v‖ > 0, so no sign flip is needed.
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        q.push(v);
    }
    Mat::from_fn(d, d, |r, c| q[c][r])
}

fn sample_permutation<R: Rng>(d: usize, rng: &mut R) -> Permutation {
    let mut word: Vec<usize> = (0..d).collect();
    word.shuffle(rng);
    Permutation::from_word(word).expect("shuffle of 0..d")
}

/// `d × d` block of iid standard normals for the ordered pair `(a, b)`.
fn gaussian_block(seed: u64, a: usize, b: usize, d: usize) -> Mat {
    let mut rng = block_rng(seed, Stream::Noise, a, b);
    Mat::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng))
}

/// Block `(i, j)`, `i <= j`, of `W = (M + Mᵀ)/√2`.
fn symmetric_noise_block(seed: u64, i: usize, j: usize, d: usize) -> Mat {
    let m_ij = gaussian_block(seed, i, j, d);
    if i == j {
        Mat::from_fn(d, d, |r, c| (m_ij[(r, c)] + m_ij[(c, r)]) * std::f64::consts::FRAC_1_SQRT_2)
    } else {
        let m_ji = gaussian_block(seed, j, i, d);
        Mat::from_fn(d, d, |r, c| (m_ij[(r, c)] + m_ji[(c, r)]) * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// OD instance: block `(i, j)` is `G_i G_jᵀ + σ W_ij` with `W` symmetric Gaussian.
pub fn generate_od(n: usize, d: usize, sigma: f64, seed: u64, haar: bool) -> Result<SyncProblem> {
    if n == 0 || d == 0 {
        return Err(SyncError::DimensionMismatch("n and d must be positive".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(SyncError::ModelMismatch(format!("sigma must be a finite non-negative number, got {sigma}")));
    }
    let truth = sample_orthogonal_tuple(n, d, seed, haar);
    let dim = n * d;
    let mut data = vec![0.0; dim * dim];

    // Each block row is produced independently; the lower blocks come from the
    // same formula as their upper mirrors, so the result is exactly symmetric.
    data.par_chunks_mut(d * dim).enumerate().for_each(|(i, rows)| {
        for j in 0..n {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            let signal = truth.relative(a, b);
            let noise = symmetric_noise_block(seed, a, b, d);
            let block = Mat::from_fn(d, d, |r, c| signal[(r, c)] + sigma * noise[(r, c)]);
            for r in 0..d {
                for c in 0..d {
                    let v = if i <= j { block[(r, c)] } else { block[(c, r)] };
                    rows[r * dim + j * d + c] = v;
                }
            }
        }
    });

    Ok(SyncProblem {
        truth,
        observed: BlockMatrix::from_dense_unchecked(n, d, data),
        model: NoiseModel::Od { sigma },
        seed,
        draws: None,
    })
}

/// PM instance: for `i < j` the block is `G_i G_jᵀ` with probability `p`, else an
/// independent uniform permutation; diagonal blocks are `I_d`; `G_ji = G_ijᵀ`.
/// With `scramble` the truth is uniform over permutations, otherwise identity.
pub fn generate_pm(n: usize, d: usize, p: f64, seed: u64, scramble: bool) -> Result<SyncProblem> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(SyncError::InvalidProbability(p));
    }
    if n == 0 || d == 0 {
        return Err(SyncError::DimensionMismatch("n and d must be positive".into()));
    }
    let truth = if scramble {
        let perms: Vec<Permutation> =
            (0..n).map(|i| sample_permutation(d, &mut block_rng(seed, Stream::Truth, i, 0))).collect();
        GroupTuple::from_permutations(&perms)?
    } else {
        GroupTuple::identity(n, d, GroupKind::Permutation)
    };

    let pairs = n * (n - 1) / 2;
    let mut clean = Vec::with_capacity(pairs);
    let mut replacements = Vec::with_capacity(pairs);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut rng = block_rng(seed, Stream::Corruption, i, j);
            let u: f64 = rng.random();
            clean.push(u < p);
            replacements.push(sample_permutation(d, &mut rng));
        }
    }
    let draws = PmDraws { n, clean, replacements };

    let observed = BlockMatrix::from_upper_blocks(n, d, |i, j| {
        if i == j {
            Mat::identity(d)
        } else if draws.is_clean(i, j) {
            truth.relative(i, j)
        } else {
            draws.replacement(i, j).to_mat()
        }
    });

    Ok(SyncProblem { truth, observed, model: NoiseModel::Pm { p }, seed, draws: Some(draws) })
}

fn require_identity_truth(problem: &SyncProblem) -> Result<()> {
    if !problem.truth.is_identity() {
        return Err(SyncError::ModelMismatch(
            "spike-form quantities need identity ground truth; gauge-reduce the problem first".into(),
        ));
    }
    Ok(())
}

/// The PM corruption matrix: diagonal blocks `−p⁻¹(1−p)d⁻¹J_d`, off-diagonal
/// blocks `p⁻¹((X_ij − p)(I − J/d) + (1 − X_ij)(P_ij − J/d))`.
pub fn pm_delta(problem: &SyncProblem) -> Result<NoiseMatrix> {
    let NoiseModel::Pm { p } = problem.model else {
        return Err(SyncError::ModelMismatch("pm_delta needs a PM problem".into()));
    };
    require_identity_truth(problem)?;
    let draws = problem
        .draws
        .as_ref()
        .ok_or_else(|| SyncError::ModelMismatch("PM problem is missing its corruption draws".into()))?;
    let (n, d) = (problem.truth.n(), problem.truth.d());
    let inv_d = 1.0 / d as f64;
    let centered_identity = Mat::from_fn(d, d, |r, c| if r == c { 1.0 - inv_d } else { -inv_d });

    let delta = BlockMatrix::from_upper_blocks(n, d, |i, j| {
        if i == j {
            return Mat::from_fn(d, d, |_, _| -(1.0 - p) * inv_d / p);
        }
        let x = if draws.is_clean(i, j) { 1.0 } else { 0.0 };
        let centered_perm = Mat::from_fn(d, d, |r, c| draws.replacement(i, j).to_mat()[(r, c)] - inv_d);
        Mat::from_fn(d, d, |r, c| ((x - p) * centered_identity[(r, c)] + (1.0 - x) * centered_perm[(r, c)]) / p)
    });
    Ok(NoiseMatrix { delta })
}

/// OD noise in the spike frame: `Δ = A_G − Z·Zᵀ` (equal to `σW` for identity truth).
pub fn od_delta(problem: &SyncProblem) -> Result<NoiseMatrix> {
    if !matches!(problem.model, NoiseModel::Od { .. }) {
        return Err(SyncError::ModelMismatch("od_delta needs an OD problem".into()));
    }
    require_identity_truth(problem)?;
    let d = problem.truth.d();
    let eye = Mat::identity(d);
    let delta = BlockMatrix::from_upper_blocks(problem.truth.n(), d, |i, j| &problem.observed.block(i, j) - &eye);
    Ok(NoiseMatrix { delta })
}

/// `A = Z·Zᵀ + Δ` with the model's `Δ`. For OD this is `A_G` itself; for PM it
/// is the affine image `(A_G − (1−p)d⁻¹J − (1−p)I)/p`, built from the draws.
pub fn spike_form(problem: &SyncProblem) -> Result<SpikeForm> {
    let delta = match problem.model {
        NoiseModel::Od { .. } => od_delta(problem)?.delta,
        NoiseModel::Pm { .. } => pm_delta(problem)?.delta,
    };
    let d = problem.truth.d();
    let eye = Mat::identity(d);
    let a = match problem.model {
        NoiseModel::Od { .. } => problem.observed.clone(),
        NoiseModel::Pm { .. } => BlockMatrix::from_upper_blocks(problem.truth.n(), d, |i, j| &eye + &delta.block(i, j)),
    };
    Ok(SpikeForm { a, delta })
}

/// Conjugates the problem by `diag(G_1, …, G_n)ᵀ` so the truth becomes the
/// identity tuple: block `(i, j)` becomes `G_iᵀ A_ij G_j`, and PM replacements
/// `P_ij` become `G_iᵀ P_ij G_j`.
pub fn gauge_reduce(problem: &SyncProblem) -> Result<SyncProblem> {
    let truth = &problem.truth;
    let (n, d) = (truth.n(), truth.d());
    let observed = BlockMatrix::from_upper_blocks(n, d, |i, j| {
        truth.element(i).t_matmul(&problem.observed.block(i, j)).matmul(truth.element(j))
    });
    let draws = match &problem.draws {
        None => None,
        Some(dr) => {
            let mut replacements = Vec::with_capacity(dr.replacements.len());
            for i in 0..n {
                for j in (i + 1)..n {
                    let m = truth.element(i).t_matmul(&dr.replacement(i, j).to_mat()).matmul(truth.element(j));
                    replacements.push(Permutation::from_mat(&m)?);
                }
            }
            Some(PmDraws { n, clean: dr.clean.clone(), replacements })
        }
    };
    Ok(SyncProblem {
        truth: GroupTuple::identity(n, d, truth.kind()),
        observed,
        model: problem.model,
        seed: problem.seed,
        draws,
    })
}

/// `A^(i)`: blocks away from row/column `i` copied from `a`; every block in
/// row or column `i` replaced by its noiseless value `I_d`.
pub fn leave_one_out(a: &BlockMatrix, i: usize) -> Result<BlockMatrix> {
    if i >= a.n() {
        return Err(SyncError::IndexOutOfRange { index: i, len: a.n() });
    }
    let eye = Mat::identity(a.d());
    let mut out = a.clone();
    for k in 0..a.n() {
        out.set_block_sym(i, k, &eye);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_truth_without_haar() {
        let g = sample_orthogonal_tuple(5, 3, 11, false);
        assert!(g.is_identity() && g.n() == 5);
    }

    #[test]
    fn haar_elements_are_orthogonal() {
        let g = sample_orthogonal_tuple(50, 4, 3, true);
        for e in g.elements() {
            assert!(e.t_matmul(e).max_abs_diff(&Mat::identity(4)) <= 1e-10);
        }
    }

    #[test]
    fn od_sigma_zero_is_truth_gram() {
        let p = generate_od(6, 2, 0.0, 5, true).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!(p.observed.block(i, j).max_abs_diff(&p.truth.relative(i, j)) < 1e-15);
            }
        }
    }

    #[test]
    fn od_is_exactly_symmetric_and_reproducible() {
        let a = generate_od(7, 3, 0.7, 99, true).unwrap();
        let b = generate_od(7, 3, 0.7, 99, true).unwrap();
        assert_eq!(a.observed, b.observed);
        assert!(BlockMatrix::from_dense(7, 3, a.observed.as_slice().to_vec()).is_ok());
        let c = generate_od(7, 3, 0.7, 100, true).unwrap();
        assert_ne!(a.observed, c.observed);
    }

    #[test]
    fn pm_rejects_bad_probability() {
        for p in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(generate_pm(4, 3, p, 1, false), Err(SyncError::InvalidProbability(_))));
        }
    }

    #[test]
    fn pm_p_one_is_truth_gram() {
        let prob = generate_pm(9, 4, 1.0, 2, true).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(prob.observed.block(i, j), prob.truth.relative(i, j));
            }
        }
    }

    #[test]
    fn pm_blocks_are_permutations() {
        let prob = generate_pm(12, 5, 0.3, 4, true).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                Permutation::from_mat(&prob.observed.block(i, j)).unwrap();
            }
        }
        assert!(BlockMatrix::from_dense(12, 5, prob.observed.as_slice().to_vec()).is_ok());
    }

    #[test]
    fn pm_delta_p_one_vanishes() {
        let prob = generate_pm(6, 3, 1.0, 8, false).unwrap();
        let delta = pm_delta(&prob).unwrap().delta;
        assert!(delta.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pm_delta_off_diagonal_rows_sum_to_zero() {
        let prob = generate_pm(10, 4, 0.4, 8, false).unwrap();
        let delta = pm_delta(&prob).unwrap().delta;
        for i in 0..10 {
            for j in 0..10 {
                if i == j {
                    continue;
                }
                let b = delta.block(i, j);
                for r in 0..4 {
                    assert!(b.row(r).iter().sum::<f64>().abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spike_quantities_need_identity_truth() {
        let prob = generate_pm(5, 3, 0.5, 1, true).unwrap();
        assert!(matches!(pm_delta(&prob), Err(SyncError::ModelMismatch(_))));
        let od = generate_od(5, 3, 0.1, 1, false).unwrap();
        assert!(matches!(pm_delta(&od), Err(SyncError::ModelMismatch(_))));
        let reduced = gauge_reduce(&prob).unwrap();
        assert!(pm_delta(&reduced).is_ok());
    }

    #[test]
    fn gauge_reduction_of_noiseless_od_is_all_identity() {
        let prob = generate_od(5, 3, 0.0, 4, true).unwrap();
        let reduced = gauge_reduce(&prob).unwrap();
        assert!(reduced.truth.is_identity());
        for i in 0..5 {
            for j in 0..5 {
                assert!(reduced.observed.block(i, j).max_abs_diff(&Mat::identity(3)) < 1e-14);
            }
        }
    }

    #[test]
    fn leave_one_out_structure() {
        let prob = generate_od(6, 2, 0.5, 3, false).unwrap();
        let a = &prob.observed;
        let loo = leave_one_out(a, 2).unwrap();
        let mut changed = 0;
        for k in 0..6 {
            for l in 0..6 {
                if loo.block(k, l) != a.block(k, l) {
                    changed += 1;
                }
                if k == 2 || l == 2 {
                    assert_eq!(loo.block(k, l), Mat::identity(2));
                }
            }
        }
        assert_eq!(changed, 2 * 6 - 1);
        assert!(matches!(leave_one_out(a, 6), Err(SyncError::IndexOutOfRange { .. })));

        let clean = generate_od(4, 2, 0.0, 3, false).unwrap();
        for i in 0..4 {
            assert_eq!(leave_one_out(&clean.observed, i).unwrap(), clean.observed);
        }
    }
}
