mod common;

use common::*;
use groupsync::metrics::rounding_margin;
use groupsync::models::GroupKind;
use groupsync::{
    align_global, evaluate, generate_od, generate_pm, hungarian, polar_project, solve_orthogonal, solve_permutation,
    BlockMatrix, EigenOptions, GroupTuple, Mat, Permutation, SyncProblem,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn oracle_polar(x: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = x.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// `D·A·Dᵀ` with `D = diag(Q_1, …, Q_n)`.
fn conjugate(a: &BlockMatrix, q: &[Mat]) -> BlockMatrix {
    let (n, d) = (a.n(), a.d());
    let dense = Mat::from_fn(n * d, n * d, |r, c| {
        let (i, j) = (r / d, c / d);
        let block = q[i].matmul(&a.block(i, j)).matmul_t(&q[j]);
        block[(r % d, c % d)]
    });
    BlockMatrix::from_dense(n, d, dense.symmetrize().into_vec()).unwrap()
}

#[test]
fn one_dimensional_estimates_are_signs_of_the_eigenvector() {
    let prob = generate_od(40, 1, 0.5, 3, true).unwrap();
    let est = solve_orthogonal(&prob.observed, &EigenOptions::default()).unwrap();
    let (_, v) = sorted_eigen(&prob.observed.to_mat());
    let flip = if v[(0, 0)].signum() == est.estimates.element(0)[(0, 0)] { 1.0 } else { -1.0 };
    for i in 0..40 {
        assert_eq!(est.estimates.element(i)[(0, 0)], flip * v[(i, 0)].signum());
    }
}

#[test]
fn hungarian_matches_brute_force_on_random_scores() {
    let mut rng = rng(31);
    for k in 0..1000 {
        let score = uniform(5, 5, &mut rng);
        let got = hungarian(&score);
        let (want, value) = brute_force_assignment(&score);
        assert!((assignment_value(&score, &got) - value).abs() < 1e-12, "case {k}");
        assert_eq!(got, want, "case {k}");
    }
}

#[test]
fn hungarian_breaks_ties_lexicographically() {
    let all_ones = Mat::from_fn(4, 4, |_, _| 1.0);
    assert_eq!(hungarian(&all_ones), Permutation::identity(4));
    let mut rng = rng(32);
    for _ in 0..200 {
        // Integer scores make ties common.
        let score = Mat::from_fn(4, 4, |_, _| rand::Rng::random_range(&mut rng, 0..3) as f64);
        assert_eq!(hungarian(&score), brute_force_assignment(&score).0);
    }
}

#[test]
fn small_permutation_instance_matches_dense_pipeline() {
    let (n, d) = (8, 3);
    for seed in 0..10 {
        let prob = generate_pm(n, d, 0.7, seed, true).unwrap();
        let est = solve_permutation(&prob.observed, &EigenOptions::default(), 0).unwrap();
        let (values, vectors) = sorted_eigen(&prob.observed.to_mat());
        if values[d - 1] - values[d] < 1e-6 {
            continue;
        }
        let phi = vectors.columns(0, d).into_owned() * (n as f64).sqrt();
        let polar: Vec<DMatrix<f64>> = (0..n).map(|i| oracle_polar(&phi.rows(i * d, d).into_owned())).collect();
        for i in 0..n {
            let score = from_na(&(&polar[0] * polar[i].transpose()));
            let (want, _) = brute_force_assignment(&score);
            assert_eq!(*est.estimates.element(i), want.to_mat(), "seed {seed} block {i}");
        }
    }
}

#[test]
fn alignment_undoes_a_random_gauge() {
    let mut rng = rng(33);
    let prob = generate_od(30, 3, 0.0, 4, true).unwrap();
    let est = solve_orthogonal(&prob.observed, &EigenOptions::default()).unwrap();
    let q = random_orthogonal(3, &mut rng);
    let mut shifted = est.clone();
    shifted.estimates = est.estimates.right_mul(&q).unwrap();
    let aligned = align_global(&shifted, &prob.truth).unwrap();
    for i in 0..30 {
        assert!(aligned.element(i).max_abs_diff(prob.truth.element(i)) < 1e-8);
    }
}

#[test]
fn orthogonal_estimates_stay_orthogonal_at_high_noise() {
    let prob = generate_od(50, 4, 5.0, 6, true).unwrap();
    let est = solve_orthogonal(&prob.observed, &EigenOptions::default()).unwrap();
    for g in est.estimates.elements() {
        assert!(g.t_matmul(g).max_abs_diff(&Mat::identity(4)) < 1e-10);
    }
    assert_eq!(est.estimates.kind(), GroupKind::Orthogonal);
}

#[test]
fn rounding_margin_below_half_implies_exact_recovery() {
    let mut premise_hits = 0;
    for seed in 0..60 {
        let p = [0.25, 0.35, 0.5][seed as usize % 3];
        let prob = generate_pm(40, 4, p, seed, true).unwrap();
        let est = solve_permutation(&prob.observed, &EigenOptions::default(), 0).unwrap();
        if rounding_margin(&est, &prob.truth).unwrap() < 0.5 {
            premise_hits += 1;
            assert!(evaluate(&est, &prob.truth, 0, None).unwrap().exact, "seed {seed}");
        }
    }
    assert!(premise_hits > 10);
}

#[test]
fn anchor_out_of_range_is_rejected() {
    let prob = generate_pm(5, 2, 0.9, 1, false).unwrap();
    assert!(solve_permutation(&prob.observed, &EigenOptions::default(), 5).is_err());
}

fn gauge_case(seed: u64, d: usize) -> (SyncProblem, Vec<Mat>) {
    let mut rng = rng(seed);
    let prob = generate_od(20, d, 0.3, seed, false).unwrap();
    let q = (0..20).map(|_| random_orthogonal(d, &mut rng)).collect();
    (prob, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn orthogonal_pairwise_estimates_follow_the_gauge(seed in 0u64..10_000, d in 1usize..4) {
        let (prob, q) = gauge_case(seed, d);
        let opts = EigenOptions::default();
        let base = solve_orthogonal(&prob.observed, &opts).unwrap();
        let moved = solve_orthogonal(&conjugate(&prob.observed, &q), &opts).unwrap();
        for (b, i) in [(0, 1), (3, 7), (19, 12)] {
            let want = q[b].matmul(&base.pairwise(b, i)).matmul_t(&q[i]);
            prop_assert!(moved.pairwise(b, i).max_abs_diff(&want) < 1e-6);
        }
    }

    #[test]
    fn permutation_estimates_follow_the_gauge(seed in 0u64..10_000, anchor in 0usize..15) {
        let d = 4;
        let prob = generate_pm(15, d, 0.8, seed, false).unwrap();
        let mut rng = rng(seed ^ 0x55);
        let perms: Vec<Mat> = (0..15).map(|_| {
            let mut w: Vec<usize> = (0..d).collect();
            rand::seq::SliceRandom::shuffle(w.as_mut_slice(), &mut rng);
            Permutation::from_word(w).unwrap().to_mat()
        }).collect();
        let opts = EigenOptions::default();
        let base = solve_permutation(&prob.observed, &opts, anchor).unwrap();
        let moved = solve_permutation(&conjugate(&prob.observed, &perms), &opts, anchor).unwrap();
        for i in 0..15 {
            let want = perms[anchor].matmul(&base.pairwise(anchor, i)).matmul_t(&perms[i]);
            prop_assert_eq!(moved.pairwise(anchor, i), want);
        }
    }

    #[test]
    fn polar_factor_is_invariant_under_positive_scaling(seed in 0u64..10_000, d in 1usize..7, s in 0.01f64..100.0) {
        let x = gaussian(d, d, &mut rng(seed));
        prop_assert!(polar_project(&x.scale(s)).max_abs_diff(&polar_project(&x)) < 1e-9);
    }
}

#[test]
fn permutation_estimates_are_permutations() {
    let prob = generate_pm(30, 5, 0.2, 9, true).unwrap();
    let est = solve_permutation(&prob.observed, &EigenOptions::default(), 4).unwrap();
    let perms: Vec<Permutation> = est.estimates.elements().iter().map(|g| Permutation::from_mat(g).unwrap()).collect();
    assert_eq!(GroupTuple::from_permutations(&perms).unwrap().n(), 30);
    assert_eq!(*est.estimates.element(4), Mat::identity(5));
}
