//! Leave-one-out perturbation quantities on sampled instances: alignment
//! matrices, the three-term decomposition of `‖Δ_iᵀ(Φ − ZQ)‖`, per-model
//! error rates `η`, and numeric checks of the supporting inequalities.

use rand::seq::index;
use rayon::prelude::*;

use crate::blockmat::{
    polar_project, sigma_min, singular_values, spectral_norm, stack_identity, top_d_eigenpairs, EigenBasis,
    EigenOptions, Mat, SymOperator, TallBlockVector,
};
use crate::error::{Result, SyncError};
use crate::models::{block_rng, gauge_reduce, leave_one_out, spike_form, NoiseModel, SpikeForm, Stream, SyncProblem};

const NORM_TOL: f64 = 1e-12;

/// Slack allowed on the right of every inequality check.
pub const CHECK_SLACK: f64 = 1e-9;

/// Header of the leave-one-out CSV.
pub const LOO_CSV_HEADER: &str = "i,dist_phi_loo,dist_phi_z,q_drift,t1,t2,t3,lhs,eta,sigma_min_phi_blocks";

#[derive(Clone, Debug, PartialEq)]
pub struct LooReport {
    /// 0-based.
    pub i: usize,
    /// `‖Φ − Φ^(i)·S_i‖`.
    pub dist_phi_loo: f64,
    /// `‖Φ − Z·Q‖`.
    pub dist_phi_z: f64,
    /// `‖Q − Q_i·S_i‖`.
    pub q_drift: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// `‖Δ_iᵀ(Φ − Z·Q)‖`.
    pub lhs: f64,
    pub eta: f64,
    /// `min_j σ_min(Φ_j)`.
    pub sigma_min_phi_blocks: f64,
}

impl LooReport {
    pub fn decomposition_holds(&self) -> bool {
        self.lhs <= self.t1 + self.t2 + self.t3 + CHECK_SLACK
    }

    /// CSV fields in [`LOO_CSV_HEADER`] order; the index is written 1-based.
    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.i + 1,
            self.dist_phi_loo,
            self.dist_phi_z,
            self.q_drift,
            self.t1,
            self.t2,
            self.t3,
            self.lhs,
            self.eta,
            self.sigma_min_phi_blocks
        )
    }
}

/// `Q = P(ZᵀΦ)`, the orthogonal `R` minimizing `‖Φ − Z·R‖_F`.
pub fn alignment_q(z: &TallBlockVector, phi: &TallBlockVector) -> Result<Mat> {
    if z.as_mat().shape() != phi.as_mat().shape() {
        return Err(SyncError::DimensionMismatch("Z and Φ must have the same shape".into()));
    }
    Ok(polar_project(&z.as_mat().t_matmul(phi.as_mat())))
}

/// Per-block error rate: `σ·n^{−1/2}(√d + √log n)` for OD,
/// `p⁻¹·n^{−1/2}·√log(nd)` for PM.
pub fn eta(model: &NoiseModel, n: usize, d: usize) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    match *model {
        NoiseModel::Od { sigma } => sigma / nf.sqrt() * (df.sqrt() + nf.ln().sqrt()),
        NoiseModel::Pm { p } => (nf * df).ln().sqrt() / (p * nf.sqrt()),
    }
}

/// `‖(I − ΦΦᵀ/n)·Z‖`.
pub fn davis_kahan_residual(basis: &EigenBasis, z: &TallBlockVector) -> Result<f64> {
    let phi = basis.phi.as_mat();
    let n = basis.phi.n() as f64;
    let proj = phi.matmul(&phi.t_matmul(z.as_mat())).scale(1.0 / n);
    spectral_norm(&(z.as_mat() - &proj), NORM_TOL)
}

/// `max_{i,j} |σ_j(Φ_i) − 1|`.
pub fn block_singular_deviation(basis: &EigenBasis) -> f64 {
    basis.phi.blocks().flat_map(|b| singular_values(&b)).map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

/// `max_i ‖Φ_i − (n·I_d + Δ_iᵀZ)·Q·Λ⁻¹‖`, the distance of each block from its
/// first-order surrogate.
pub fn surrogate_residual(spike: &SpikeForm, basis: &EigenBasis) -> Result<f64> {
    let (n, d) = (basis.phi.n(), basis.phi.d());
    let z = stack_identity(n, d);
    let q = alignment_q(&z, &basis.phi)?;
    let delta_z = spike.delta.apply(z.as_mat());
    let inv_lambda = Mat::diag(&basis.lambda.iter().map(|l| 1.0 / l).collect::<Vec<_>>());
    let mut worst = 0.0_f64;
    for i in 0..n {
        // Δ is symmetric, so Δ_iᵀZ is the i-th block of Δ·Z.
        let mut lead = delta_z.row_block(i * d, d);
        for k in 0..d {
            lead[(k, k)] += n as f64;
        }
        let surrogate = lead.matmul(&q).matmul(&inv_lambda);
        worst = worst.max(spectral_norm(&(&basis.phi.block(i) - &surrogate), NORM_TOL)?);
    }
    Ok(worst)
}

/// Shared state for leave-one-out reports on one identity-truth instance.
pub struct LooContext {
    model: NoiseModel,
    spike: SpikeForm,
    basis: EigenBasis,
    z: TallBlockVector,
    q: Mat,
    sigma_min_blocks: f64,
    opts: EigenOptions,
}

impl LooContext {
    /// Uses `basis` as the eigenbasis of the spike matrix `A`.
    pub fn new(problem: &SyncProblem, basis: EigenBasis, opts: &EigenOptions) -> Result<Self> {
        Self::assemble(problem.model, spike_form(problem)?, basis, opts)
    }

    fn assemble(model: NoiseModel, spike: SpikeForm, basis: EigenBasis, opts: &EigenOptions) -> Result<Self> {
        if basis.phi.n() != spike.a.n() || basis.phi.d() != spike.a.d() {
            return Err(SyncError::DimensionMismatch("basis does not match the problem".into()));
        }
        let z = stack_identity(spike.a.n(), spike.a.d());
        let q = alignment_q(&z, &basis.phi)?;
        let sigma_min_blocks = basis.phi.blocks().map(|b| sigma_min(&b)).fold(f64::INFINITY, f64::min);
        Ok(Self { model, spike, basis, z, q, sigma_min_blocks, opts: *opts })
    }

    /// Builds the spike form and its eigenbasis. Problems with non-identity
    /// truth are gauge-reduced first.
    pub fn from_problem(problem: &SyncProblem, opts: &EigenOptions) -> Result<Self> {
        let reduced;
        let problem = if problem.truth.is_identity() {
            problem
        } else {
            reduced = gauge_reduce(problem)?;
            &reduced
        };
        let spike = spike_form(problem)?;
        let basis = top_d_eigenpairs(&spike.a, opts)?;
        Self::assemble(problem.model, spike, basis, opts)
    }

    pub fn spike(&self) -> &SpikeForm {
        &self.spike
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.spike.a.n()
    }

    pub fn report(&self, i: usize) -> Result<LooReport> {
        let (n, d) = (self.n(), self.spike.a.d());
        if i >= n {
            return Err(SyncError::IndexOutOfRange { index: i, len: n });
        }
        let phi = self.basis.phi.as_mat();
        let z = self.z.as_mat();
        let loo = top_d_eigenpairs(&leave_one_out(&self.spike.a, i)?, &self.opts)?;
        let phi_i = loo.phi.as_mat();

        let q_i = alignment_q(&self.z, &loo.phi)?;
        let s_i = polar_project(&phi_i.t_matmul(phi));
        let delta_i = self.spike.delta.block_column(i).into_mat();

        let norm = |m: &Mat| spectral_norm(m, NORM_TOL);
        let phi_loo_gap = phi - &phi_i.matmul(&s_i);
        let phi_z_gap = phi - &z.matmul(&self.q);
        let qs = q_i.matmul(&s_i);
        let dist_phi_loo = norm(&phi_loo_gap)?;
        let q_drift = norm(&(&qs - &self.q))?;

        Ok(LooReport {
            i,
            dist_phi_loo,
            dist_phi_z: norm(&phi_z_gap)?,
            q_drift,
            t1: norm(&delta_i)? * dist_phi_loo,
            t2: norm(&delta_i.t_matmul(&(phi_i - &z.matmul(&q_i))))?,
            t3: norm(&delta_i.t_matmul(z))? * q_drift,
            lhs: norm(&delta_i.t_matmul(&phi_z_gap))?,
            eta: eta(&self.model, n, d),
            sigma_min_phi_blocks: self.sigma_min_blocks,
        })
    }

    /// Reports for `indices`, computed in parallel and returned in input order.
    pub fn reports(&self, indices: &[usize]) -> Result<Vec<LooReport>> {
        indices.par_iter().map(|&i| self.report(i)).collect()
    }
}

/// One leave-one-out report for an identity-truth problem whose spike matrix
/// has eigenbasis `basis`.
pub fn loo_report(problem: &SyncProblem, basis: &EigenBasis, i: usize, opts: &EigenOptions) -> Result<LooReport> {
    LooContext::new(problem, basis.clone(), opts)?.report(i)
}

/// `k` distinct indices from `0..n`, sorted, reproducible per seed.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = block_rng(seed, Stream::Sampling, n, k);
    let mut picked = index::sample(&mut rng, n, k.min(n)).into_vec();
    picked.sort_unstable();
    picked
}

/// `‖P(X) − P(Y)‖ ≤ 2√2·min(σ_min(X)⁻¹, σ_min(Y)⁻¹)·‖X − Y‖`.
pub fn lipschitz_check(x: &Mat, y: &Mat) -> Result<bool> {
    let (sx, sy) = (sigma_min(x), sigma_min(y));
    let smallest = sx.min(sy);
    if !(smallest > 1e-12) {
        return Err(SyncError::SingularInput(smallest));
    }
    let lhs = spectral_norm(&(&polar_project(x) - &polar_project(y)), NORM_TOL)?;
    let rhs = 2.0 * std::f64::consts::SQRT_2 * (1.0 / sx).min(1.0 / sy) * spectral_norm(&(x - y), NORM_TOL)?;
    Ok(lhs <= rhs + CHECK_SLACK)
}

fn orthonormality_defect(x: &Mat) -> f64 {
    x.t_matmul(x).max_abs_diff(&Mat::identity(x.cols()))
}

/// `‖Y − X·P(XᵀY)‖ ≤ 2‖(I − XXᵀ)·Y‖` for tall matrices with orthonormal columns.
pub fn alignment_residual_check(x: &Mat, y: &Mat) -> Result<bool> {
    if x.shape() != y.shape() {
        return Err(SyncError::DimensionMismatch("X and Y must have the same shape".into()));
    }
    let defect = orthonormality_defect(x).max(orthonormality_defect(y));
    if !(defect <= 1e-8) {
        return Err(SyncError::NotOrthonormal(defect));
    }
    let xty = x.t_matmul(y);
    let lhs = spectral_norm(&(y - &x.matmul(&polar_project(&xty))), NORM_TOL)?;
    let rhs = 2.0 * spectral_norm(&(y - &x.matmul(&xty)), NORM_TOL)?;
    Ok(lhs <= rhs + CHECK_SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_od, generate_pm};

    #[test]
    fn noiseless_reports_vanish() {
        let prob = generate_od(12, 2, 0.0, 1, false).unwrap();
        let ctx = LooContext::from_problem(&prob, &EigenOptions::default()).unwrap();
        for r in ctx.reports(&[0, 5, 11]).unwrap() {
            for v in [r.dist_phi_loo, r.q_drift, r.t1, r.t2, r.t3, r.lhs] {
                assert!(v < 1e-8, "{r:?}");
            }
            assert!((r.sigma_min_phi_blocks - 1.0).abs() < 1e-8);
        }
        assert!(davis_kahan_residual(ctx.basis(), &stack_identity(12, 2)).unwrap() < 1e-8);
    }

    #[test]
    fn decomposition_holds_on_noisy_instances() {
        let od = generate_od(40, 2, 0.1 * (20.0_f64).sqrt(), 3, false).unwrap();
        let pm = generate_pm(40, 3, 0.6, 3, false).unwrap();
        for prob in [od, pm] {
            let ctx = LooContext::from_problem(&prob, &EigenOptions::default()).unwrap();
            for r in ctx.reports(&(0..40).collect::<Vec<_>>()).unwrap() {
                assert!(r.decomposition_holds(), "{r:?}");
            }
        }
    }

    #[test]
    fn scrambled_truth_is_gauge_reduced() {
        let prob = generate_pm(15, 3, 1.0, 2, true).unwrap();
        let ctx = LooContext::from_problem(&prob, &EigenOptions::default()).unwrap();
        assert!(ctx.report(4).unwrap().lhs < 1e-10);
        assert!(loo_report(&prob, ctx.basis(), 4, &EigenOptions::default()).is_err());
    }

    #[test]
    fn alignment_of_rotated_stack() {
        let z = stack_identity(5, 2);
        let o = Mat::from_rows(&[&[0.6, -0.8], &[0.8, 0.6]]);
        assert!(alignment_q(&z, &z).unwrap().max_abs_diff(&Mat::identity(2)) < 1e-14);
        assert!(alignment_q(&z, &z.mul_right(&o)).unwrap().max_abs_diff(&o) < 1e-14);
    }

    #[test]
    fn lemma_checks_edge_cases() {
        let x = Mat::from_rows(&[&[2.0, 1.0], &[0.0, 1.0]]);
        assert!(lipschitz_check(&x, &x).unwrap());
        assert!(matches!(lipschitz_check(&x, &Mat::zeros(2, 2)), Err(SyncError::SingularInput(_))));
        let tall = stack_identity(3, 2).into_mat().scale(1.0 / 3f64.sqrt());
        assert!(alignment_residual_check(&tall, &tall).unwrap());
        assert!(matches!(alignment_residual_check(&tall.scale(2.0), &tall), Err(SyncError::NotOrthonormal(_))));
    }

    #[test]
    fn sampled_indices_are_sorted_and_distinct() {
        let s = sample_indices(100, 10, 7);
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, sample_indices(100, 10, 7));
        assert_eq!(sample_indices(4, 10, 7), vec![0, 1, 2, 3]);
    }
}
