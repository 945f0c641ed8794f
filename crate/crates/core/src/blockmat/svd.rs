//! Small-matrix SVD (one-sided Jacobi), the polar projection built on it, and
//! spectral norms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dense::{dot, Mat};
use crate::error::{Result, SyncError};

/// Largest dimension handled by the exact SVD path of [`spectral_norm`].
pub const EXACT_SVD_MAX_DIM: usize = 32;

const JACOBI_MAX_SWEEPS: usize = 80;
const POWER_MAX_ITER: usize = 20_000;

/// Thin SVD `X = U·diag(s)·Vᵀ` with singular values in non-increasing order.
///
/// `u` is m×k and `v` is n×k with k = min(m, n); both have orthonormal columns,
/// including the columns attached to zero singular values. Within each singular
/// pair the sign is fixed so that the largest-magnitude entry of the left vector
/// is positive (first such entry on ties).
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

pub fn svd(x: &Mat) -> Svd {
    if x.rows() >= x.cols() {
        jacobi_svd(x)
    } else {
        let t = jacobi_svd(&x.transpose());
        // X = V S Uᵀ; re-apply the sign rule to the new left factor.
        let mut out = Svd { u: t.v, s: t.s, v: t.u };
        fix_signs(&mut out);
        out
    }
}

pub fn singular_values(x: &Mat) -> Vec<f64> {
    svd(x).s
}

pub fn sigma_min(x: &Mat) -> f64 {
    singular_values(x).last().copied().unwrap_or(0.0)
}

fn jacobi_svd(a: &Mat) -> Svd {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let sigma_max = order.first().map_or(0.0, |&k| sigma[k]);
    let zero_tol = sigma_max * f64::EPSILON * (m.max(n) as f64);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s_sorted = Vec::with_capacity(n);
    for &k in &order {
        let sk = sigma[k];
        let candidate =
            if sk > zero_tol && sk > 0.0 { Some(cols[k].iter().map(|x| x / sk).collect::<Vec<_>>()) } else { None };
        let u = match candidate.and_then(|c| orthonormalize_against(c, &u_cols)) {
            Some(u) => u,
            None => {
                sigma[k] = 0.0;
                complete_basis(&u_cols, m)
            }
        };
        u_cols.push(u);
        v_cols.push(vcols[k].clone());
        s_sorted.push(if sk > zero_tol { sk } else { 0.0 });
    }

    let mut out = Svd { u: cols_to_mat(&u_cols, m), s: s_sorted, v: cols_to_mat(&v_cols, n) };
    fix_signs(&mut out);
    out
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Re-orthogonalizes a near-unit vector against an orthonormal set; `None` if it
/// collapses (it was numerically dependent on the set).
fn orthonormalize_against(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for b in basis {
            let proj = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm < 0.5 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// The standard basis vector with the largest component outside `basis` (first
/// on ties), orthonormalized against it; deterministic completion for
/// rank-deficient inputs. With `r < m` basis vectors some `e_k` keeps at least
/// `√((m − r)/m)` of its length, so the result is well conditioned.
fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let residual = |k: usize| {
        let mut v = vec![0.0; m];
        v[k] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        v
    };
    let mut best = residual(0);
    let mut best_norm = dot(&best, &best);
    for k in 1..m {
        let v = residual(k);
        let norm = dot(&v, &v);
        if norm > best_norm {
            best = v;
            best_norm = norm;
        }
    }
    let norm = best_norm.sqrt();
    best.iter_mut().for_each(|x| *x /= norm);
    best
}

fn cols_to_mat(cols: &[Vec<f64>], rows: usize) -> Mat {
    Mat::from_fn(rows, cols.len(), |r, c| cols[c][r])
}

fn fix_signs(svd: &mut Svd) {
    for j in 0..svd.s.len() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for r in 0..svd.u.rows() {
            let a = svd.u[(r, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if svd.u[(best, j)] < 0.0 {
            for r in 0..svd.u.rows() {
                svd.u[(r, j)] = -svd.u[(r, j)];
            }
            for r in 0..svd.v.rows() {
                svd.v[(r, j)] = -svd.v[(r, j)];
            }
        }
    }
}

/// Nearest orthogonal matrix `U·Vᵀ` to a square `X`.
///
/// Rank-deficient inputs keep the completed singular vectors of [`svd`], so
/// the result is orthogonal for every finite input.
pub fn polar_project(x: &Mat) -> Mat {
    assert_eq!(x.rows(), x.cols(), "polar_project expects a square matrix");
    let f = svd(x);
    f.u.matmul_t(&f.v)
}

/// Largest singular value of `m`.
///
/// Exact SVD when the smaller dimension is at most [`EXACT_SVD_MAX_DIM`];
/// otherwise power iteration on `MᵀM` until the relative change of the estimate
/// drops below `tol`.
pub fn spectral_norm(m: &Mat, tol: f64) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    if m.rows().min(m.cols()) <= EXACT_SVD_MAX_DIM {
        let thin = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
        return Ok(singular_values(&thin)[0]);
    }
    power_norm(m, tol)
}

fn power_norm(m: &Mat, tol: f64) -> Result<f64> {
    let n = m.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9E37_79B9_7F4A_7C15 ^ ((m.rows() as u64) << 32) ^ n as u64);
    let mut v = Mat::from_fn(n, 1, |_, _| StandardNormal.sample(&mut rng));
    let norm = v.frobenius_norm();
    v = v.scale(1.0 / norm);
    let mut estimate = 0.0;
    let mut last_change = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        let mv = m.matmul(&v);
        let sigma = mv.frobenius_norm();
        if sigma == 0.0 {
            return Ok(0.0);
        }
        let w = m.t_matmul(&mv);
        let wn = w.frobenius_norm();
        v = w.scale(1.0 / wn);
        last_change = (sigma - estimate).abs();
        if last_change <= tol * sigma {
            return Ok(sigma.max(wn / sigma));
        }
        estimate = sigma;
    }
    Err(SyncError::NonConvergence { iterations: POWER_MAX_ITER, residual: last_change })
}
