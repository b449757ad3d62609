//! Orthogonal rotations: Procrustes toward a target and Varimax by gradient
//! projection.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LoadingMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RotationResult {
    pub rotated: LoadingMatrix,
    /// Orthogonal `q x q` matrix with `rotated = loadings * transform`.
    pub transform: DMatrix<f64>,
    /// Procrustes: residual sum of squares. Varimax: criterion value (larger
    /// is simpler).
    pub criterion: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Singular values of `L' target` below this fraction of the largest are
/// reported as rank deficiency.
const RANK_TOLERANCE: f64 = 1e-10;

/// Nearest orthogonal matrix `U V'` to `m = U D V'`.
fn polar_factor(m: DMatrix<f64>) -> Result<(DMatrix<f64>, nalgebra::DVector<f64>)> {
    let svd = m.svd(true, true);
    let u = svd.u.ok_or(Error::EigenNonConvergence)?;
    let v_t = svd.v_t.ok_or(Error::EigenNonConvergence)?;
    Ok((u * v_t, svd.singular_values))
}

pub fn procrustes(loadings: &LoadingMatrix, target: &LoadingMatrix) -> Result<RotationResult> {
    if loadings.p() != target.p() || loadings.q() != target.q() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", loadings.p(), loadings.q()),
            found: format!("{}x{}", target.p(), target.q()),
        });
    }
    let cross = loadings.as_matrix().transpose() * target.as_matrix();
    let (t, singular) = polar_factor(cross)?;
    let largest = singular.iter().cloned().fold(0.0, f64::max);
    let smallest = singular.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest <= RANK_TOLERANCE * largest.max(f64::MIN_POSITIVE) {
        log::warn!(
            "Procrustes cross-product is rank deficient (singular value {smallest:e}); \
             using the SVD completion"
        );
    }
    let rotated = loadings.transformed(&t)?;
    let criterion = (rotated.as_matrix() - target.as_matrix()).norm_squared();
    Ok(RotationResult { rotated, transform: t, criterion, iterations: 1, converged: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarimaxSettings {
    /// Number of starting rotations; the first is the identity.
    pub starts: usize,
    pub max_iter: usize,
    /// Stop once the projected gradient norm falls below this value.
    pub gradient_tolerance: f64,
    pub kaiser_normalize: bool,
}

impl Default for VarimaxSettings {
    fn default() -> Self {
        Self { starts: 10, max_iter: 500, gradient_tolerance: 1e-9, kaiser_normalize: true }
    }
}

/// Varimax objective in minimization form, `-||Q||^2 / 4` with
/// `Q = L^2 - colmeans(L^2)`, and its gradient with respect to `L`.
fn varimax_value_and_gradient(l: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let (p, q) = l.shape();
    let sq = l.map(|v| v * v);
    let mut centered = sq.clone();
    for j in 0..q {
        let mean = sq.column(j).sum() / p as f64;
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let value = -centered.norm_squared() / 4.0;
    let gradient = -l.component_mul(&centered);
    (value, gradient)
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(q: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(q, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut qm = qr.q();
    let r = qr.r();
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            qm.column_mut(j).neg_mut();
        }
    }
    qm
}

/// Gradient projection for one start. Returns `(T, value, iterations, converged)`.
/// A start whose line search can no longer find any decrease is at a
/// stationary point to working precision and counts as converged.
fn gpa_orthogonal(
    a: &DMatrix<f64>,
    start: DMatrix<f64>,
    settings: &VarimaxSettings,
) -> Result<(DMatrix<f64>, f64, usize, bool)> {
    let mut t = start;
    let (mut f, gq) = varimax_value_and_gradient(&(a * &t));
    let mut g = a.transpose() * gq;
    let mut step = 1.0;
    for iteration in 1..=settings.max_iter {
        let m = t.transpose() * &g;
        let sym = (&m + m.transpose()) * 0.5;
        let gp = &g - &t * sym;
        let s = gp.norm();
        if s < settings.gradient_tolerance {
            return Ok((t, f, iteration - 1, true));
        }
        step *= 2.0;
        let mut candidate = None;
        for _ in 0..=10 {
            let (tt, _) = polar_factor(&t - &gp * step)?;
            let (ft, gqt) = varimax_value_and_gradient(&(a * &tt));
            if ft < f - 0.5 * s * s * step {
                candidate = Some((tt, ft, gqt));
                break;
            }
            step *= 0.5;
        }
        let Some((tt, ft, gqt)) = candidate else {
            return Ok((t, f, iteration, true));
        };
        t = tt;
        f = ft;
        g = a.transpose() * gqt;
    }
    Ok((t, f, settings.max_iter, false))
}

/// Varimax rotation by orthogonal gradient projection, optionally on
/// Kaiser-normalized rows. The best of `settings.starts` starts is kept.
pub fn varimax_gpa<R: Rng + ?Sized>(
    loadings: &LoadingMatrix,
    settings: &VarimaxSettings,
    rng: &mut R,
) -> Result<RotationResult> {
    let q = loadings.q();
    if q < 2 {
        return Err(Error::InvalidArgument("Varimax needs at least two factors".into()));
    }
    let a = if settings.kaiser_normalize {
        let norms: Vec<f64> = loadings.communalities().iter().map(|h| if *h > 0.0 { h.sqrt() } else { 1.0 }).collect();
        loadings.rows_divided(&norms).into_matrix()
    } else {
        loadings.as_matrix().clone()
    };

    let mut best: Option<(DMatrix<f64>, f64, usize, bool)> = None;
    for start in 0..settings.starts.max(1) {
        let t0 = if start == 0 { DMatrix::identity(q, q) } else { random_orthogonal(q, rng) };
        let run = gpa_orthogonal(&a, t0, settings)?;
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (t, f, iterations, converged) = best.expect("at least one start");
    Ok(RotationResult { rotated: loadings.transformed(&t)?, transform: t, criterion: -f, iterations, converged })
}

/// Signed column permutation of `loadings` that best matches `target`,
/// maximizing the summed absolute column cross-products. Exhaustive for
/// `q <= 8`, greedy beyond.
pub fn match_columns(loadings: &LoadingMatrix, target: &LoadingMatrix) -> Result<RotationResult> {
    if loadings.p() != target.p() || loadings.q() != target.q() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", loadings.p(), loadings.q()),
            found: format!("{}x{}", target.p(), target.q()),
        });
    }
    let q = loadings.q();
    let cross = loadings.as_matrix().transpose() * target.as_matrix();
    let assignment = if q <= 8 { best_permutation(&cross) } else { greedy_assignment(&cross) };
    let mut t = DMatrix::zeros(q, q);
    for (target_col, &src) in assignment.iter().enumerate() {
        t[(src, target_col)] = if cross[(src, target_col)] < 0.0 { -1.0 } else { 1.0 };
    }
    let rotated = loadings.transformed(&t)?;
    let criterion = (rotated.as_matrix() - target.as_matrix()).norm_squared();
    Ok(RotationResult { rotated, transform: t, criterion, iterations: 1, converged: true })
}

/// `assignment[target_col] = source_col`.
fn best_permutation(cross: &DMatrix<f64>) -> Vec<usize> {
    let q = cross.nrows();
    let mut perm: Vec<usize> = (0..q).collect();
    let mut best = perm.clone();
    let mut best_score = f64::NEG_INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let score: f64 = p.iter().enumerate().map(|(t, &s)| cross[(s, t)].abs()).sum();
        if score > best_score {
            best_score = score;
            best = p.to_vec();
        }
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

fn greedy_assignment(cross: &DMatrix<f64>) -> Vec<usize> {
    let q = cross.nrows();
    let mut assignment = vec![usize::MAX; q];
    let mut used = vec![false; q];
    for _ in 0..q {
        let mut pick = (0, 0, f64::NEG_INFINITY);
        for s in (0..q).filter(|s| !used[*s]) {
            for t in (0..q).filter(|t| assignment[*t] == usize::MAX) {
                if cross[(s, t)].abs() > pick.2 {
                    pick = (s, t, cross[(s, t)].abs());
                }
            }
        }
        used[pick.0] = true;
        assignment[pick.1] = pick.0;
    }
    assignment
}
