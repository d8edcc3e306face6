//! Unit vectors of `F` orthogonal to `E` when `dim E < dim F`, and the
//! dual-argmax map `v -> e_v`.
//!
//! `v` is orthogonal to `E` exactly when its norming functional annihilates
//! `E`, i.e. `B_E^T f_v = 0`. That system is odd and homogeneous in the
//! coefficients of `v`, so it is solved on the Euclidean unit sphere of the
//! coefficient space by damped Gauss–Newton steps followed by a radial
//! retraction.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::serialize_dvector;
use crate::linalg;
use crate::lp::Space;
use crate::projection::{distance, metric_project};
use crate::seed;
use crate::subspace::Subspace;

const CURVATURE_CAP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorsukConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Success requires `max_b |<f_v, b>|` at most this.
    pub tol: f64,
    /// Iteration stops early below this residual.
    pub target: f64,
    /// Success requires `|dist(v, E) - 1|` at most this.
    pub dist_tol: f64,
}

impl Default for BorsukConfig {
    fn default() -> Self {
        Self { restarts: 64, max_iter: 100, tol: 1e-8, target: 1e-14, dist_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthoSolution {
    /// Unit vector of `F`.
    #[serde(serialize_with = "serialize_dvector")]
    pub v: DVector<f64>,
    /// `max |<f_v, b>|` over the orthonormal basis of `E`.
    pub residual: f64,
    /// `dist(v, E)` from the projection solver.
    pub dist_check: f64,
    pub restarts_used: usize,
    pub iterations: usize,
}

struct Problem<'a> {
    space: &'a Space,
    e: &'a DMatrix<f64>,
    f: &'a DMatrix<f64>,
}

impl Problem<'_> {
    /// Unit vector, its functional pairings with `E`, and the `l^p` norm of `B_F c`.
    fn evaluate(&self, c: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64)> {
        let x = self.f * c;
        let norm = self.space.norm(&x);
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let v = &x / norm;
        let fv = self.space.duality_map(&v)?;
        let r = self.e.transpose() * fv;
        Ok((v, r, norm))
    }

    fn jacobian(&self, v: &DVector<f64>, norm: f64) -> DMatrix<f64> {
        let p = self.space.p();
        let w = self.space.weights();
        let d = DVector::from_iterator(
            v.len(),
            v.iter().enumerate().map(|(i, &x)| {
                let curv = if x == 0.0 {
                    if p >= 2.0 { if p == 2.0 { 1.0 } else { 0.0 } } else { CURVATURE_CAP }
                } else {
                    x.abs().powf(p - 2.0).min(CURVATURE_CAP)
                };
                w[i] * (p - 1.0) * curv / norm
            }),
        );
        let scaled = DMatrix::from_fn(self.f.nrows(), self.f.ncols(), |r, c| d[r] * self.f[(r, c)]);
        self.e.transpose() * scaled
    }

    /// Damped Gauss–Newton from `c`; returns the final coefficients, residual
    /// and iteration count.
    fn solve(&self, mut c: DVector<f64>, cfg: &BorsukConfig) -> Result<(DVector<f64>, f64, usize)> {
        c /= c.norm();
        let (mut v, mut r, mut norm) = self.evaluate(&c)?;
        let mut lambda = 1e-6;
        let mut iters = 0;
        while iters < cfg.max_iter && r.amax() > cfg.target {
            iters += 1;
            let j = self.jacobian(&v, norm);
            let jjt = &j * j.transpose();
            let scale = jjt.diagonal().amax().max(f64::MIN_POSITIVE);
            let mut accepted = false;
            while lambda < 1e12 {
                let mut lhs = jjt.clone();
                for i in 0..lhs.nrows() {
                    lhs[(i, i)] += lambda * scale;
                }
                let Some(y) = lhs.cholesky().map(|ch| ch.solve(&r)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = &c - j.transpose() * y;
                let tn = trial.norm();
                if tn > 0.0 {
                    let trial = trial / tn;
                    if let Ok((tv, tr, tnorm)) = self.evaluate(&trial) {
                        if tr.norm() < r.norm() {
                            c = trial;
                            v = tv;
                            r = tr;
                            norm = tnorm;
                            lambda = (lambda * 0.1).max(1e-12);
                            accepted = true;
                            break;
                        }
                    }
                }
                lambda *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        Ok((c, r.amax(), iters))
    }
}

fn check_pair(space: &Space, e: &Subspace, f: &Subspace) -> Result<()> {
    if e.ambient_dim() != space.dim() || f.ambient_dim() != space.dim() {
        return Err(Error::DimensionMismatch("E and F must live in the space".into()));
    }
    if e.dim() >= f.dim() {
        return Err(Error::Precondition(format!(
            "need dim E < dim F, got {} and {}",
            e.dim(),
            f.dim()
        )));
    }
    Ok(())
}

/// Distance to `E`, with the zero subspace handled directly.
fn dist_to(space: &Space, v: &DVector<f64>, e: &Subspace) -> Result<f64> {
    if e.is_zero() {
        Ok(space.norm(v))
    } else {
        distance(space, v, e)
    }
}

/// A unit `v` in `F` with `E` in the kernel of `f_v`, from seeded restarts.
///
/// Failure means the solver did not find the vector that is known to exist.
pub fn find_orthogonal_unit(
    space: &Space,
    e: &Subspace,
    f: &Subspace,
    seed_value: u64,
    cfg: &BorsukConfig,
) -> Result<OrthoSolution> {
    check_pair(space, e, f)?;
    if e.is_zero() {
        let v = space.normalize(&f.basis().column(0).into_owned())?;
        return Ok(OrthoSolution { v, residual: 0.0, dist_check: 1.0, restarts_used: 1, iterations: 0 });
    }
    let problem = Problem { space, e: e.basis(), f: f.basis() };
    let mut best: Option<OrthoSolution> = None;
    let mut total_iters = 0;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = seed::rng(seed::derive_seed(seed_value, restart as u64));
        let c0 = DVector::from_fn(f.dim(), |_, _| StandardNormal.sample(&mut rng));
        if c0.norm() == 0.0 {
            continue;
        }
        let (c, residual, iters) = problem.solve(c0, cfg)?;
        total_iters += iters;
        let (v, _, _) = problem.evaluate(&c)?;
        let better = best.as_ref().is_none_or(|b| residual < b.residual);
        if residual <= cfg.tol {
            let dist = dist_to(space, &v, e)?;
            let sol = OrthoSolution {
                v,
                residual,
                dist_check: dist,
                restarts_used: restart + 1,
                iterations: total_iters,
            };
            if (dist - 1.0).abs() <= cfg.dist_tol {
                return Ok(sol);
            }
            if better {
                best = Some(sol);
            }
        } else if better {
            let dist = dist_to(space, &v, e).unwrap_or(f64::NAN);
            best = Some(OrthoSolution {
                v,
                residual,
                dist_check: dist,
                restarts_used: restart + 1,
                iterations: total_iters,
            });
        }
    }
    Err(Error::ExistenceSearchFailed { restarts: cfg.restarts, best: best.map(Box::new) })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualArgmax {
    /// The unit vector of `E` maximizing `f_v`.
    #[serde(serialize_with = "serialize_dvector")]
    pub e_v: DVector<f64>,
    /// `m(v) = <f_v, e_v>`.
    pub m_value: f64,
}

/// Maximizes `f_v` over the unit sphere of `E`.
///
/// With `a = B_E^T f_v`, the maximizer is the normalized minimal-norm point of
/// the affine slice `{x in E : <f_v, x> = 1}`, found by one metric projection.
pub fn dual_argmax(space: &Space, v: &DVector<f64>, e: &Subspace) -> Result<DualArgmax> {
    if e.ambient_dim() != space.dim() {
        return Err(Error::DimensionMismatch("E lives in another space".into()));
    }
    if e.is_zero() {
        return Err(Error::Precondition("E must be nontrivial".into()));
    }
    let fv = space.duality_map(v)?;
    let b = e.basis();
    let a = b.transpose() * fv;
    let max_abs = a.amax();
    if max_abs <= 1e-12 {
        return Err(Error::DegenerateFunctional { max_abs });
    }
    // solve for the sign-normalized functional so that v -> -v flips e_v exactly
    let lead = a.iamax();
    let s = a[lead].signum();
    let a = &a * s;
    let c0 = &a / a.norm_squared();
    let x = b * c0;
    let r = if e.dim() == 1 {
        x
    } else {
        let z = linalg::null_space(&DMatrix::from_row_slice(1, a.len(), a.as_slice()), None);
        let slice = Subspace::from_orthonormal(b * z)?;
        let proj = metric_project(space, &x, &slice)?;
        x - proj.point
    };
    let nr = space.norm(&r);
    Ok(DualArgmax { e_v: r * (s / nr), m_value: 1.0 / nr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KkmSummary {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub worst_residual: f64,
    pub worst_dist_error: f64,
}

/// Runs [`find_orthogonal_unit`] with `trials` derived seeds.
pub fn verify_kkm(
    space: &Space,
    e: &Subspace,
    f: &Subspace,
    trials: usize,
    seed_value: u64,
    cfg: &BorsukConfig,
) -> Result<KkmSummary> {
    check_pair(space, e, f)?;
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let outcomes: Vec<(bool, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            match find_orthogonal_unit(space, e, f, seed::derive_seed(seed_value, t as u64), cfg) {
                Ok(s) => Ok((true, s.residual, (s.dist_check - 1.0).abs())),
                Err(Error::ExistenceSearchFailed { best, .. }) => Ok(match best {
                    Some(b) => (false, b.residual, (b.dist_check - 1.0).abs()),
                    None => (false, f64::INFINITY, f64::INFINITY),
                }),
                Err(err) => Err(err),
            }
        })
        .collect::<Result<_>>()?;
    let successes = outcomes.iter().filter(|o| o.0).count();
    Ok(KkmSummary {
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        worst_residual: outcomes.iter().map(|o| o.1).fold(0.0, f64::max),
        worst_dist_error: outcomes.iter().map(|o| o.2).fold(0.0, f64::max),
    })
}
