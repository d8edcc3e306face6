//! Metric projection onto subspaces of `l^p`, distances and orthogonality tests.
//!
//! The projection minimizes `phi(c) = sum_i w_i |v_i - (B c)_i|^p` over the
//! coefficients `c` of the subspace basis `B`. The objective is smooth and
//! strictly convex for `p > 1`; its first-order condition is that the norming
//! functional of the residual annihilates the subspace, and that quantity is
//! what the solver drives to zero.

mod defect;

pub use defect::{is_eps_orthogonal, subspace_ortho_defect, Defect, DefectConfig, DEFECT_SLACK};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::serialize_dvector;
use crate::lp::Space;
use crate::subspace::Subspace;

/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
/// Cap on `|t|^(p-2)` curvature weights when `p < 2`.
const CURVATURE_CAP: f64 = 1e8;
/// Residual vectors below this fraction of `||v||` are treated as zero.
const ZERO_RESIDUAL: f64 = 1e-13;
/// Relative objective change treated as rounding noise in the line search.
const STALL: f64 = 1e-15;
const RESOLUTION: f64 = 1e3 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionConfig {
    pub max_iter: usize,
    /// Iterate until the optimality residual is at most this.
    pub target_residual: f64,
    /// A stalled solve is accepted when the residual is at most this.
    pub accept_residual: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self { max_iter: 200, target_residual: 1e-13, accept_residual: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResult {
    #[serde(serialize_with = "serialize_dvector")]
    pub coefficients: DVector<f64>,
    #[serde(serialize_with = "serialize_dvector")]
    pub point: DVector<f64>,
    pub distance: f64,
    /// `max_b |<f_{v - point}, b>|` over the basis of the subspace.
    pub optimality_residual: f64,
    pub iterations: usize,
    /// Objective after the initial guess and each accepted step; steps that
    /// change it only by rounding are left out.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Reusable solver for projections onto one subspace.
#[derive(Debug, Clone)]
pub struct Projector<'a> {
    space: &'a Space,
    basis: &'a DMatrix<f64>,
    cfg: ProjectionConfig,
}

struct Solve {
    coefficients: DVector<f64>,
    residual_vec: DVector<f64>,
    optimality: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

impl<'a> Projector<'a> {
    pub fn new(space: &'a Space, subspace: &'a Subspace, cfg: ProjectionConfig) -> Result<Self> {
        if subspace.ambient_dim() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "subspace in R^{} but space has dimension {}",
                subspace.ambient_dim(),
                space.dim()
            )));
        }
        if subspace.is_zero() {
            return Err(Error::Precondition("cannot project onto the zero subspace".into()));
        }
        Ok(Self { space, basis: subspace.basis(), cfg })
    }

    /// Projection started from the Euclidean projection coefficients.
    pub fn project(&self, v: &DVector<f64>) -> Result<ProjectionResult> {
        self.space.check(v)?;
        let start = self.basis.transpose() * v;
        self.finish(v, self.solve(v, start, true))
    }

    /// Projection started from the given coefficients.
    pub fn project_from(&self, v: &DVector<f64>, start: DVector<f64>) -> Result<ProjectionResult> {
        self.space.check(v)?;
        if start.len() != self.basis.ncols() {
            return Err(Error::DimensionMismatch("start has the wrong length".into()));
        }
        self.finish(v, self.solve(v, start, true))
    }

    /// Distance only, warm-started from `coeffs`, which is overwritten with
    /// the minimizer.
    pub fn distance_warm(&self, v: &DVector<f64>, coeffs: &mut DVector<f64>) -> Result<f64> {
        let s = self.solve(v, coeffs.clone(), false);
        let d = self.space.norm(&s.residual_vec);
        if !s.converged {
            let best = self.finish_unchecked(v, s);
            return Err(Error::NoConvergence { budget: self.cfg.max_iter, best: Box::new(best) });
        }
        coeffs.copy_from(&s.coefficients);
        Ok(d)
    }

    fn finish(&self, v: &DVector<f64>, s: Solve) -> Result<ProjectionResult> {
        let converged = s.converged;
        let out = self.finish_unchecked(v, s);
        if converged {
            Ok(out)
        } else {
            Err(Error::NoConvergence { budget: self.cfg.max_iter, best: Box::new(out) })
        }
    }

    fn finish_unchecked(&self, _v: &DVector<f64>, s: Solve) -> ProjectionResult {
        let point = self.basis * &s.coefficients;
        ProjectionResult {
            distance: self.space.norm(&s.residual_vec),
            coefficients: s.coefficients,
            point,
            optimality_residual: s.optimality,
            iterations: s.iterations,
            objective_trace: s.trace,
        }
    }

    fn residual(&self, v: &DVector<f64>, c: &DVector<f64>, r: &mut DVector<f64>) -> f64 {
        r.copy_from(v);
        r.gemv(-1.0, self.basis, c, 1.0);
        self.space.power_sum(r)
    }

    /// `B^T f_r` for the normalized duality map of `r`, or `None` when `r`
    /// is numerically zero.
    fn annihilation(&self, r: &DVector<f64>, rn: f64, g: &mut DVector<f64>) -> DVector<f64> {
        let w = self.space.weights();
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = w[i] * self.space.signed_pow(r[i] / rn);
        }
        self.basis.tr_mul(g)
    }

    fn solve(&self, v: &DVector<f64>, mut c: DVector<f64>, keep_trace: bool) -> Solve {
        let n = self.space.dim();
        let k = self.basis.ncols();
        let p = self.space.p();
        let w = self.space.weights();
        let vn = self.space.norm(v);
        let mut r = DVector::zeros(n);
        let mut trial_r = DVector::zeros(n);
        let mut g = DVector::zeros(n);
        let mut phi = self.residual(v, &c, &mut r);
        let mut trace = Vec::new();
        if keep_trace {
            trace.push(phi);
        }
        let mut optimality = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;
        // p < 2: reweighted least squares, a majorizing model of phi;
        // the exact Newton step overshoots near-zero residual entries
        let scale = if p < 2.0 { 1.0 } else { p - 1.0 };

        for it in 0..=self.cfg.max_iter {
            iterations = it;
            let rn = self.space.norm(&r);
            if rn <= ZERO_RESIDUAL * vn || rn == 0.0 {
                optimality = 0.0;
                converged = true;
                break;
            }
            let a = self.annihilation(&r, rn, &mut g);
            optimality = a.amax();
            if optimality <= self.cfg.target_residual {
                converged = true;
                break;
            }
            // rounding in r limits how well optimality can be resolved
            let accept = self.cfg.accept_residual.max(RESOLUTION * vn / rn);
            if it == self.cfg.max_iter {
                converged = optimality <= accept;
                break;
            }

            // Newton system scaled by 1 / (p ||r||^(p-2)):
            //   scale * sum_i w_i |r_i/||r|| |^(p-2) b_i b_i^T d = ||r|| B^T f_r
            let mut h = DMatrix::zeros(k, k);
            for i in 0..n {
                let t = (r[i] / rn).abs();
                let curv = if p >= 2.0 {
                    if t == 0.0 && p > 2.0 {
                        0.0
                    } else {
                        t.powf(p - 2.0)
                    }
                } else if t == 0.0 {
                    CURVATURE_CAP
                } else {
                    t.powf(p - 2.0).min(CURVATURE_CAP)
                };
                let s = scale * w[i] * curv;
                if s != 0.0 {
                    let row = self.basis.row(i);
                    h.ger(s, &row.transpose(), &row.transpose(), 1.0);
                }
            }
            let ridge = 1e-12 * (h.trace() / k as f64) + 1e-300;
            for j in 0..k {
                h[(j, j)] += ridge;
            }
            let rhs = &a * rn;
            let d = match h.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => rhs.clone(),
            };
            // d phi / d t along d is -p ||r||^(p-1) a.d
            let slope = -p * rn.powf(p - 1.0) * a.dot(&d);
            if slope.is_nan() || slope >= 0.0 {
                converged = optimality <= accept;
                break;
            }

            // relative rounding noise of phi, from cancellation in v - B c
            let flat = STALL.max(8.0 * p * f64::EPSILON * vn / rn);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = &c + &d * t;
                let trial_phi = self.residual(v, &trial, &mut trial_r);
                if trial_phi < phi && trial_phi <= phi + ARMIJO * t * slope {
                    c = trial;
                    phi = trial_phi;
                    std::mem::swap(&mut r, &mut trial_r);
                    accepted = true;
                    break;
                }
                if (trial_phi - phi).abs() <= flat * phi {
                    // objective is flat to rounding; judge the step by optimality
                    let trial_rn = self.space.norm(&trial_r);
                    if trial_rn > 0.0
                        && self.annihilation(&trial_r, trial_rn, &mut g).amax() < optimality
                    {
                        c = trial;
                        phi = trial_phi;
                        std::mem::swap(&mut r, &mut trial_r);
                        accepted = true;
                    }
                    break;
                }
                t *= 0.5;
            }
            if keep_trace && accepted && trace.last().is_none_or(|&last| phi <= last) {
                trace.push(phi);
            }
            if !accepted {
                converged = optimality <= accept;
                break;
            }
        }
        Solve { coefficients: c, residual_vec: r, optimality, iterations, converged, trace }
    }
}

/// Metric projection of `v` onto `l` with default settings.
pub fn metric_project(space: &Space, v: &DVector<f64>, l: &Subspace) -> Result<ProjectionResult> {
    Projector::new(space, l, ProjectionConfig::default())?.project(v)
}

/// `dist(v, l)`.
pub fn distance(space: &Space, v: &DVector<f64>, l: &Subspace) -> Result<f64> {
    Ok(metric_project(space, v, l)?.distance)
}

/// `max_b |<f_v, b>|` over the orthonormal basis of `e`.
pub fn orthogonality_residual(space: &Space, v: &DVector<f64>, e: &Subspace) -> Result<f64> {
    space.check(v)?;
    if e.ambient_dim() != space.dim() {
        return Err(Error::DimensionMismatch("subspace lives in another space".into()));
    }
    let f = space.duality_map(v)?;
    Ok(e.basis().tr_mul(&f).amax())
}

/// Whether `e ⊂ Ker f_v` within `tol`, i.e. `span{v}` is orthogonal to `e`.
pub fn is_orthogonal_vector(space: &Space, v: &DVector<f64>, e: &Subspace, tol: f64) -> Result<bool> {
    Ok(orthogonality_residual(space, v, e)? <= tol)
}
