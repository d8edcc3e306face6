//! Orthogonality defect `delta(K, E) = min { dist(v, E) : v in K, ||v|| = 1 }`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{ProjectionConfig, Projector};
use crate::error::{Error, Result};
use crate::io::serialize_dvector;
use crate::lp::Space;
use crate::seed;
use crate::subspace::Subspace;

/// Rounding allowance when comparing a defect against `1 - eps`.
pub const DEFECT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectConfig {
    /// Angles sampled on `[0, pi)` when `dim K = 2`.
    pub angle_grid: usize,
    /// Random directions sampled when `dim K >= 3`.
    pub random_starts: usize,
    /// Number of best sampled directions refined by coordinate descent.
    pub refine_top: usize,
    /// Seed for the random directions.
    pub seed: u64,
    pub projection: ProjectionConfig,
}

impl Default for DefectConfig {
    fn default() -> Self {
        Self {
            angle_grid: 720,
            random_starts: 512,
            refine_top: 3,
            seed: 0x0D3F_EC75,
            projection: ProjectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Defect {
    pub delta: f64,
    /// Unit vector of `K` with `dist(witness, E) = delta`.
    #[serde(serialize_with = "serialize_dvector")]
    pub witness: DVector<f64>,
    /// Coordinates of the witness direction in the basis of `K`.
    pub params: Vec<f64>,
    pub evaluations: usize,
}

struct Evaluator<'a> {
    space: &'a Space,
    k: &'a Subspace,
    proj: Projector<'a>,
    warm: DVector<f64>,
    evaluations: usize,
}

impl Evaluator<'_> {
    fn point(&self, c: &[f64]) -> Result<DVector<f64>> {
        self.space.sphere_point(self.k, c)
    }

    fn eval(&mut self, c: &[f64]) -> Result<f64> {
        let x = self.point(c)?;
        self.evaluations += 1;
        let mut warm = self.warm.clone();
        match self.proj.distance_warm(&x, &mut warm) {
            Ok(d) => {
                self.warm = warm;
                Ok(d)
            }
            Err(_) => {
                // a poor warm start can stall; retry from the Euclidean guess
                let mut cold = self.proj.basis.tr_mul(&x);
                let d = self.proj.distance_warm(&x, &mut cold)?;
                self.warm = cold;
                Ok(d)
            }
        }
    }
}

/// Minimizes `dist(v, E)` over the unit sphere of `K`.
pub fn subspace_ortho_defect(
    space: &Space,
    k: &Subspace,
    e: &Subspace,
    cfg: &DefectConfig,
) -> Result<Defect> {
    if k.is_zero() {
        return Err(Error::Precondition("K must be nontrivial".into()));
    }
    if k.ambient_dim() != space.dim() {
        return Err(Error::DimensionMismatch("K lives in another space".into()));
    }
    let proj = Projector::new(space, e, cfg.projection)?;
    let mut ev = Evaluator { space, k, proj, warm: DVector::zeros(e.dim()), evaluations: 0 };
    ev.warm = ev.proj.basis.tr_mul(&ev.point(&vec![1.0; k.dim()])?);

    let (delta, params) = match k.dim() {
        1 => (ev.eval(&[1.0])?, vec![1.0]),
        2 => minimize_on_circle(&mut ev, cfg.angle_grid.max(8))?,
        _ => minimize_on_sphere(&mut ev, cfg)?,
    };
    if !delta.is_finite() {
        return Err(Error::DefectNoConvergence { best: delta });
    }
    let witness = ev.point(&params)?;
    Ok(Defect { delta, witness, params, evaluations: ev.evaluations })
}

fn circle(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

fn minimize_on_circle(ev: &mut Evaluator, grid: usize) -> Result<(f64, Vec<f64>)> {
    let h = PI / grid as f64;
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..grid {
        let theta = j as f64 * h;
        let d = ev.eval(&circle(theta))?;
        if d < best.0 {
            best = (d, theta);
        }
    }
    // golden-section refinement on the bracketing cell
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = ev.eval(&circle(x1))?;
    let mut f2 = ev.eval(&circle(x2))?;
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = ev.eval(&circle(x1))?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = ev.eval(&circle(x2))?;
        }
    }
    for (f, x) in [(f1, x1), (f2, x2)] {
        if f < best.0 {
            best = (f, x);
        }
    }
    Ok((best.0, circle(best.1).to_vec()))
}

fn minimize_on_sphere(ev: &mut Evaluator, cfg: &DefectConfig) -> Result<(f64, Vec<f64>)> {
    let dim = ev.k.dim();
    let mut rng = seed::rng(cfg.seed);
    let mut samples: Vec<(f64, Vec<f64>)> = Vec::with_capacity(cfg.random_starts);
    for _ in 0..cfg.random_starts.max(1) {
        let mut c: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        c.iter_mut().for_each(|x| *x /= norm);
        let d = ev.eval(&c)?;
        samples.push((d, c));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = samples[0].clone();
    for (d0, c0) in samples.into_iter().take(cfg.refine_top.max(1)) {
        let refined = coordinate_descent(ev, d0, c0)?;
        if refined.0 < best.0 {
            best = refined;
        }
    }
    Ok(best)
}

fn coordinate_descent(ev: &mut Evaluator, mut fbest: f64, mut c: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    let dim = c.len();
    let mut step = 0.1;
    let mut sweeps = 0;
    while step > 1e-9 && sweeps < 2000 {
        sweeps += 1;
        let mut improved = false;
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut trial = c.clone();
                trial[j] += sign * step;
                let norm = trial.iter().map(|x| x * x).sum::<f64>().sqrt();
                trial.iter_mut().for_each(|x| *x /= norm);
                let f = ev.eval(&trial)?;
                if f < fbest {
                    fbest = f;
                    c = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((fbest, c))
}

/// `delta(K, E) >= 1 - eps`, up to [`DEFECT_SLACK`].
pub fn is_eps_orthogonal(
    space: &Space,
    k: &Subspace,
    e: &Subspace,
    eps: f64,
    cfg: &DefectConfig,
) -> Result<bool> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Precondition(format!("eps = {eps} must lie in [0, 1)")));
    }
    let d = subspace_ortho_defect(space, k, e, cfg)?;
    Ok(d.delta >= 1.0 - eps - DEFECT_SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::projection::distance;

    #[test]
    fn contained_subspace_has_zero_defect() {
        let s = Space::finite(5, 3.0).unwrap();
        let e = Subspace::random_grassmann(5, 3, 4).unwrap();
        let k = Subspace::from_orthonormal(e.basis().columns(0, 2).into_owned()).unwrap();
        let d = subspace_ortho_defect(&s, &k, &e, &DefectConfig::default()).unwrap();
        assert!(d.delta < 1e-10);
        assert!(!is_eps_orthogonal(&s, &k, &e, 0.5, &DefectConfig::default()).unwrap());
    }

    #[test]
    fn coordinate_planes_are_orthogonal_in_l3() {
        let s = Space::finite(3, 3.0).unwrap();
        let k = Subspace::coordinate(3, &[0, 1]).unwrap();
        let e = Subspace::coordinate(3, &[2]).unwrap();
        let cfg = DefectConfig::default();
        let d = subspace_ortho_defect(&s, &k, &e, &cfg).unwrap();
        assert!((d.delta - 1.0).abs() < 1e-12);
        assert!(is_eps_orthogonal(&s, &k, &e, 0.0, &cfg).unwrap());
        assert!(is_eps_orthogonal(&s, &k, &e, 0.3, &cfg).unwrap());
        assert!(is_eps_orthogonal(&s, &k, &e, 1.0, &cfg).is_err());
    }

    #[test]
    fn hilbert_defect_matches_principal_angles() {
        // p = 2: dist(v, E) = |(I - P_E) v|, so delta is the smallest singular
        // value of (I - P_E) B_K.
        let s = Space::finite(6, 2.0).unwrap();
        for seed in 0..5 {
            let e = Subspace::random_grassmann(6, 2, 100 + seed).unwrap();
            for kdim in [2, 3] {
                let k = Subspace::random_grassmann(6, kdim, 200 + seed).unwrap();
                let resid = k.basis() - e.basis() * (e.basis().transpose() * k.basis());
                let oracle = *linalg::singular_values(&resid).last().unwrap();
                let d = subspace_ortho_defect(&s, &k, &e, &DefectConfig::default()).unwrap();
                assert!((d.delta - oracle).abs() < 1e-6, "k={kdim}: {} vs {oracle}", d.delta);
            }
        }
    }

    #[test]
    fn witness_attains_reported_value() {
        let s = Space::finite(4, 3.0).unwrap();
        let k = Subspace::random_grassmann(4, 2, 8).unwrap();
        let e = Subspace::random_grassmann(4, 2, 9).unwrap();
        let d = subspace_ortho_defect(&s, &k, &e, &DefectConfig::default()).unwrap();
        assert!((s.norm(&d.witness) - 1.0).abs() < 1e-12);
        assert!(k.contains(&Subspace::span_of(std::slice::from_ref(&d.witness)).unwrap(), 1e-12).unwrap());
        assert!((distance(&s, &d.witness, &e).unwrap() - d.delta).abs() < 1e-6);
        assert!((0.0..=1.0 + 1e-12).contains(&d.delta));
    }
}
