//! Discretized `L^3(0,1)` model of the pair `(E_n, F)` with no orthogonal
//! subspace.
//!
//! `E_n` is the space of polynomials of degree below `n` sampled on a composite
//! Gauss–Legendre grid. The norming functionals `f_i` of sampled unit vectors
//! of `E_n` span `D`, and `H = D^perp` under the coordinate pairing. Any `K`
//! with `E_n` orthogonal to `K` satisfies `f_e(K) = 0` for every `e`, so
//! `K ⊆ H`; a subspace `F` meeting `H` only in zero therefore contains no such
//! `K`. Only sign-definite polynomials are sampled: the resulting `H` contains
//! the one built from all of `E_n`, so the certificate is unaffected.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::Space;
use crate::quadrature::{shifted_legendre, Quadrature};
use crate::seed;
use crate::subspace::Subspace;

/// Sines below this count as a nontrivial intersection.
const TRANSVERSAL_TOL: f64 = 1e-8;
/// Gram–Schmidt drops residuals below this (columns have unit norm).
const GS_DROP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Q1Config {
    pub n: usize,
    /// Grid size `M`; a multiple of 16.
    pub grid: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub rank_tol: f64,
    /// `separated` requires the smallest angle between `F` and `H` to exceed this.
    pub angle_tol: f64,
    /// Rejected draws allowed per accepted sample.
    pub rejections_per_sample: usize,
    /// Draws of `F` before giving up on transversality.
    pub f_attempts: usize,
}

impl Default for Q1Config {
    fn default() -> Self {
        Self {
            n: 3,
            grid: 2048,
            sample_count: 2000,
            seed: 0x0051_DE30,
            rank_tol: 1e-8,
            angle_tol: 1e-3,
            rejections_per_sample: 1000,
            f_attempts: 16,
        }
    }
}

impl Q1Config {
    pub fn new(n: usize, grid: usize, sample_count: usize, seed_value: u64) -> Self {
        Self { n, grid, sample_count, seed: seed_value, ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Q1Report {
    pub n: usize,
    pub p: f64,
    pub grid_size: usize,
    pub sample_count: usize,
    /// Numerical rank of the sampled functionals.
    pub d: usize,
    pub bound: f64,
    /// Rank of the first half of the samples; equal to `d` on saturation.
    pub rank_half: usize,
    pub h_dim: usize,
    pub singular_values: Vec<f64>,
    pub f_basis: Subspace,
    pub f_draws: usize,
    pub min_principal_angle_f_h: f64,
    pub min_principal_angle_e_h: f64,
    pub angle_tol: f64,
    pub separated: bool,
    /// `max_i |(I - P_D) f_i| / |f_i|`; bounds `|<f_i, h>| / |f_i|` for unit `h` in `H`.
    pub max_duality_leak: f64,
    pub rejected_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankLemmaReport {
    pub n: usize,
    pub grid_size: usize,
    pub sample_count: usize,
    pub d: usize,
    pub bound: f64,
    pub pass: bool,
}

/// `n + n/2 - 1/2`.
pub fn rank_lemma_bound(n: usize) -> f64 {
    n as f64 + n as f64 / 2.0 - 0.5
}

struct RankData {
    e_basis: DMatrix<f64>,
    d_basis: DMatrix<f64>,
    d: usize,
    rank_half: usize,
    singular_values: Vec<f64>,
    leak: f64,
    rejected: usize,
}

fn check_config(cfg: &Q1Config) -> Result<()> {
    if cfg.n == 0 || cfg.n.is_multiple_of(2) {
        return Err(Error::Precondition(format!("n must be odd, got {}", cfg.n)));
    }
    if cfg.grid < 1024 {
        return Err(Error::Precondition(format!("grid must be at least 1024, got {}", cfg.grid)));
    }
    if cfg.sample_count < 2 {
        return Err(Error::Precondition("need at least 2 samples".into()));
    }
    if cfg.grid < cfg.n {
        return Err(Error::Precondition("grid smaller than the polynomial space".into()));
    }
    Ok(())
}

/// Appends `v` to the orthonormal set `q` unless it is already in its span.
fn gram_schmidt_push(q: &mut Vec<DVector<f64>>, mut v: DVector<f64>) {
    for _pass in 0..2 {
        for b in q.iter() {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    let norm = v.norm();
    if norm > GS_DROP {
        q.push(v / norm);
    }
}

fn sampled_rank(cfg: &Q1Config) -> Result<RankData> {
    check_config(cfg)?;
    let quad = Quadrature::unit_interval(cfg.grid)?;
    let space = Space::discretized(&quad, 3.0)?;
    let m = quad.len();
    let mut legendre = DMatrix::zeros(m, cfg.n);
    for (r, &t) in quad.nodes.iter().enumerate() {
        for (c, val) in shifted_legendre(cfg.n, t).into_iter().enumerate() {
            legendre[(r, c)] = val;
        }
    }
    let e_basis = linalg::orthonormal_range(&legendre, None);

    let mut rng = seed::rng(seed::derive_seed(cfg.seed, 0));
    let budget = cfg.rejections_per_sample.saturating_mul(cfg.sample_count);
    let mut rejected = 0;
    let mut functionals = DMatrix::zeros(m, cfg.sample_count);
    let mut q: Vec<DVector<f64>> = Vec::new();
    for i in 0..cfg.sample_count {
        let poly = loop {
            let c = DVector::from_fn(cfg.n, |_, _| StandardNormal.sample(&mut rng));
            let poly = &legendre * c;
            let pos = poly.iter().all(|&x| x >= 0.0);
            let neg = poly.iter().all(|&x| x <= 0.0);
            if (pos || neg) && poly.amax() > 0.0 {
                break poly;
            }
            rejected += 1;
            if rejected > budget {
                return Err(Error::RejectionBudgetExhausted(rejected));
            }
        };
        let unit = space.normalize(&poly)?;
        let f = space.duality_map(&unit)?;
        let f = &f / f.norm();
        gram_schmidt_push(&mut q, f.clone());
        functionals.set_column(i, &f);
    }

    let q = DMatrix::from_columns(&q);
    let coords = q.transpose() * &functionals;
    let svd = linalg::sorted_svd(&coords);
    let d = linalg::rank_from_singular_values(&svd.singular_values, cfg.rank_tol);
    let half = coords.columns(0, cfg.sample_count / 2).into_owned();
    let rank_half = linalg::numerical_rank(&half, Some(cfg.rank_tol));
    let d_basis = &q * svd.u.columns(0, d);

    let proj = &d_basis * (d_basis.transpose() * &functionals);
    let leak = (&functionals - proj)
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);

    Ok(RankData {
        e_basis,
        d_basis,
        d,
        rank_half,
        singular_values: svd.singular_values,
        leak,
        rejected,
    })
}

fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    linalg::singular_values(m).last().copied().unwrap_or(0.0)
}

/// Builds `E_n`, the sampled span `D`, `H = D^perp` and a random `F` of
/// dimension `d` transversal to `H` and `E_n`.
pub fn q1_demo(cfg: &Q1Config) -> Result<Q1Report> {
    let data = sampled_rank(cfg)?;
    if data.rank_half != data.d {
        return Err(Error::RankNotSaturated { half: data.rank_half, full: data.d });
    }
    let m = cfg.grid;
    let sin_e_h = smallest_singular_value(&(data.d_basis.transpose() * &data.e_basis));

    // draws transversal to H but within angle_tol of it are kept as fallback
    let mut best: Option<(Subspace, f64, usize)> = None;
    for attempt in 0..cfg.f_attempts {
        let f_seed = seed::derive_seed(cfg.seed, 1 + attempt as u64);
        let f = Subspace::random_grassmann(m, data.d, f_seed)?;
        // F ∩ H = {0} iff P_D is injective on F
        let sin_f_h = smallest_singular_value(&(data.d_basis.transpose() * f.basis()));
        let joint = DMatrix::from_columns(
            &f.basis_vectors()
                .into_iter()
                .chain(linalg::columns(&data.e_basis))
                .collect::<Vec<_>>(),
        );
        let f_e_free = smallest_singular_value(&joint) > TRANSVERSAL_TOL;
        if sin_f_h > TRANSVERSAL_TOL && f_e_free {
            let done = sin_f_h.min(1.0).asin() > cfg.angle_tol;
            if best.as_ref().is_none_or(|b| sin_f_h > b.1) {
                best = Some((f, sin_f_h, attempt + 1));
            }
            if done {
                break;
            }
        }
    }
    let Some((f, sin_f_h, draws)) = best else {
        return Err(Error::TransversalityFailure(cfg.f_attempts));
    };
    let angle = sin_f_h.min(1.0).asin();
    Ok(Q1Report {
        n: cfg.n,
        p: 3.0,
        grid_size: m,
        sample_count: cfg.sample_count,
        d: data.d,
        bound: rank_lemma_bound(cfg.n),
        rank_half: data.rank_half,
        h_dim: m - data.d,
        singular_values: data.singular_values,
        f_basis: f,
        f_draws: draws,
        min_principal_angle_f_h: angle,
        min_principal_angle_e_h: sin_e_h.min(1.0).asin(),
        angle_tol: cfg.angle_tol,
        separated: angle > cfg.angle_tol,
        max_duality_leak: data.leak,
        rejected_samples: data.rejected,
    })
}

/// `pass` iff the sampled rank reaches `n + n/2 - 1/2`.
pub fn rank_lemma_check(cfg: &Q1Config) -> Result<RankLemmaReport> {
    let data = sampled_rank(cfg)?;
    if data.rank_half != data.d {
        return Err(Error::RankNotSaturated { half: data.rank_half, full: data.d });
    }
    let bound = rank_lemma_bound(cfg.n);
    Ok(RankLemmaReport {
        n: cfg.n,
        grid_size: cfg.grid,
        sample_count: cfg.sample_count,
        d: data.d,
        bound,
        pass: data.d as f64 >= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(rank_lemma_bound(1), 1.0);
        assert_eq!(rank_lemma_bound(3), 4.0);
        assert_eq!(rank_lemma_bound(5), 7.0);
        assert_eq!(rank_lemma_bound(7), 10.0);
    }

    #[test]
    fn constants_give_rank_one() {
        let r = rank_lemma_check(&Q1Config::new(1, 1024, 50, 1)).unwrap();
        assert_eq!((r.d, r.pass), (1, true));
    }

    #[test]
    fn cubic_rank_reaches_bound() {
        let r = rank_lemma_check(&Q1Config::new(3, 1024, 200, 2)).unwrap();
        assert!(r.pass);
        assert_eq!(r.d, 5);
    }

    #[test]
    fn preconditions() {
        assert!(rank_lemma_check(&Q1Config::new(2, 1024, 50, 1)).is_err());
        assert!(rank_lemma_check(&Q1Config::new(3, 512, 50, 1)).is_err());
        assert!(rank_lemma_check(&Q1Config::new(3, 1030, 50, 1)).is_err());
    }

    #[test]
    fn demo_separates_f_from_h() {
        let r = q1_demo(&Q1Config::new(3, 1024, 200, 3)).unwrap();
        assert_eq!(r.h_dim, r.grid_size - r.d);
        assert_eq!(r.f_basis.dim(), r.d);
        assert!(r.max_duality_leak <= 1e-8);
        assert!(r.min_principal_angle_e_h > 1e-3);
        assert_eq!(r.separated, r.min_principal_angle_f_h > r.angle_tol);
    }

    #[test]
    fn gram_schmidt_skips_dependent_vectors() {
        let mut q = Vec::new();
        gram_schmidt_push(&mut q, DVector::from_column_slice(&[1.0, 1.0, 0.0]));
        gram_schmidt_push(&mut q, DVector::from_column_slice(&[2.0, 2.0, 0.0]));
        gram_schmidt_push(&mut q, DVector::from_column_slice(&[0.0, 1.0, 0.0]));
        assert_eq!(q.len(), 2);
        assert!((q[0].dot(&q[1])).abs() < 1e-15);
    }
}
