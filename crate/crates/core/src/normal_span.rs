//! Span of sphere normals along a section `L ∩ S` and the good/bad
//! classification of sections.
//!
//! For a section `L` of the unit sphere `S` of `l^p_N`, `N(S, L)` is the linear
//! span of the norming functionals `f_x`, `x ∈ L ∩ S`. A `k`-dimensional
//! section is *bad* when this span has dimension below a threshold (`k + 1`
//! by default). For 2-planes written in a coordinate chart
//! `x_k = gamma_k1 x_1 + gamma_k2 x_2`, the normals on a sign-constant arc are
//! `(x_1^(p-1), x_2^(p-1), (gamma_k1 x_1 + gamma_k2 x_2)^(p-1))` up to signs, so
//! their span is the row rank of the binomial coefficient matrix. That is the
//! algebraic certificate computed here for `p = 3` and `p = 5`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::Space;
use crate::seed;
use crate::subspace::{GammaParam, Subspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalSpanConfig {
    /// Sample count on `L ∩ S`; `None` means `64 k^2`.
    pub n_samples: Option<usize>,
    /// Relative singular-value cutoff for numerical rank.
    pub rank_tol: f64,
    /// Samples on the sign-constant arc used for the algebraic comparison.
    pub arc_samples: usize,
    /// Seed for sampling directions when `dim L >= 3`.
    pub seed: u64,
}

impl Default for NormalSpanConfig {
    fn default() -> Self {
        Self { n_samples: None, rank_tol: 1e-8, arc_samples: 64, seed: 0x4E05_3A11 }
    }
}

impl NormalSpanConfig {
    pub fn samples_for(&self, k: usize) -> usize {
        self.n_samples.unwrap_or(64 * k * k).max(2)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalSpan {
    pub rank: usize,
    pub n_samples: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadnessVerdict {
    pub dim_normal_span: usize,
    pub threshold: usize,
    pub is_bad: bool,
    pub sampled_rank: usize,
    /// Rank of the binomial coefficient matrix in the best coordinate chart.
    pub algebraic_rank: Option<usize>,
    /// Sampled rank restricted to one sign-constant arc of the section.
    pub arc_sampled_rank: Option<usize>,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlgebraicVerdict {
    pub rank: usize,
    pub is_bad: bool,
    /// p = 3: all products `gamma_k1 gamma_k2` vanish. p = 5: the mixed
    /// monomial vectors are pairwise colinear. Must agree with `is_bad`.
    pub structural_check: bool,
}

fn sample_directions(k: usize, n: usize, seed_value: u64) -> Vec<Vec<f64>> {
    if k == 1 {
        return vec![vec![1.0]; n.min(1)];
    }
    if k == 2 {
        return (0..n)
            .map(|j| {
                let t = PI * j as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = seed::rng(seed_value);
    (0..n)
        .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Rows are the norming functionals at the sampled points of `L ∩ S`.
pub fn sampled_normals(space: &Space, l: &Subspace, n: usize, seed_value: u64) -> Result<DMatrix<f64>> {
    let dirs = sample_directions(l.dim(), n, seed_value);
    let mut rows = DMatrix::zeros(dirs.len(), space.dim());
    for (i, c) in dirs.iter().enumerate() {
        let x = space.sphere_point(l, c)?;
        let f = space.duality_map(&x)?;
        rows.set_row(i, &f.transpose());
    }
    Ok(rows)
}

fn rank_of_rows(rows: &DMatrix<f64>, tol: f64) -> (usize, Vec<f64>) {
    let s = linalg::singular_values(rows);
    (linalg::rank_from_singular_values(&s, tol), s)
}

/// Numerical dimension of `N(S, L)`; fails with `Unstable` when doubling the
/// sample count changes the rank.
pub fn normal_span_dim(space: &Space, l: &Subspace, cfg: &NormalSpanConfig) -> Result<NormalSpan> {
    if l.is_zero() {
        return Err(Error::Precondition("section must be nontrivial".into()));
    }
    let n = cfg.samples_for(l.dim());
    let doubled = sampled_normals(space, l, 2 * n, cfg.seed)?;
    // the first n directions of the doubled run are the n-sample run for k != 2;
    // for k = 2 the n-point grid is every other angle of the 2n-point grid
    let base = if l.dim() == 2 {
        DMatrix::from_fn(n, space.dim(), |r, c| doubled[(2 * r, c)])
    } else {
        doubled.rows(0, n.min(doubled.nrows())).into_owned()
    };
    let (rank, singular_values) = rank_of_rows(&base, cfg.rank_tol);
    let (rank2, _) = rank_of_rows(&doubled, cfg.rank_tol);
    if rank != rank2 {
        return Err(Error::Unstable { first: rank, second: rank2 });
    }
    Ok(NormalSpan { rank, n_samples: n, singular_values })
}

/// Orthonormal basis of the sampled normal span.
pub fn normal_span_subspace(space: &Space, l: &Subspace, cfg: &NormalSpanConfig) -> Result<Subspace> {
    let n = cfg.samples_for(l.dim());
    let rows = sampled_normals(space, l, n, cfg.seed)?;
    let range = linalg::orthonormal_range(&rows.transpose(), Some(cfg.rank_tol));
    Subspace::from_orthonormal(range)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients of `x_1^(d-j) x_2^j`, `j = 0..=d`, for the normals of the
/// section written in the `(1, 2)` chart, with `d = p - 1`.
pub fn coefficient_matrix(gamma: &GammaParam, degree: usize) -> DMatrix<f64> {
    let n = gamma.ambient_dim();
    let mut m = DMatrix::zeros(n, degree + 1);
    m[(0, 0)] = 1.0;
    m[(1, degree)] = 1.0;
    for k in 0..gamma.gamma.nrows() {
        let (a, b) = (gamma.gamma[(k, 0)], gamma.gamma[(k, 1)]);
        for j in 0..=degree {
            m[(k + 2, j)] = binomial(degree, j) * a.powi((degree - j) as i32) * b.powi(j as i32);
        }
    }
    m
}

fn algebraic_rank(gamma: &GammaParam, degree: usize, tol: f64) -> usize {
    linalg::numerical_rank(&coefficient_matrix(gamma, degree), Some(tol))
}

/// `p = 3` test: rank of the `N x 3` matrix with rows `(1,0,0)`, `(0,0,1)`,
/// `(g1^2, 2 g1 g2, g2^2)`; bad iff the rank is at most 2.
pub fn algebraic_badness_p3_k2(gamma: &GammaParam) -> AlgebraicVerdict {
    let rank = algebraic_rank(gamma, 2, 1e-8);
    let scale = gamma.gamma.amax().max(1.0);
    let structural_check = gamma
        .gamma
        .row_iter()
        .all(|r| (r[0] * r[1]).abs() <= 1e-12 * scale * scale);
    AlgebraicVerdict { rank, is_bad: rank <= 2, structural_check }
}

/// `p = 5` test: rank of the `N x 5` quartic coefficient matrix; bad iff the
/// rank is at most 3. The structural check tests pairwise colinearity of the
/// mixed-monomial vectors `(g1^3 g2)`, `(g1^2 g2^2)`, `(g1 g2^3)` directly.
pub fn algebraic_badness_p5_k2(gamma: &GammaParam) -> AlgebraicVerdict {
    let rank = algebraic_rank(gamma, 4, 1e-8);
    let g = &gamma.gamma;
    let col = |e1: i32, e2: i32| {
        DVector::from_iterator(g.nrows(), g.row_iter().map(|r| r[0].powi(e1) * r[1].powi(e2)))
    };
    let v31 = col(3, 1);
    let v22 = col(2, 2);
    let v13 = col(1, 3);
    let structural_check =
        colinear(&v31, &v22) && colinear(&v31, &v13) && colinear(&v22, &v13);
    AlgebraicVerdict { rank, is_bad: rank <= 3, structural_check }
}

/// Cauchy–Schwarz equality test; a zero vector is colinear with anything.
fn colinear(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return true;
    }
    let cos = a.dot(b).abs() / (na * nb);
    1.0 - cos <= 1e-12
}

/// Largest open arc of the half circle `(x_1, x_2) = (cos t, sin t)`,
/// `t in [0, pi)`, on which none of the coordinates of the section changes sign.
pub fn sign_constant_arc(gamma: &GammaParam) -> (f64, f64) {
    let mut zeros = vec![0.0, PI / 2.0, PI];
    for r in gamma.gamma.row_iter() {
        let (a, b) = (r[0], r[1]);
        if a == 0.0 && b == 0.0 {
            continue;
        }
        // a cos t + b sin t = 0
        let t = (-a).atan2(b).rem_euclid(PI);
        zeros.push(t);
    }
    zeros.sort_by(f64::total_cmp);
    zeros
        .windows(2)
        .map(|w| (w[0], w[1]))
        .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
        .expect("at least two breakpoints")
}

/// Rank of the normals sampled on [`sign_constant_arc`].
pub fn arc_sampled_rank(space: &Space, gamma: &GammaParam, samples: usize, tol: f64) -> Result<usize> {
    if space.dim() != gamma.ambient_dim() {
        return Err(Error::DimensionMismatch("gamma does not match the space".into()));
    }
    let (a, b) = sign_constant_arc(gamma);
    let mut rows = DMatrix::zeros(samples, space.dim());
    for j in 0..samples {
        let t = a + (b - a) * (j as f64 + 0.5) / samples as f64;
        let x = gamma.point(t.cos(), t.sin());
        let f = space.duality_map(&x)?;
        rows.set_row(j, &(&f / f.norm()).transpose());
    }
    Ok(rank_of_rows(&rows, tol).0)
}

/// Default threshold: `k + 1`, except 4 for 2-planes in `l^5`.
pub fn default_threshold(p: f64, k: usize) -> usize {
    if p == 5.0 && k == 2 {
        4
    } else {
        k + 1
    }
}

fn check_classifiable(space: &Space) -> Result<()> {
    let p = space.p();
    let odd_int = p.fract() == 0.0 && p >= 3.0 && (p as i64) % 2 == 1;
    if p == 2.0 || odd_int {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "classification needs p = 2 or an odd integer p >= 3, got {p}"
        )))
    }
}

/// Good/bad verdict from the sampled rank, with the algebraic certificate
/// attached for 2-planes when `p` is 3 or 5.
pub fn classify(
    space: &Space,
    l: &Subspace,
    threshold: Option<usize>,
    cfg: &NormalSpanConfig,
) -> Result<BadnessVerdict> {
    check_classifiable(space)?;
    let threshold = threshold.unwrap_or_else(|| default_threshold(space.p(), l.dim()));
    let span = normal_span_dim(space, l, cfg)?;
    let (mut algebraic, mut arc) = (None, None);
    if l.dim() == 2 && (space.p() == 3.0 || space.p() == 5.0) {
        if let Ok((gamma, _chart)) = l.to_gamma_any_chart() {
            let verdict = if space.p() == 3.0 {
                algebraic_badness_p3_k2(&gamma)
            } else {
                algebraic_badness_p5_k2(&gamma)
            };
            algebraic = Some(verdict.rank);
            // relabeling coordinates preserves the l^p structure, so the arc
            // test runs in the chart's coordinate order
            arc = Some(arc_sampled_rank(space, &gamma, cfg.arc_samples, cfg.rank_tol)?);
        }
    }
    Ok(BadnessVerdict {
        dim_normal_span: span.rank,
        threshold,
        is_bad: span.rank < threshold,
        sampled_rank: span.rank,
        algebraic_rank: algebraic,
        arc_sampled_rank: arc,
        singular_values: span.singular_values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub trial: usize,
    pub seed: u64,
    pub rank: usize,
    pub is_bad: bool,
}

/// Classifies `n_trials` random `k`-planes of `R^N`; trial `i` uses the seed
/// `derive_seed(seed, i)`, so the output does not depend on thread count.
pub fn badness_sweep(
    space: &Space,
    k: usize,
    threshold: Option<usize>,
    n_trials: usize,
    master_seed: u64,
    cfg: &NormalSpanConfig,
) -> Result<Vec<SweepRow>> {
    if n_trials == 0 {
        return Err(Error::Precondition("n_trials must be at least 1".into()));
    }
    check_classifiable(space)?;
    (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let s = seed::derive_seed(master_seed, trial as u64);
            let l = Subspace::random_grassmann(space.dim(), k, s)?;
            let v = classify(space, &l, threshold, cfg)?;
            Ok(SweepRow { trial, seed: s, rank: v.dim_normal_span, is_bad: v.is_bad })
        })
        .collect()
}

/// Fraction of random sections classified bad.
pub fn badness_fraction(
    space: &Space,
    k: usize,
    threshold: Option<usize>,
    n_trials: usize,
    master_seed: u64,
    cfg: &NormalSpanConfig,
) -> Result<f64> {
    let rows = badness_sweep(space, k, threshold, n_trials, master_seed, cfg)?;
    Ok(rows.iter().filter(|r| r.is_bad).count() as f64 / n_trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn euclidean_normals_span_the_plane() {
        let s = Space::finite(5, 2.0).unwrap();
        let l = Subspace::random_grassmann(5, 2, 3).unwrap();
        let span = normal_span_dim(&s, &l, &NormalSpanConfig::default()).unwrap();
        assert_eq!(span.rank, 2);
        let v = classify(&s, &l, None, &NormalSpanConfig::default()).unwrap();
        assert!(v.is_bad);
    }

    #[test]
    fn cubic_coordinate_plane_is_bad() {
        let s = Space::finite(3, 3.0).unwrap();
        let l = Subspace::coordinate(3, &[0, 1]).unwrap();
        let v = classify(&s, &l, Some(3), &NormalSpanConfig::default()).unwrap();
        assert_eq!(v.dim_normal_span, 2);
        assert!(v.is_bad);
        assert_eq!(v.algebraic_rank, Some(2));
        assert_eq!(v.arc_sampled_rank, Some(2));
    }

    #[test]
    fn sheared_plane_is_good() {
        // frozen from a 200-point sampled SVD
        let s = Space::finite(3, 3.0).unwrap();
        let l = Subspace::span_of(&[v(&[1.0, 0.0, 1.0]), v(&[0.0, 1.0, 1.0])]).unwrap();
        let rows = sampled_normals(&s, &l, 200, 0).unwrap();
        let sv = linalg::singular_values(&rows);
        assert_eq!(linalg::rank_from_singular_values(&sv, 1e-8), 3);
        let span = normal_span_dim(&s, &l, &NormalSpanConfig::default()).unwrap();
        assert_eq!(span.rank, 3);
    }

    #[test]
    fn p3_algebraic_examples() {
        let a = algebraic_badness_p3_k2(&GammaParam::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!((a.rank, a.is_bad, a.structural_check), (2, true, true));
        let b = algebraic_badness_p3_k2(&GammaParam::from_rows(&[[1.0, 1.0], [1.0, -1.0]]));
        assert_eq!((b.rank, b.is_bad, b.structural_check), (3, false, false));
        let c = algebraic_badness_p3_k2(&GammaParam::from_rows(&[[0.0, 0.0]]));
        assert_eq!((c.rank, c.is_bad), (2, true));
    }

    #[test]
    fn p5_algebraic_examples() {
        let a = algebraic_badness_p5_k2(&GammaParam::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!((a.rank, a.is_bad, a.structural_check), (2, true, true));
        let b = algebraic_badness_p5_k2(&GammaParam::from_rows(&[[1.0, 1.0], [0.0, 1.0]]));
        assert_eq!((b.rank, b.is_bad, b.structural_check), (3, true, true));
        let c = algebraic_badness_p5_k2(&GammaParam::from_rows(&[[1.0, 1.0], [1.0, 2.0]]));
        assert_eq!((c.rank, c.is_bad, c.structural_check), (4, false, false));
    }

    #[test]
    fn coefficient_rows_expand_the_powers() {
        let g = GammaParam::from_rows(&[[1.0, 2.0]]);
        let m = coefficient_matrix(&g, 4);
        let expected = [1.0, 8.0, 24.0, 32.0, 16.0];
        for (j, e) in expected.iter().enumerate() {
            assert_eq!(m[(2, j)], *e);
        }
    }

    #[test]
    fn arc_avoids_sign_changes() {
        let g = GammaParam::from_rows(&[[1.0, -1.0], [2.0, 1.0]]);
        let (a, b) = sign_constant_arc(&g);
        assert!(b > a);
        let signs = |t: f64| {
            let x = g.point(t.cos(), t.sin());
            x.iter().map(|z| z.signum()).collect::<Vec<_>>()
        };
        let s0 = signs(a + 1e-6);
        for j in 1..50 {
            let t = a + (b - a) * j as f64 / 50.0;
            assert_eq!(signs(t), s0);
        }
    }

    #[test]
    fn classify_rejects_even_exponents() {
        let s = Space::finite(3, 4.0).unwrap();
        let l = Subspace::coordinate(3, &[0, 1]).unwrap();
        assert!(classify(&s, &l, None, &NormalSpanConfig::default()).is_err());
        assert_eq!(default_threshold(5.0, 2), 4);
        assert_eq!(default_threshold(3.0, 2), 3);
        assert_eq!(default_threshold(3.0, 3), 4);
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let s = Space::finite(5, 3.0).unwrap();
        let cfg = NormalSpanConfig::default();
        let a = badness_sweep(&s, 2, None, 40, 9, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| badness_sweep(&s, 2, None, 40, 9, &cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.iter().all(|r| !r.is_bad));
    }

    #[test]
    fn lipschitz_normals_on_bad_family() {
        // gamma = diag(a, 1) keeps the 2-plane bad in R^4 for every a
        let s = Space::finite(4, 3.0).unwrap();
        let cfg = NormalSpanConfig::default();
        let base = GammaParam::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).to_subspace();
        let n1 = normal_span_subspace(&s, &base, &cfg).unwrap();
        assert_eq!(n1.dim(), 2);
        for delta in [1e-3, 1e-4, 1e-5] {
            let moved = GammaParam::from_rows(&[[1.0 + delta, 0.0], [0.0, 1.0]]).to_subspace();
            let gap = base.gap_distance(&moved).unwrap();
            let n2 = normal_span_subspace(&s, &moved, &cfg).unwrap();
            assert_eq!(n2.dim(), 2);
            let ratio = n1.gap_distance(&n2).unwrap() / gap;
            assert!(ratio < 10.0, "empirical constant {ratio}");
        }
    }
}
