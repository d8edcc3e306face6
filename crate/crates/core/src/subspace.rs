//! Linear subspaces of `R^N` stored by a Euclidean-orthonormal basis.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

/// Cutoff on sines of principal angles used by [`Subspace::intersection`].
pub const DEFAULT_INTERSECTION_TOL: f64 = 1e-10;

/// A subspace of `R^N`. The zero subspace is represented with `k = 0` and is
/// what [`Subspace::kernel_of`] returns when the functionals span everything.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis that must already be orthonormal within 1e-10.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        if basis.nrows() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "basis of shape {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("basis has non-finite entries".into()));
        }
        let err = linalg::orthonormality_error(&basis);
        if err > 1e-10 {
            return Err(Error::Precondition(format!(
                "basis columns are not orthonormal (error {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    pub fn zero(n: usize) -> Self {
        Self { basis: DMatrix::zeros(n, 0) }
    }

    pub fn whole(n: usize) -> Self {
        Self { basis: DMatrix::identity(n, n) }
    }

    /// Span of the standard basis vectors with the given (0-based) indices.
    pub fn coordinate(n: usize, indices: &[usize]) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() || sorted.last().is_some_and(|&i| i >= n) {
            return Err(Error::Precondition(format!(
                "invalid coordinate indices {indices:?} in dimension {n}"
            )));
        }
        let mut basis = DMatrix::zeros(n, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            basis[(i, c)] = 1.0;
        }
        Ok(Self { basis })
    }

    /// Orthonormal basis of the span of `vectors`, which must be independent.
    pub fn span_of(vectors: &[DVector<f64>]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::Precondition("no vectors given".into()))?;
        let n = first.len();
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch("vectors of different lengths".into()));
        }
        Self::span_of_columns(&DMatrix::from_columns(vectors), None)
    }

    /// Orthonormal basis of the column space of `m`; its columns must be
    /// independent at relative tolerance `rel_tol` (default `max(N,k) eps`).
    pub fn span_of_columns(m: &DMatrix<f64>, rel_tol: Option<f64>) -> Result<Self> {
        let k = m.ncols();
        if k == 0 || m.nrows() == 0 || k > m.nrows() {
            return Err(Error::RankDeficient { rank: k.min(m.nrows()), expected: k });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("non-finite entries".into()));
        }
        let tol = rel_tol.unwrap_or_else(|| linalg::default_rank_tol(m.nrows(), k));
        let svd = linalg::sorted_svd(m);
        let rank = linalg::rank_from_singular_values(&svd.singular_values, tol);
        if rank < k {
            return Err(Error::RankDeficient { rank, expected: k });
        }
        Ok(Self { basis: svd.u.columns(0, k).into_owned() })
    }

    /// `{e : <e, n> = 0 for every n in functionals}`.
    pub fn kernel_of(functionals: &[DVector<f64>]) -> Result<Self> {
        let first = functionals
            .first()
            .ok_or_else(|| Error::Precondition("no functionals given".into()))?;
        let n = first.len();
        if functionals.iter().any(|f| f.len() != n) {
            return Err(Error::DimensionMismatch("functionals of different lengths".into()));
        }
        if functionals.iter().all(|f| f.amax() == 0.0) {
            return Err(Error::Precondition("all functionals vanish".into()));
        }
        let rows = DMatrix::from_rows(
            &functionals.iter().map(|f| f.transpose()).collect::<Vec<_>>(),
        );
        Ok(Self { basis: linalg::null_space(&rows, None) })
    }

    /// Column span of a seeded standard Gaussian `N x k` matrix.
    pub fn random_grassmann(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Precondition(format!("need 1 <= k <= N, got k={k}, N={n}")));
        }
        let mut rng = seed::rng(seed);
        loop {
            let g: DMatrix<f64> = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
            let qr = g.qr();
            let r = qr.r();
            let scale = r.diagonal().amax();
            if r.diagonal().iter().all(|d| d.abs() > 1e-10 * scale) {
                return Ok(Self { basis: qr.q() });
            }
        }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis_vectors(&self) -> Vec<DVector<f64>> {
        linalg::columns(&self.basis)
    }

    /// Euclidean orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Euclidean orthogonal complement.
    pub fn complement(&self) -> Self {
        Self { basis: linalg::orthogonal_complement(&self.basis) }
    }

    fn same_ambient(&self, other: &Self) -> Result<()> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::DimensionMismatch(format!(
                "ambient dimensions {} and {}",
                self.ambient_dim(),
                other.ambient_dim()
            )));
        }
        Ok(())
    }

    /// `||(I - P_self) B||_2` for the basis `B` of `other`: the largest
    /// Euclidean distance from a unit vector of `other` to `self`.
    pub fn max_departure(&self, other: &Self) -> Result<f64> {
        self.same_ambient(other)?;
        if other.is_zero() {
            return Ok(0.0);
        }
        let resid = other.basis() - &self.basis * (self.basis.transpose() * other.basis());
        Ok(linalg::spectral_norm(&resid).min(1.0))
    }

    /// Cosines of the principal angles, decreasing (angles increasing).
    pub fn principal_cosines(&self, other: &Self) -> Result<Vec<f64>> {
        self.same_ambient(other)?;
        let m = self.basis.transpose() * other.basis();
        Ok(linalg::singular_values(&m).into_iter().map(|s| s.min(1.0)).collect())
    }

    /// Gap metric: sine of the largest principal angle between equidimensional
    /// subspaces.
    pub fn gap_distance(&self, other: &Self) -> Result<f64> {
        self.same_ambient(other)?;
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "subspaces of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        self.max_departure(other)
    }

    /// True iff every unit vector of `other` lies within Euclidean distance
    /// `tol` of `self`.
    pub fn contains(&self, other: &Self, tol: f64) -> Result<bool> {
        Ok(self.max_departure(other)? <= tol)
    }

    /// `self ∩ other`, computed as the null space of `(I - P_other) A` mapped
    /// back through the basis `A` of `self`.
    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.intersection_with_tol(other, DEFAULT_INTERSECTION_TOL)
    }

    pub fn intersection_with_tol(&self, other: &Self, tol: f64) -> Result<Self> {
        self.same_ambient(other)?;
        let n = self.ambient_dim();
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(n));
        }
        let a = &self.basis;
        let resid = a - other.basis() * (other.basis().transpose() * a);
        // resid is N x k with N >= k, so the SVD returns a full k x k V.
        let svd = linalg::sorted_svd(&resid);
        let k = a.ncols();
        let kept: Vec<usize> = (0..k).filter(|&i| svd.singular_values[i] <= tol).collect();
        if kept.is_empty() {
            return Ok(Self::zero(n));
        }
        let coeffs = DMatrix::from_fn(k, kept.len(), |r, c| svd.v_t[(kept[c], r)]);
        let x = a * coeffs;
        Ok(Self { basis: linalg::orthonormal_range(&x, Some(1e-8)) })
    }

    /// Coefficients `gamma` with `x_k = gamma_k1 x_1 + gamma_k2 x_2` for the
    /// `(1, 2)` coordinate chart of a 2-plane.
    pub fn to_gamma(&self) -> Result<GammaParam> {
        self.to_gamma_in_chart(0, 1)
    }

    /// As [`Subspace::to_gamma`] but with coordinates `(i, j)` as the free
    /// ones; remaining coordinates keep their relative order.
    pub fn to_gamma_in_chart(&self, i: usize, j: usize) -> Result<GammaParam> {
        let n = self.ambient_dim();
        if self.dim() != 2 || n < 2 || i == j || i >= n || j >= n {
            return Err(Error::Precondition("gamma charts are defined for 2-planes".into()));
        }
        let b = &self.basis;
        let chart = DMatrix::from_row_slice(2, 2, &[b[(i, 0)], b[(i, 1)], b[(j, 0)], b[(j, 1)]]);
        let s = linalg::singular_values(&chart);
        if s[1] < 1e-8 {
            return Err(Error::CoordinateChartFailure);
        }
        let inv = chart.try_inverse().ok_or(Error::CoordinateChartFailure)?;
        let rest: Vec<usize> = (0..n).filter(|&r| r != i && r != j).collect();
        let mut gamma = DMatrix::zeros(n - 2, 2);
        for (row, &r) in rest.iter().enumerate() {
            let br = DMatrix::from_row_slice(1, 2, &[b[(r, 0)], b[(r, 1)]]);
            let g = br * &inv;
            gamma[(row, 0)] = g[(0, 0)];
            gamma[(row, 1)] = g[(0, 1)];
        }
        Ok(GammaParam { gamma })
    }

    /// Best-conditioned chart `(i, j)` for a 2-plane, preferring `(0, 1)` when
    /// it is usable.
    pub fn to_gamma_any_chart(&self) -> Result<(GammaParam, (usize, usize))> {
        if let Ok(g) = self.to_gamma() {
            return Ok((g, (0, 1)));
        }
        let n = self.ambient_dim();
        let b = &self.basis;
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let chart =
                    DMatrix::from_row_slice(2, 2, &[b[(i, 0)], b[(i, 1)], b[(j, 0)], b[(j, 1)]]);
                let smin = linalg::singular_values(&chart)[1];
                if best.is_none_or(|(_, s)| smin > s) {
                    best = Some(((i, j), smin));
                }
            }
        }
        let ((i, j), _) = best.ok_or(Error::CoordinateChartFailure)?;
        Ok((self.to_gamma_in_chart(i, j)?, (i, j)))
    }
}

/// A 2-plane written as `x_k = gamma_k1 x_1 + gamma_k2 x_2`, `k = 3..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaParam {
    /// `(N - 2) x 2`.
    pub gamma: DMatrix<f64>,
}

impl GammaParam {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if gamma.ncols() != 2 {
            return Err(Error::DimensionMismatch("gamma must have two columns".into()));
        }
        if gamma.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("gamma has non-finite entries".into()));
        }
        Ok(Self { gamma })
    }

    pub fn from_rows(rows: &[[f64; 2]]) -> Self {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self { gamma: DMatrix::from_row_slice(rows.len(), 2, &flat) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.gamma.nrows() + 2
    }

    /// The two spanning vectors `e_1 + sum gamma_k1 e_k` and `e_2 + sum gamma_k2 e_k`.
    pub fn spanning_vectors(&self) -> [DVector<f64>; 2] {
        let n = self.ambient_dim();
        let mut u = DVector::zeros(n);
        let mut w = DVector::zeros(n);
        u[0] = 1.0;
        w[1] = 1.0;
        for k in 0..self.gamma.nrows() {
            u[k + 2] = self.gamma[(k, 0)];
            w[k + 2] = self.gamma[(k, 1)];
        }
        [u, w]
    }

    /// Point of the plane with free coordinates `(x1, x2)`.
    pub fn point(&self, x1: f64, x2: f64) -> DVector<f64> {
        let n = self.ambient_dim();
        let mut x = DVector::zeros(n);
        x[0] = x1;
        x[1] = x2;
        for k in 0..self.gamma.nrows() {
            x[k + 2] = self.gamma[(k, 0)] * x1 + self.gamma[(k, 1)] * x2;
        }
        x
    }

    pub fn to_subspace(&self) -> Subspace {
        Subspace::span_of(&self.spanning_vectors())
            .expect("chart vectors are independent in the first two coordinates")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BasisRepr {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    #[serde(rename = "N")]
    n: usize,
    k: usize,
    basis: BasisRepr,
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self
            .basis
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        SubspaceRepr { n: self.ambient_dim(), k: self.dim(), basis: BasisRepr::Rows(rows) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SubspaceRepr::deserialize(d)?;
        let flat: Vec<f64> = match repr.basis {
            BasisRepr::Rows(rows) => {
                if rows.len() != repr.n || rows.iter().any(|r| r.len() != repr.k) {
                    return Err(D::Error::custom("basis rows do not match N x k"));
                }
                rows.into_iter().flatten().collect()
            }
            BasisRepr::Flat(v) => v,
        };
        if flat.len() != repr.n * repr.k {
            return Err(D::Error::custom("basis length does not match N x k"));
        }
        if repr.k == 0 {
            return Ok(Subspace::zero(repr.n));
        }
        let m = DMatrix::from_row_slice(repr.n, repr.k, &flat);
        if linalg::orthonormality_error(&m) <= 1e-10 {
            return Subspace::from_orthonormal(m).map_err(D::Error::custom);
        }
        Subspace::span_of_columns(&m, None).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn span_examples() {
        let s = Subspace::span_of(&[v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0, 0.0])]).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.contains(&Subspace::coordinate(4, &[0, 1]).unwrap(), 1e-14).unwrap());

        let s = Subspace::span_of(&[v(&[1.0, 1.0, 0.0]), v(&[0.0, 1.0, 1.0])]).unwrap();
        let probe = Subspace::span_of(&[v(&[1.0, 2.0, 1.0])]).unwrap();
        assert!(s.contains(&probe, 1e-14).unwrap());

        let x = v(&[1.0, -2.0, 0.5]);
        assert!(matches!(
            Subspace::span_of(&[x.clone(), &x * 2.0]),
            Err(Error::RankDeficient { rank: 1, expected: 2 })
        ));
    }

    #[test]
    fn kernel_examples() {
        let g = Subspace::coordinate(4, &[0, 1]).unwrap();
        let k = Subspace::kernel_of(&g.basis_vectors()).unwrap();
        assert!(k.gap_distance(&Subspace::coordinate(4, &[2, 3]).unwrap()).unwrap() < 1e-14);

        let k = Subspace::kernel_of(&[v(&[1.0, 1.0, 0.0]), v(&[0.0, 1.0, 1.0])]).unwrap();
        let expected = Subspace::span_of(&[v(&[1.0, -1.0, 1.0])]).unwrap();
        assert!(k.gap_distance(&expected).unwrap() < 1e-14);

        let full = Subspace::kernel_of(&Subspace::whole(3).basis_vectors()).unwrap();
        assert!(full.is_zero());
        assert!(Subspace::kernel_of(&[v(&[0.0, 0.0])]).is_err());
    }

    #[test]
    fn random_grassmann_is_deterministic() {
        let a = Subspace::random_grassmann(5, 2, 7).unwrap();
        let b = Subspace::random_grassmann(5, 2, 7).unwrap();
        assert_eq!(a, b);
        assert!(linalg::orthonormality_error(a.basis()) < 1e-14);
        let c = Subspace::random_grassmann(5, 2, 8).unwrap();
        assert!(a.gap_distance(&c).unwrap() > 1e-3);
        let w = Subspace::random_grassmann(3, 3, 11).unwrap();
        assert!(w.gap_distance(&Subspace::whole(3)).unwrap() < 1e-14);
        assert!(Subspace::random_grassmann(3, 4, 0).is_err());
    }

    #[test]
    fn principal_angles_are_nondegenerate_over_seeds() {
        let fixed = Subspace::coordinate(5, &[0, 1]).unwrap();
        let mut gaps: Vec<f64> = (0..1000)
            .map(|s| Subspace::random_grassmann(5, 2, s).unwrap().gap_distance(&fixed).unwrap())
            .collect();
        gaps.sort_by(f64::total_cmp);
        assert!(gaps[0] > 1e-6);
        assert!(gaps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn gap_examples() {
        let a = Subspace::random_grassmann(6, 3, 1).unwrap();
        assert!(a.gap_distance(&a).unwrap() < 1e-14);
        let e1 = Subspace::coordinate(2, &[0]).unwrap();
        let e2 = Subspace::coordinate(2, &[1]).unwrap();
        assert!((e1.gap_distance(&e2).unwrap() - 1.0).abs() < 1e-15);
        let diag = Subspace::span_of(&[v(&[1.0, 1.0])]).unwrap();
        assert!((e1.gap_distance(&diag).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(e1.gap_distance(&Subspace::whole(2)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn containment_and_intersection() {
        let a = Subspace::coordinate(3, &[0, 1]).unwrap();
        let b = Subspace::coordinate(3, &[0]).unwrap();
        assert!(a.contains(&b, 1e-12).unwrap());
        assert!(!b.contains(&a, 1e-12).unwrap());
        assert!(a.intersection(&b).unwrap().gap_distance(&b).unwrap() < 1e-14);

        let c = Subspace::coordinate(3, &[1, 2]).unwrap();
        let i = a.intersection(&c).unwrap();
        assert!(i.gap_distance(&Subspace::coordinate(3, &[1]).unwrap()).unwrap() < 1e-14);

        for s in 0..20 {
            let p = Subspace::random_grassmann(5, 2, 2 * s).unwrap();
            let q = Subspace::random_grassmann(5, 2, 2 * s + 1).unwrap();
            assert!(p.intersection(&q).unwrap().is_zero());
        }
    }

    #[test]
    fn gamma_examples() {
        let zero = GammaParam::new(DMatrix::zeros(2, 2)).unwrap();
        let l = zero.to_subspace();
        assert!(l.gap_distance(&Subspace::coordinate(4, &[0, 1]).unwrap()).unwrap() < 1e-14);

        let g = GammaParam::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let expected =
            Subspace::span_of(&[v(&[1.0, 0.0, 1.0, 0.0]), v(&[0.0, 1.0, 0.0, 1.0])]).unwrap();
        assert!(g.to_subspace().gap_distance(&expected).unwrap() < 1e-14);

        let bad = Subspace::coordinate(4, &[2, 3]).unwrap();
        assert!(matches!(bad.to_gamma(), Err(Error::CoordinateChartFailure)));
        let (g, chart) = bad.to_gamma_any_chart().unwrap();
        assert_eq!(chart, (2, 3));
        assert!(g.gamma.amax() < 1e-14);
    }

    #[test]
    fn json_round_trip_and_flat_input() {
        let a = Subspace::random_grassmann(4, 2, 3).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.starts_with("{\"N\":4,\"k\":2,\"basis\":[["));
        let b: Subspace = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);

        let flat: Subspace =
            serde_json::from_str(r#"{"N":3,"k":2,"basis":[1,0, 1,1, 0,1]}"#).unwrap();
        let expected = Subspace::span_of(&[v(&[1.0, 1.0, 0.0]), v(&[0.0, 1.0, 1.0])]).unwrap();
        assert!(flat.gap_distance(&expected).unwrap() < 1e-14);
        assert!(serde_json::from_str::<Subspace>(r#"{"N":3,"k":2,"basis":[1,0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn gamma_round_trip(seed in any::<u64>(), n in 3usize..8) {
            let l = Subspace::random_grassmann(n, 2, seed).unwrap();
            if let Ok(g) = l.to_gamma() {
                prop_assert!(g.to_subspace().gap_distance(&l).unwrap() <= 1e-10);
            }
        }

        #[test]
        fn gap_is_a_metric(seed in any::<u64>(), n in 3usize..8, k in 1usize..3) {
            let a = Subspace::random_grassmann(n, k, seed).unwrap();
            let b = Subspace::random_grassmann(n, k, seed.wrapping_add(1)).unwrap();
            let c = Subspace::random_grassmann(n, k, seed.wrapping_add(2)).unwrap();
            let ab = a.gap_distance(&b).unwrap();
            prop_assert!((ab - b.gap_distance(&a).unwrap()).abs() <= 1e-12);
            prop_assert!(ab <= a.gap_distance(&c).unwrap() + c.gap_distance(&b).unwrap() + 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn mutual_containment_matches_gap(seed in any::<u64>(), eps in 0.0f64..1e-3, tol in 1e-6f64..1e-3) {
            let a = Subspace::random_grassmann(5, 2, seed).unwrap();
            let mut m = a.basis().clone();
            m[(4, 0)] += eps;
            let b = Subspace::span_of_columns(&m, None).unwrap();
            let both = a.contains(&b, tol).unwrap() && b.contains(&a, tol).unwrap();
            prop_assert_eq!(both, a.gap_distance(&b).unwrap() <= tol);
        }

        #[test]
        fn kernel_dimension_is_rank_nullity(seed in any::<u64>(), n in 2usize..9, k in 1usize..8) {
            prop_assume!(k <= n);
            let g = Subspace::random_grassmann(n, k, seed).unwrap();
            let e = Subspace::kernel_of(&g.basis_vectors()).unwrap();
            prop_assert_eq!(e.dim(), n - k);
            prop_assert!((g.basis().transpose() * e.basis()).amax() < 1e-12);
        }
    }
}
