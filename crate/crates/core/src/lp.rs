//! Norms, duality maps and sphere points of smooth `l^p` spaces.
//!
//! A [`Space`] is either the finite sequence space `l^p_N` (unit weights) or a
//! quadrature model of `L^p(0, 1)` whose coordinates are function values at the
//! nodes. Dual elements are stored as coefficient vectors acting by the plain
//! coordinate pairing `<f, x> = sum_i f_i x_i`, so quadrature weights are folded
//! into the functional.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::subspace::Subspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    FiniteLp,
    DiscretizedLp01,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    kind: SpaceKind,
    p: f64,
    weights: Vec<f64>,
    unit_weights: bool,
    int_p: Option<i32>,
}

impl Space {
    pub fn new(kind: SpaceKind, p: f64, weights: Vec<f64>) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidSpace(format!("exponent p = {p} must satisfy 1 < p < inf")));
        }
        if weights.is_empty() {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidSpace("weights must be finite and positive".into()));
        }
        if kind == SpaceKind::DiscretizedLp01 {
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSpace(format!(
                    "quadrature weights sum to {total}, expected 1"
                )));
            }
        }
        let unit_weights = weights.iter().all(|&w| w == 1.0);
        let int_p = (p.fract() == 0.0 && p <= 16.0).then_some(p as i32);
        Ok(Self { kind, p, weights, unit_weights, int_p })
    }

    /// `l^p_N`.
    pub fn finite(n: usize, p: f64) -> Result<Self> {
        Self::new(SpaceKind::FiniteLp, p, vec![1.0; n])
    }

    /// `L^p(0, 1)` sampled on the nodes of `quad`.
    pub fn discretized(quad: &Quadrature, p: f64) -> Result<Self> {
        Self::new(SpaceKind::DiscretizedLp01, p, quad.weights.clone())
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `q = p / (p - 1)`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|x|^p`, exact for small integer exponents.
    #[inline]
    pub fn abs_pow(&self, x: f64) -> f64 {
        match self.int_p {
            Some(k) => x.abs().powi(k),
            None => x.abs().powf(self.p),
        }
    }

    /// `sgn(x) |x|^(p-1)` with the convention `sgn(0) 0^(p-1) = 0`.
    #[inline]
    pub fn signed_pow(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let a = match self.int_p {
            Some(k) => x.abs().powi(k - 1),
            None => x.abs().powf(self.p - 1.0),
        };
        a.copysign(x)
    }

    #[inline]
    fn weight(&self, i: usize) -> f64 {
        if self.unit_weights {
            1.0
        } else {
            self.weights[i]
        }
    }

    pub fn check(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} in a space of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("vector has non-finite coordinates".into()));
        }
        Ok(())
    }

    /// `sum_i w_i |v_i|^p`.
    pub fn power_sum(&self, v: &DVector<f64>) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, &x)| self.weight(i) * self.abs_pow(x))
            .sum()
    }

    /// `(sum_i w_i |v_i|^p)^(1/p)`, scaled by the largest entry to avoid overflow.
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        let scale = v.amax();
        if scale == 0.0 {
            return 0.0;
        }
        let s: f64 = v
            .iter()
            .enumerate()
            .map(|(i, &x)| self.weight(i) * self.abs_pow(x / scale))
            .sum();
        scale * s.powf(1.0 / self.p)
    }

    /// Norm of a functional given in plain-pairing coefficients:
    /// `(sum_i w_i^(1-q) |f_i|^q)^(1/q)`.
    pub fn dual_norm(&self, f: &DVector<f64>) -> f64 {
        let q = self.q();
        let scale = f.amax();
        if scale == 0.0 {
            return 0.0;
        }
        let s: f64 = f
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let w = self.weight(i);
                w.powf(1.0 - q) * (x / scale).abs().powf(q)
            })
            .sum();
        scale * s.powf(1.0 / q)
    }

    /// The norming functional `f_v`: `<f_v, v> = ||v||` and `||f_v||_q = 1`.
    ///
    /// Components are `w_i sgn(v_i) |v_i|^(p-1) / ||v||^(p-1)`.
    pub fn duality_map(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let nv = self.norm(v);
        if nv == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(self.duality_map_unchecked(v, nv))
    }

    pub(crate) fn duality_map_unchecked(&self, v: &DVector<f64>, norm: f64) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .enumerate()
                .map(|(i, &x)| self.weight(i) * self.signed_pow(x / norm)),
        )
    }

    /// `v / ||v||`.
    pub fn normalize(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let nv = self.norm(v);
        if nv == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(v / nv)
    }

    /// Point of `L ∩ S` obtained by normalizing `basis * params`.
    pub fn sphere_point(&self, l: &Subspace, params: &[f64]) -> Result<DVector<f64>> {
        if params.len() != l.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a subspace of dimension {}",
                params.len(),
                l.dim()
            )));
        }
        if l.ambient_dim() != self.dim() {
            return Err(Error::DimensionMismatch("subspace lives in another space".into()));
        }
        let c = DVector::from_column_slice(params);
        self.normalize(&(l.basis() * c))
    }
}

/// Plain coordinate pairing of a functional with a vector.
pub fn pair(f: &DVector<f64>, x: &DVector<f64>) -> f64 {
    f.dot(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn norm_examples() {
        assert_eq!(Space::finite(2, 2.0).unwrap().norm(&v(&[3.0, 4.0])), 5.0);
        let l3 = Space::finite(3, 3.0).unwrap();
        assert!((l3.norm(&v(&[1.0, 1.0, 0.0])) - 2f64.cbrt()).abs() < 1e-15);
        assert!((l3.norm(&v(&[1.0, -1.0, 1.0])) - 3f64.cbrt()).abs() < 1e-15);
        assert_eq!(l3.norm(&v(&[0.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Space::finite(3, 1.0).is_err());
        assert!(Space::finite(3, f64::INFINITY).is_err());
        assert!(Space::finite(0, 3.0).is_err());
        assert!(Space::new(SpaceKind::FiniteLp, 3.0, vec![1.0, -1.0]).is_err());
        assert!(Space::new(SpaceKind::DiscretizedLp01, 3.0, vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn duality_map_examples() {
        let l2 = Space::finite(3, 2.0).unwrap();
        let u = l2.normalize(&v(&[1.0, -2.0, 2.0])).unwrap();
        assert!((l2.duality_map(&u).unwrap() - &u).amax() < 1e-15);

        let l3 = Space::finite(2, 3.0).unwrap();
        let c = 2f64.cbrt();
        let f = l3.duality_map(&v(&[1.0 / c, 1.0 / c])).unwrap();
        let expected = 2f64.powf(-2.0 / 3.0);
        assert!((f[0] - expected).abs() < 1e-15 && (f[1] - expected).abs() < 1e-15);
        assert!((l3.dual_norm(&f) - 1.0).abs() < 1e-14);

        let l3 = Space::finite(3, 3.0).unwrap();
        assert_eq!(l3.duality_map(&v(&[0.0, 1.0, 0.0])).unwrap(), v(&[0.0, 1.0, 0.0]));
        assert!(matches!(l3.duality_map(&v(&[0.0; 3])), Err(Error::ZeroVector)));
    }

    #[test]
    fn constant_function_has_unit_norm() {
        let q = Quadrature::unit_interval(2048).unwrap();
        for p in [1.5, 3.0, 5.0] {
            let s = Space::discretized(&q, p).unwrap();
            let one = DVector::from_element(s.dim(), 1.0);
            assert!((s.norm(&one) - 1.0).abs() < 1e-10);
            let f = s.duality_map(&one).unwrap();
            assert!((pair(&f, &one) - 1.0).abs() < 1e-10);
            assert!((s.dual_norm(&f) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_point_examples() {
        let l3 = Space::finite(3, 3.0).unwrap();
        let plane = Subspace::coordinate(3, &[0, 1]).unwrap();
        assert_eq!(l3.sphere_point(&plane, &[1.0, 0.0]).unwrap(), v(&[1.0, 0.0, 0.0]));
        let c = 2f64.cbrt();
        let x = l3.sphere_point(&plane, &[1.0, 1.0]).unwrap();
        assert!((x - v(&[1.0 / c, 1.0 / c, 0.0])).amax() < 1e-15);
        assert!(matches!(l3.sphere_point(&plane, &[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn duality_contract(x in vec_strategy(6), p in 1.2f64..7.0) {
            let s = Space::finite(6, p).unwrap();
            let x = DVector::from_vec(x);
            let nv = s.norm(&x);
            prop_assume!(nv > 1e-6);
            let f = s.duality_map(&x).unwrap();
            prop_assert!((pair(&f, &x) - nv).abs() <= 1e-10 * nv);
            prop_assert!((s.dual_norm(&f) - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn duality_is_odd_and_homogeneous(x in vec_strategy(5), p in 1.2f64..7.0, k in -20i32..20) {
            let s = Space::finite(5, p).unwrap();
            let x = DVector::from_vec(x);
            prop_assume!(s.norm(&x) > 1e-6);
            let f = s.duality_map(&x).unwrap();
            // exact for sign flips and powers of two
            prop_assert_eq!(s.duality_map(&(-&x)).unwrap(), -&f);
            let a = 2f64.powi(k);
            prop_assert_eq!(s.duality_map(&(&x * a)).unwrap(), f.clone());
            prop_assert_eq!(s.duality_map(&(&x * -a)).unwrap(), -&f);
            let g = s.duality_map(&(&x * -3.7)).unwrap();
            prop_assert!((g + &f).amax() <= 1e-14);
        }

        #[test]
        fn hilbert_reduction(x in vec_strategy(7)) {
            let s = Space::finite(7, 2.0).unwrap();
            let x = DVector::from_vec(x);
            prop_assume!(x.norm() > 1e-6);
            let f = s.duality_map(&x).unwrap();
            prop_assert!((f - &x / x.norm()).amax() <= 1e-12);
        }

        #[test]
        fn sphere_point_is_unit_and_odd(c in vec_strategy(2), p in 1.5f64..6.0) {
            let s = Space::finite(4, p).unwrap();
            let l = Subspace::span_of(&[
                DVector::from_column_slice(&[1.0, 2.0, 0.0, -1.0]),
                DVector::from_column_slice(&[0.0, 1.0, 1.0, 3.0]),
            ]).unwrap();
            prop_assume!(c[0].abs() + c[1].abs() > 1e-6);
            let a = s.sphere_point(&l, &c).unwrap();
            let neg: Vec<f64> = c.iter().map(|x| -x).collect();
            let b = s.sphere_point(&l, &neg).unwrap();
            prop_assert!((s.norm(&a) - 1.0).abs() <= 1e-12);
            prop_assert_eq!(b, -a);
        }
    }
}
