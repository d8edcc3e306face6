//! Composite Gauss–Legendre rules on the unit interval.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Panel order used by [`Quadrature::unit_interval`].
pub const DEFAULT_PANEL_ORDER: usize = 16;

/// Nodes and weights of a quadrature rule on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(order, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl Quadrature {
    /// Composite rule with `m` nodes split into panels of `order` points each.
    pub fn composite(m: usize, order: usize) -> Result<Self> {
        if order == 0 || m == 0 || !m.is_multiple_of(order) {
            return Err(Error::InvalidSpace(format!(
                "grid size {m} must be a positive multiple of the panel order {order}"
            )));
        }
        let panels = m / order;
        let (x, w) = gauss_legendre(order);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for j in 0..panels {
            let a = j as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn unit_interval(m: usize) -> Result<Self> {
        Self::composite(m, DEFAULT_PANEL_ORDER)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// Shifted Legendre polynomials `P_0 .. P_{count-1}` on `(0, 1)` evaluated at `t`.
pub fn shifted_legendre(count: usize, t: f64) -> Vec<f64> {
    let x = 2.0 * t - 1.0;
    let mut out = Vec::with_capacity(count);
    let (mut p0, mut p1) = (1.0, x);
    for k in 0..count {
        match k {
            0 => out.push(1.0),
            1 => out.push(x),
            _ => {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
                out.push(p2);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_rule_matches_closed_form() {
        let (x, w) = gauss_legendre(5);
        let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let expected = [-b, -a, 0.0, a, b];
        for (xi, ei) in x.iter().zip(expected) {
            assert!((xi - ei).abs() < 1e-15);
        }
        assert!((w[2] - 128.0 / 225.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_integrates_polynomials() {
        let q = Quadrature::unit_interval(2048).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        // degree 9 monomial: 1/10
        assert!((q.integrate(|t| t.powi(9)) - 0.1).abs() < 1e-14);
        assert!(q.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn shifted_legendre_is_orthogonal() {
        let q = Quadrature::unit_interval(256).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let g = q.integrate(|t| {
                    let v = shifted_legendre(5, t);
                    v[i] * v[j]
                });
                let expected = if i == j { 1.0 / (2.0 * i as f64 + 1.0) } else { 0.0 };
                assert!((g - expected).abs() < 1e-13, "{i},{j}: {g}");
            }
        }
    }

    #[test]
    fn rejects_ragged_grid() {
        assert!(Quadrature::composite(100, 16).is_err());
    }
}
