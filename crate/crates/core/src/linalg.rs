//! Dense helpers: sorted SVD, numerical rank, ranges and complements.

use nalgebra::{DMatrix, DVector};

/// Singular triplets sorted by decreasing singular value.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    let singular_values = order.iter().map(|&i| s[i]).collect();
    SortedSvd { u, singular_values, v_t }
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `max(rows, cols) * eps`, the relative cutoff used when none is supplied.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Number of singular values above `rel_tol * sigma_1` (sorted input).
pub fn rank_from_singular_values(s: &[f64], rel_tol: f64) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().take_while(|&&x| x > rel_tol * s1).count(),
        _ => 0,
    }
}

pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: Option<f64>) -> usize {
    let tol = rel_tol.unwrap_or_else(|| default_rank_tol(m.nrows(), m.ncols()));
    rank_from_singular_values(&singular_values(m), tol)
}

/// Orthonormal basis of the column space, truncated at `rel_tol * sigma_1`.
pub fn orthonormal_range(m: &DMatrix<f64>, rel_tol: Option<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let tol = rel_tol.unwrap_or_else(|| default_rank_tol(m.nrows(), m.ncols()));
    let svd = sorted_svd(m);
    let r = rank_from_singular_values(&svd.singular_values, tol);
    svd.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the Euclidean complement of the span of the orthonormal
/// columns of `q`.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let r = q.ncols();
    if r == 0 {
        return DMatrix::identity(n, n);
    }
    if r >= n {
        return DMatrix::zeros(n, 0);
    }
    // Householder QR of [q | I] yields a full orthogonal Q whose leading r
    // columns span range(q).
    let mut aug = DMatrix::zeros(n, r + n);
    aug.view_mut((0, 0), (n, r)).copy_from(q);
    aug.view_mut((0, r), (n, n)).fill_with_identity();
    let full_q = aug.qr().q();
    full_q.columns(r, n - r).into_owned()
}

/// Orthonormal basis of `{x : a x = 0}`.
pub fn null_space(a: &DMatrix<f64>, rel_tol: Option<f64>) -> DMatrix<f64> {
    let row_space = orthonormal_range(&a.transpose(), rel_tol);
    orthogonal_complement(&row_space)
}

/// Largest deviation of `qᵀq` from the identity.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let k = g.nrows();
    (g - DMatrix::identity(k, k)).amax()
}

/// Spectral norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let q = orthonormal_range(
            &DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 2.0, -1.0]),
            None,
        );
        let c = orthogonal_complement(&q);
        assert_eq!(c.ncols(), 2);
        assert!(orthonormality_error(&c) < 1e-14);
        assert!((q.transpose() * &c).amax() < 1e-14);
    }

    #[test]
    fn null_space_by_hand() {
        // rows (1,1,0), (0,1,1): kernel spanned by (1,-1,1)
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let k = null_space(&a, None);
        assert_eq!(k.ncols(), 1);
        let x = k.column(0);
        let s = 3f64.sqrt().recip() * x[0].signum();
        assert!((x[0] - s).abs() < 1e-14);
        assert!((x[1] + s).abs() < 1e-14);
        assert!((x[2] - s).abs() < 1e-14);
    }

    #[test]
    fn rank_counts_relative_cutoff() {
        assert_eq!(rank_from_singular_values(&[1.0, 1e-7, 1e-9], 1e-8), 2);
        assert_eq!(rank_from_singular_values(&[0.0, 0.0], 1e-8), 0);
        assert_eq!(rank_from_singular_values(&[], 1e-8), 0);
    }
}
