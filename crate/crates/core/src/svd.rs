//! Dense singular-value helpers: leading triplet, deflation and the
//! spectrum used to bound the number of layers.
//!
//! Both routines work on the smaller of the two Gram matrices (`X Xᵀ` or
//! `Xᵀ X`) and recover the other singular vector with one product, which
//! keeps wide matrices such as `500 × 20000` cheap.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A singular triplet `(s, u, v)` with `‖u‖ = ‖v‖ = 1` and `s = uᵀ X v ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub s: f64,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

fn is_zero(x: ArrayView2<'_, f64>) -> bool {
    x.iter().all(|&v| v == 0.0)
}

fn symmetric_eigen(g: &Array2<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let m = g.nrows();
    let mat = DMatrix::from_fn(m, m, |i, j| g[[i, j]]);
    SymmetricEigen::new(mat)
}

fn top_eigenvector(g: &Array2<f64>) -> Array1<f64> {
    let eig = symmetric_eigen(g);
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    Array1::from_iter(eig.eigenvectors.column(best).iter().copied())
}

/// Dominant singular triplet of `x`.
///
/// The sign is fixed by making the largest-magnitude entry of `u` positive
/// (first such entry on ties), so the result is deterministic.
pub fn leading_triplet(x: ArrayView2<'_, f64>) -> Result<SingularTriplet> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 || is_zero(x) {
        return Err(Error::Degenerate("leading triplet of a zero matrix".into()));
    }
    // All-zero rows and columns contribute nothing; dropping them keeps the
    // eigenproblem small and away from exactly singular Gram blocks.
    let rows: Vec<usize> = (0..n).filter(|&i| x.row(i).iter().any(|&v| v != 0.0)).collect();
    let cols: Vec<usize> = (0..p).filter(|&j| x.column(j).iter().any(|&v| v != 0.0)).collect();
    let core = x.select(Axis(0), &rows).select(Axis(1), &cols);
    let (s, cu, cv) = if rows.len() <= cols.len() {
        let u = top_eigenvector(&core.dot(&core.t()));
        let v = core.t().dot(&u);
        let s = norm(v.view());
        (s, u, v / s)
    } else {
        let v = top_eigenvector(&core.t().dot(&core));
        let u = core.dot(&v);
        let s = norm(u.view());
        (s, u / s, v)
    };
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Degenerate(format!("leading singular value is {s}")));
    }
    let mut u = Array1::zeros(n);
    for (&i, &val) in rows.iter().zip(&cu) {
        u[i] = val;
    }
    let mut v = Array1::zeros(p);
    for (&j, &val) in cols.iter().zip(&cv) {
        v[j] = val;
    }
    let mut pivot = 0;
    for i in 1..u.len() {
        if u[i].abs() > u[pivot].abs() {
            pivot = i;
        }
    }
    if u[pivot] < 0.0 {
        u.mapv_inplace(|x| -x);
        v.mapv_inplace(|x| -x);
    }
    Ok(SingularTriplet { s, u, v })
}

/// Returns `x − s·u·vᵀ`.
pub fn deflate(
    x: ArrayView2<'_, f64>,
    s: f64,
    u: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    if u.len() != n || v.len() != p {
        return Err(Error::Dimension(format!(
            "cannot deflate {n}x{p} with u of length {} and v of length {}",
            u.len(),
            v.len()
        )));
    }
    let mut out = x.to_owned();
    if s != 0.0 {
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let su = s * u[i];
            if su != 0.0 {
                row.zip_mut_with(&v, |a, &b| *a -= su * b);
            }
        }
    }
    Ok(out)
}

/// Squared singular values in non-increasing order, `min(n, p)` of them.
pub fn squared_singular_values(x: ArrayView2<'_, f64>) -> Vec<f64> {
    let (n, p) = x.dim();
    let g = if n <= p { x.dot(&x.t()) } else { x.t().dot(&x) };
    let mut vals: Vec<f64> = symmetric_eigen(&g)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Fraction of the total variation carried by each singular value.
pub fn proportions_of_variation(x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if x.is_empty() || is_zero(x) {
        return Err(Error::Degenerate(
            "proportions of variation of a zero matrix".into(),
        ));
    }
    let vals = squared_singular_values(x);
    let total: f64 = vals.iter().sum();
    Ok(vals.into_iter().map(|v| v / total).collect())
}

pub(crate) fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub(crate) fn frobenius_sq(x: ArrayView2<'_, f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, AbsDiffEq};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
    }

    /// Golub–Kahan SVD from nalgebra; independent of the Gram route.
    fn oracle_singular_values(x: &Array2<f64>) -> Vec<f64> {
        let m = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]]);
        let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    fn random_orthogonal(m: usize, seed: u64) -> Array2<f64> {
        let g = gaussian(m, m, seed);
        let q = DMatrix::from_fn(m, m, |i, j| g[[i, j]]).qr().q();
        Array2::from_shape_fn((m, m), |(i, j)| q[(i, j)])
    }

    #[test]
    fn identity_triplet() {
        let t = leading_triplet(Array2::<f64>::eye(2).view()).unwrap();
        assert_abs_diff_eq!(t.s, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(norm(t.u.view()), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.u.dot(&t.v), 1.0, epsilon = 1e-10);
        let pivot = t.u.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(t.u.iter().any(|&x| x == pivot));
    }

    #[test]
    fn rank_one_exact() {
        let a = array![0.6, 0.8, 0.0];
        let b = array![0.0, -1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0];
        let x = 3.0
            * a.view()
                .insert_axis(ndarray::Axis(1))
                .dot(&b.view().insert_axis(ndarray::Axis(0)));
        let t = leading_triplet(x.view()).unwrap();
        assert_abs_diff_eq!(t.s, 3.0, epsilon = 1e-12);
        assert!(t.u.abs_diff_eq(&a, 1e-10));
        assert!(t.v.abs_diff_eq(&b, 1e-10));
        // Sign convention flips the pair together.
        let t2 = leading_triplet((-x).view()).unwrap();
        assert!(t2.u.abs_diff_eq(&a, 1e-10));
        assert!(t2.v.abs_diff_eq(&(-b), 1e-10));
    }

    #[test]
    fn random_matches_oracle() {
        for (n, p) in [(10, 7), (7, 10)] {
            let x = gaussian(n, p, 42);
            let t = leading_triplet(x.view()).unwrap();
            let oracle = oracle_singular_values(&x)[0];
            assert!((t.s - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", t.s);
            assert_abs_diff_eq!(norm(t.u.view()), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(norm(t.v.view()), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(t.u.dot(&x.dot(&t.v)), t.s, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_rows_and_columns_are_ignored() {
        let mut x = Array2::zeros((60, 90));
        let core = gaussian(15, 40, 9);
        for (a, i) in (0..60).step_by(4).enumerate() {
            for (b, j) in (5..85).step_by(2).enumerate() {
                x[[i, j]] = core[[a, b]];
            }
        }
        let t = leading_triplet(x.view()).unwrap();
        let oracle = oracle_singular_values(&core)[0];
        assert!((t.s - oracle).abs() <= 1e-8 * oracle);
        assert!(t.u.iter().enumerate().all(|(i, &u)| i % 4 == 0 || u == 0.0));
        assert_abs_diff_eq!(t.u.dot(&x.dot(&t.v)), t.s, epsilon = 1e-9);
    }

    #[test]
    fn deterministic() {
        let x = gaussian(30, 12, 7);
        assert_eq!(leading_triplet(x.view()), leading_triplet(x.view()));
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let z = Array2::<f64>::zeros((3, 4));
        assert!(matches!(leading_triplet(z.view()), Err(Error::Degenerate(_))));
        assert!(matches!(proportions_of_variation(z.view()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn deflate_own_rank_one_is_zero() {
        let u = array![0.6, 0.8];
        let v = array![1.0, 0.0, 0.0];
        let x: Array2<f64> = 2.5 * u.view().insert_axis(ndarray::Axis(1)).dot(&v.view().insert_axis(ndarray::Axis(0)));
        let r = deflate(x.view(), 2.5, u.view(), v.view()).unwrap();
        assert!(r.iter().all(|&e| e.abs() < 1e-15));
    }

    #[test]
    fn deflate_zero_scale_is_identity() {
        let x = gaussian(4, 3, 1);
        let r = deflate(x.view(), 0.0, array![1.0, 0.0, 0.0, 0.0].view(), array![1.0, 0.0, 0.0].view()).unwrap();
        assert_eq!(r, x);
    }

    #[test]
    fn deflate_frobenius_identity() {
        let x = gaussian(8, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut u = Array1::from_shape_fn(8, |_| StandardNormal.sample(&mut rng));
        let mut v = Array1::from_shape_fn(5, |_| StandardNormal.sample(&mut rng));
        u /= norm(u.view());
        v /= norm(v.view());
        let s = u.dot(&x.dot(&v));
        let r = deflate(x.view(), s, u.view(), v.view()).unwrap();
        assert_abs_diff_eq!(frobenius_sq(r.view()), frobenius_sq(x.view()) - s * s, epsilon = 1e-10);
    }

    #[test]
    fn deflate_dimension_mismatch() {
        let x = gaussian(3, 3, 0);
        assert!(matches!(
            deflate(x.view(), 1.0, array![1.0].view(), array![1.0, 0.0, 0.0].view()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn proportions_identity() {
        let p = proportions_of_variation(Array2::<f64>::eye(3).view()).unwrap();
        for v in p {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn proportions_rank_one() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let p = proportions_of_variation(x.view()).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn proportions_embedded_diag() {
        let mut x = Array2::<f64>::zeros((4, 4));
        x[[0, 0]] = 2.0;
        x[[1, 1]] = 1.0;
        let p = proportions_of_variation(x.view()).unwrap();
        let expected = [0.8, 0.2, 0.0, 0.0];
        for (a, b) in p.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn proportions_sum_to_one_and_decrease() {
        let p = proportions_of_variation(gaussian(9, 14, 5).view()).unwrap();
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(p.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(p.len(), 9);
    }

    #[test]
    fn proportions_rotation_invariant() {
        let x = gaussian(6, 5, 11);
        let rotated = random_orthogonal(6, 12).dot(&x).dot(&random_orthogonal(5, 13));
        let a = proportions_of_variation(x.view()).unwrap();
        let b = proportions_of_variation(rotated.view()).unwrap();
        for (l, r) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*l, *r, epsilon = 1e-8);
        }
    }
}
