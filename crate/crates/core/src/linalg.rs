//! Dense complex helpers shared by the estimators.
//!
//! Storage everywhere is `ndarray`; the Hermitian solves go through
//! `nalgebra`'s Cholesky.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// One draw of CN(0, var).
pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Conjugate transpose.
pub fn herm(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn fro_norm_sqr<'a, I: IntoIterator<Item = &'a C64>>(it: I) -> f64 {
    it.into_iter().map(|z| z.norm_sqr()).sum()
}

fn to_na(a: &ArrayView2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_na(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solves `(AᴴA + ridge·I) X = Aᴴ B`.
///
/// Returns `SingularSystem` when the regularized Gram matrix is not
/// numerically positive definite.
pub fn ridge_solve(a: &ArrayView2<C64>, b: &ArrayView2<C64>, ridge: f64) -> Result<Array2<C64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "ridge_solve: A has {} rows, B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let ah = herm(a);
    let mut gram = ah.dot(a);
    for i in 0..gram.nrows() {
        gram[[i, i]] += ridge;
    }
    let rhs = ah.dot(b);
    hpd_solve(&gram.view(), &rhs.view())
}

/// Solves `G X = B` for Hermitian positive definite `G`.
pub fn hpd_solve(g: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Result<Array2<C64>> {
    let n = g.nrows();
    if g.ncols() != n || b.nrows() != n {
        return Err(Error::ShapeMismatch("hpd_solve: non-square or mismatched system".into()));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, b.ncols())));
    }
    let scale = (0..n).map(|i| g[[i, i]].re.abs()).fold(0.0, f64::max);
    let chol = to_na(g).cholesky().ok_or(Error::SingularSystem)?;
    let l = chol.l_dirty();
    let min_pivot = (0..n).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
    if !(min_pivot * min_pivot > scale * 1e-13) || !min_pivot.is_finite() {
        return Err(Error::SingularSystem);
    }
    let x = chol.solve(&to_na(b));
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(from_na(&x))
}

/// Row-wise stacking helper: the `rows` selected rows of `a`, in order.
pub fn select_rows(a: &ArrayView2<C64>, rows: &[usize]) -> Array2<C64> {
    a.select(Axis(0), rows)
}

/// Column selection.
pub fn select_cols(a: &ArrayView2<C64>, cols: &[usize]) -> Array2<C64> {
    a.select(Axis(1), cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn ridge_solve_recovers_consistent_system() {
        let mut rng = seeded(11);
        let a = Array2::from_shape_fn((12, 4), |_| cn(&mut rng, 1.0));
        let x = Array2::from_shape_fn((4, 3), |_| cn(&mut rng, 1.0));
        let b = a.dot(&x);
        let xh = ridge_solve(&a.view(), &b.view(), 1e-14).unwrap();
        let err = (&xh - &x).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn scalar_ridge_closed_form() {
        let phi = C64::new(0.3, -1.1);
        let y = C64::new(2.0, 0.5);
        let s = 0.7;
        let a = array![[phi]];
        let b = array![[y]];
        let x = ridge_solve(&a.view(), &b.view(), s).unwrap();
        let expect = phi.conj() * y / (phi.norm_sqr() + s);
        assert!((x[[0, 0]] - expect).norm() < 1e-14);
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let a = array![[ONE, ONE], [ONE, ONE]];
        let b = array![[ONE], [ONE]];
        assert_eq!(ridge_solve(&a.view(), &b.view(), 0.0), Err(Error::SingularSystem));
    }
}
