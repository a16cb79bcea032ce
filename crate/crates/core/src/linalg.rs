//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Draws from `N(P⁻¹ r, P⁻¹)` given the precision `P` and `r`.
/// Returns `None` when `P` is not positive definite.
pub fn draw_from_precision<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    r: &DVector<f64>,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let n = r.len();
    let chol = precision.cholesky()?;
    let mean = chol.solve(r);
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    // P = L L'  =>  L'⁻¹ z has covariance P⁻¹.
    let dev = chol.l().transpose().solve_upper_triangular(&z)?;
    Some(mean + dev)
}

pub fn std_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Symmetric positive-definite inverse via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// `L D L'` factorisation of a symmetric positive-definite matrix, with `L`
/// unit lower triangular.
pub fn ldl(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    let n = m.nrows();
    let d = DVector::from_fn(n, |i, _| l[(i, i)] * l[(i, i)]);
    let unit = DMatrix::from_fn(n, n, |i, j| l[(i, j)] / l[(j, j)]);
    Some((unit, d))
}

/// Ratio of extreme singular values; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sim_rng;

    #[test]
    fn ldl_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 3.0, 0.5, 0.4, 0.5, 2.0]);
        let (l, d) = ldl(&m).unwrap();
        let back = &l * DMatrix::from_diagonal(&d) * l.transpose();
        assert!((back - m).abs().max() < 1e-12);
        for i in 0..3 {
            assert_eq!(l[(i, i)], 1.0);
        }
    }

    #[test]
    fn precision_draw_moments() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = DVector::from_vec(vec![1.0, -1.0]);
        let cov = spd_inverse(&p).unwrap();
        let mean = &cov * &r;
        let mut rng = sim_rng(1, 0, 0);
        let n = 200_000;
        let mut s = DVector::zeros(2);
        let mut ss = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let x = draw_from_precision(p.clone(), &r, &mut rng).unwrap();
            s += &x;
            ss += &x * x.transpose();
        }
        let m = s / n as f64;
        let c = ss / n as f64 - &m * m.transpose();
        assert!((m - mean).abs().max() < 0.01);
        assert!((c - cov).abs().max() < 0.01);
    }

    #[test]
    fn condition_of_identity() {
        assert!((condition_number(&DMatrix::identity(4, 4)) - 1.0).abs() < 1e-12);
        assert!(condition_number(&DMatrix::zeros(2, 2)).is_infinite());
    }
}
