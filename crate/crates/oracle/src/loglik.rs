//! Two independent routes to the level-equation log-likelihood given a
//! volatility path.

use gvarsv_core::domain::{CountryParameters, LatentVolPath};
use gvarsv_core::varx::CountrySample;

use crate::dense::{from_nalgebra, inverse, log_det, mul, mul_vec, Mat};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn residual(sample: &CountrySample, params: &CountryParameters, path: &LatentVolPath, i: usize) -> Vec<f64> {
    let l = sample.spec.lags();
    let t = i + l.p.max(l.q);
    let k = sample.spec.k();
    let mut u: Vec<f64> = (0..k).map(|r| sample.x[t][r] - params.intercept[r]).collect();
    let sub = |u: &mut Vec<f64>, m: &nalgebra::DMatrix<f64>, v: &[f64]| {
        for (r, ur) in u.iter_mut().enumerate() {
            *ur -= (0..v.len()).map(|c| m[(r, c)] * v[c]).sum::<f64>();
        }
    };
    for (lag, phi) in params.domestic.iter().enumerate() {
        sub(&mut u, phi, sample.x[t - lag - 1].as_slice());
    }
    for (lag, lam) in params.foreign.iter().enumerate() {
        sub(&mut u, lam, sample.xstar[t - lag].as_slice());
    }
    for (lag, psi) in params.vol_in_mean.iter().enumerate() {
        let h: Vec<f64> = path.h.column(path.presample + i - lag).iter().copied().collect();
        sub(&mut u, psi, &h);
    }
    u
}

/// Builds `Ω_t = Ã diag(e^h) Ã'` and evaluates the multivariate normal
/// density by explicit inverse and determinant.
pub fn loglik_explicit(sample: &CountrySample, params: &CountryParameters, path: &LatentVolPath) -> f64 {
    let at = from_nalgebra(params.ident.a_tilde());
    let k = at.len();
    let at_t: Mat = (0..k).map(|i| (0..k).map(|j| at[j][i]).collect()).collect();
    let mut ll = 0.0;
    for i in 0..path.sample_len() {
        let h = path.at(i);
        let d: Mat = (0..k).map(|r| (0..k).map(|c| if r == c { h[r].exp() } else { 0.0 }).collect()).collect();
        let omega = mul(&mul(&at, &d), &at_t);
        let u = residual(sample, params, path, i);
        let (ld, _) = log_det(&omega);
        let q: f64 = u.iter().zip(mul_vec(&inverse(&omega).expect("Ω invertible"), &u)).map(|(a, b)| a * b).sum();
        ll += -0.5 * (k as f64 * LN_2PI + ld + q);
    }
    ll
}

/// Same quantity through structural shocks: `ln|Ω_t| = Σ h` because `Ã` is
/// unit lower triangular, and the quadratic form is `Σ ε² e^{-h}`.
pub fn loglik_trace(sample: &CountrySample, params: &CountryParameters, path: &LatentVolPath) -> f64 {
    let a = params.ident.structural();
    let k = a.nrows();
    let mut ll = 0.0;
    for i in 0..path.sample_len() {
        let h = path.at(i);
        let u = residual(sample, params, path, i);
        for r in 0..k {
            let eps: f64 = (0..k).map(|c| a[(r, c)] * u[c]).sum();
            ll += -0.5 * (LN_2PI + h[r] + eps * eps * (-h[r]).exp());
        }
    }
    ll
}
