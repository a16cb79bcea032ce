use nalgebra::DVector;

use super::data::{CountrySample, RegressorLayout};
use crate::domain::{CountryParameters, LatentVolPath, VolatilityParameters};
use crate::error::{Error, Result};

/// Reduced-form residuals `u_t` of the level equation along a path.
pub fn residuals(sample: &CountrySample, params: &CountryParameters, path: &LatentVolPath) -> Result<Vec<DVector<f64>>> {
    let spec = &sample.spec;
    params.validate(spec)?;
    let n = sample.n_obs();
    let s = spec.lags().s;
    if path.k() != spec.k() || path.sample_len() != n || path.presample < s {
        return Err(Error::invariant(format!(
            "{}: volatility path ({} presample, {} in sample) does not fit {n} observations with s = {s}",
            spec.id(),
            path.presample,
            path.sample_len()
        )));
    }
    let lay = RegressorLayout::new(spec, false);
    let mut row = vec![0.0; lay.n_x()];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = sample.t_of(i);
        lay.fill_x(sample, t, &mut row);
        let mut u = sample.x[t].clone() - &params.intercept;
        let mut c = 1;
        for phi in &params.domestic {
            let xl = DVector::from_column_slice(&row[c..c + lay.k]);
            u -= phi * xl;
            c += lay.k;
        }
        for lam in &params.foreign {
            let xl = DVector::from_column_slice(&row[c..c + lay.k_star]);
            u -= lam * xl;
            c += lay.k_star;
        }
        for (l, psi) in params.vol_in_mean.iter().enumerate() {
            u -= psi * path.h.column(path.presample + i - l);
        }
        out.push(u);
    }
    Ok(out)
}

/// Gaussian log-likelihood of the level equation given the volatility path,
/// with `Ω_t = Ã H_t Ã'` assembled explicitly.
pub fn loglik_path(sample: &CountrySample, params: &CountryParameters, path: &LatentVolPath) -> Result<f64> {
    let u = residuals(sample, params, path)?;
    let k = sample.spec.k() as f64;
    let mut ll = 0.0;
    for (t, ut) in u.iter().enumerate() {
        let omega = path.omega(&params.ident, t);
        let chol = omega.cholesky().ok_or(Error::NotPositiveDefinite(t))?;
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !logdet.is_finite() {
            return Err(Error::NotPositiveDefinite(t));
        }
        let quad = ut.dot(&chol.solve(ut));
        ll += -0.5 * (k * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
    }
    Ok(ll)
}

/// Log density of the in-sample volatility transitions given the path.
pub fn vol_loglik_path(sample: &CountrySample, vol: &VolatilityParameters, path: &LatentVolPath) -> Result<f64> {
    let spec = &sample.spec;
    vol.validate(spec)?;
    let m = spec.lags().m;
    if path.presample < m || path.sample_len() != sample.n_obs() {
        return Err(Error::invariant(format!("{}: volatility path does not fit the sample", spec.id())));
    }
    let mut ll = 0.0;
    for i in 0..sample.n_obs() {
        let tau = path.presample + i;
        let t = sample.t_of(i);
        let mut e = path.h.column(tau) - &vol.intercept;
        for (l, ups) in vol.vol_lags.iter().enumerate() {
            e -= ups * path.h.column(tau - l - 1);
        }
        for (l, xi) in vol.macro_feedback.iter().enumerate() {
            e -= xi * &sample.x[t - l - 1];
        }
        for j in 0..e.len() {
            let q = vol.innovation_var[j];
            ll += -0.5 * ((2.0 * std::f64::consts::PI * q).ln() + e[j] * e[j] / q);
        }
    }
    Ok(ll)
}
