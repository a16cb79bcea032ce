use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::{CountrySample, RegressorLayout, VolLayout};
use crate::error::{Error, Result};
use crate::linalg::{ldl, spd_inverse};

/// Prior tightness. The defaults are deliberately loose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorOptions {
    /// Multiplies the training least-squares covariance of the level
    /// coefficients.
    pub beta_scale: f64,
    /// Prior variance of each volatility-in-mean coefficient (mean zero).
    pub psi_var: f64,
    /// Prior variance of each free entry of `A`.
    pub a_var: f64,
    /// Prior variance of presample log volatilities.
    pub h0_var: f64,
    /// Prior mean of the own first-lag volatility persistence.
    pub vol_persistence: f64,
    pub upsilon_var: f64,
    pub xi_var: f64,
    pub c_var: f64,
    /// Inverse-gamma shape and mean for each diagonal element of `Q`.
    pub q_shape: f64,
    pub q_mean: f64,
    /// Minimum usable training quarters after lags.
    pub min_training: usize,
}

impl Default for PriorOptions {
    fn default() -> Self {
        Self {
            beta_scale: 4.0,
            psi_var: 1.0,
            a_var: 10.0,
            h0_var: 10.0,
            vol_persistence: 0.8,
            upsilon_var: 0.25,
            xi_var: 0.04,
            c_var: 1.0,
            q_shape: 5.0,
            q_mean: 0.04,
            min_training: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub layout: RegressorLayout,
    pub vol_layout: VolLayout,
    /// Equation-major level coefficients, see [`RegressorLayout`].
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    /// Free entries `A[j, 0..j]` for rows `j = 1..k`.
    pub a_mean: Vec<DVector<f64>>,
    pub a_cov: Vec<DMatrix<f64>>,
    pub h0_mean: DVector<f64>,
    pub h0_var: f64,
    /// Per equation `j`: coefficients on `[1, h lags, x lags]`.
    pub vol_mean: Vec<DVector<f64>>,
    pub vol_cov: Vec<DMatrix<f64>>,
    pub q_shape: f64,
    pub q_scale: DVector<f64>,
    /// Training residual covariance.
    pub sigma_hat: DMatrix<f64>,
}

/// Least-squares fit of the volatility-free regressors.
pub struct OlsFit {
    pub coef: DMatrix<f64>,
    pub resid: DMatrix<f64>,
    pub xtx: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

pub fn ols(sample: &CountrySample, layout: &RegressorLayout) -> Result<OlsFit> {
    let z = layout.x_design(sample);
    let n = z.nrows();
    let y = DMatrix::from_fn(n, layout.k, |i, j| sample.x[sample.t_of(i)][j]);
    let xtx = z.transpose() * &z;
    let inv = spd_inverse(&xtx).ok_or_else(|| {
        Error::ZeroVariance(format!("{} (collinear regressors)", sample.spec.id()))
    })?;
    let coef = &inv * z.transpose() * &y;
    let resid = &y - &z * &coef;
    let dof = (n - layout.n_x()).max(1) as f64;
    let sigma = resid.transpose() * &resid / dof;
    Ok(OlsFit {
        coef,
        resid,
        xtx,
        sigma,
    })
}

/// Centers the priors on a least-squares fit of the training sample.
pub fn build_priors(training: &CountrySample, vol_in_mean: bool, opts: &PriorOptions) -> Result<Priors> {
    let spec = &training.spec;
    let layout = RegressorLayout::new(spec, vol_in_mean);
    let vol_layout = VolLayout::new(spec);
    let need = opts.min_training.max(layout.n_x() + 1);
    if training.n_obs() < need {
        return Err(Error::TrainingTooShort {
            got: training.n_obs(),
            need,
        });
    }
    let k = layout.k;
    for j in 0..k {
        let first = training.x[0][j];
        let spread = training.x.iter().map(|v| (v[j] - first).abs()).fold(0.0, f64::max);
        if spread == 0.0 {
            return Err(Error::ZeroVariance(format!("{}/{}", spec.id(), spec.domestic()[j])));
        }
    }
    let fit = ols(training, &layout)?;
    for j in 0..k {
        let scale = training.x.iter().map(|v| v[j] * v[j]).sum::<f64>() / training.len() as f64;
        if !(fit.sigma[(j, j)] > 1e-12 * scale.max(1e-300)) {
            return Err(Error::ZeroVariance(format!("{}/{}", spec.id(), spec.domestic()[j])));
        }
    }
    let (l, d) = ldl(&fit.sigma)
        .ok_or_else(|| Error::ZeroVariance(format!("{} (singular residual covariance)", spec.id())))?;

    let nx = layout.n_x();
    let nz = layout.n_z();
    let xtx_inv = spd_inverse(&fit.xtx).expect("checked in ols");
    let mut beta_mean = DVector::zeros(layout.n_beta());
    let mut beta_cov = DMatrix::zeros(layout.n_beta(), layout.n_beta());
    for a in 0..k {
        for r in 0..nx {
            beta_mean[a * nz + r] = fit.coef[(r, a)];
        }
        for b in 0..k {
            let s = opts.beta_scale * fit.sigma[(a, b)];
            for r in 0..nx {
                for c in 0..nx {
                    beta_cov[(a * nz + r, b * nz + c)] = s * xtx_inv[(r, c)];
                }
            }
        }
    }
    for i in layout.psi_indices() {
        beta_cov[(i, i)] = opts.psi_var;
    }

    // Σ = L D L' = Ã D Ã', so A = L⁻¹.
    let a_hat = l.clone().try_inverse().expect("unit lower triangular");
    let a_mean = (1..k)
        .map(|j| DVector::from_fn(j, |c, _| a_hat[(j, c)]))
        .collect();
    let a_cov = (1..k).map(|j| DMatrix::identity(j, j) * opts.a_var).collect();

    let h0_mean = d.map(f64::ln);
    let nw = vol_layout.n_w();
    let mut vol_mean = Vec::with_capacity(k);
    let mut vol_cov = Vec::with_capacity(k);
    for j in 0..k {
        let mut m = DVector::zeros(nw);
        m[0] = (1.0 - opts.vol_persistence) * h0_mean[j];
        m[1 + j] = opts.vol_persistence;
        let mut c = DMatrix::zeros(nw, nw);
        c[(0, 0)] = opts.c_var;
        for i in 1..1 + vol_layout.m * k {
            c[(i, i)] = opts.upsilon_var;
        }
        for i in 1 + vol_layout.m * k..nw {
            c[(i, i)] = opts.xi_var;
        }
        vol_mean.push(m);
        vol_cov.push(c);
    }
    if opts.q_shape <= 1.0 || opts.q_mean <= 0.0 {
        return Err(Error::Config("q_shape must exceed 1 and q_mean must be positive".into()));
    }
    let q_scale = DVector::from_element(k, opts.q_mean * (opts.q_shape - 1.0));

    Ok(Priors {
        layout,
        vol_layout,
        beta_mean,
        beta_cov,
        a_mean,
        a_cov,
        h0_mean,
        h0_var: opts.h0_var,
        vol_mean,
        vol_cov,
        q_shape: opts.q_shape,
        q_scale,
        sigma_hat: fit.sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CountrySpec, LagOrders};
    use crate::rng::sim_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn spec() -> CountrySpec {
        CountrySpec::origin("USA", LagOrders::new(1, 0, 0, 1).unwrap(), false).unwrap()
    }

    fn var1_sample(n: usize, seed: u64) -> (CountrySample, DMatrix<f64>) {
        let phi = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, 0.3, -0.1, 0.2, 0.0, 0.4]);
        let mut rng = sim_rng(seed, 0, 0);
        let mut x = vec![DVector::zeros(3)];
        let mut xs = vec![DVector::zeros(3)];
        for t in 1..n {
            let e = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            let fx = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            x.push(&phi * &x[t - 1] + e);
            xs.push(fx);
        }
        (CountrySample::new(spec(), x, xs).unwrap(), phi)
    }

    #[test]
    fn prior_mean_recovers_var1() {
        let (s, phi) = var1_sample(20_000, 3);
        let p = build_priors(&s, false, &PriorOptions::default()).unwrap();
        let nz = p.layout.n_z();
        for a in 0..3 {
            for b in 0..3 {
                let est = p.beta_mean[a * nz + 1 + b];
                assert!((est - phi[(a, b)]).abs() < 0.03, "({a},{b}) {est}");
            }
        }
        for j in 0..3 {
            assert!(p.h0_mean[j].abs() < 0.05);
        }
        assert!(p.beta_cov.clone().cholesky().is_some());
    }

    #[test]
    fn constant_data_is_rejected() {
        let x = vec![DVector::from_element(3, 1.0); 40];
        let xs: Vec<_> = (0..40).map(|t| DVector::from_element(3, t as f64)).collect();
        let s = CountrySample::new(spec(), x, xs).unwrap();
        assert!(matches!(
            build_priors(&s, false, &PriorOptions::default()),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn short_training_reports_minimum() {
        let (s, _) = var1_sample(15, 1);
        match build_priors(&s, false, &PriorOptions::default()) {
            Err(Error::TrainingTooShort { got, need }) => {
                assert_eq!(got, 14);
                assert_eq!(need, 20);
            }
            other => panic!("{other:?}"),
        }
    }
}
