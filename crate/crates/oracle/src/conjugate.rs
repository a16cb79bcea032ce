//! Closed-form posterior of the level coefficients when `Ω` is known and
//! constant, the case the sampler reduces to with volatility pinned.

use gvarsv_core::varx::CountrySample;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::{cholesky, from_nalgebra, inverse, mul_vec, Mat};

/// Regressors `[1, x_{t-1..t-p}, x*_{t..t-q}]` for each estimation period.
pub fn design(sample: &CountrySample) -> Vec<Vec<f64>> {
    let l = sample.spec.lags();
    let start = l.p.max(l.q);
    (start..sample.x.len())
        .map(|t| {
            let mut z = vec![1.0];
            for lag in 1..=l.p {
                z.extend(sample.x[t - lag].iter());
            }
            for lag in 0..=l.q {
                z.extend(sample.xstar[t - lag].iter());
            }
            z
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePosterior {
    /// Equation-major: entry `j * n_z + r` is regressor `r` of equation `j`.
    pub mean: Vec<f64>,
    pub cov: Mat,
}

impl ConjugatePosterior {
    pub fn sd(&self) -> Vec<f64> {
        (0..self.mean.len()).map(|i| self.cov[i][i].sqrt()).collect()
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let l = cholesky(&self.cov).expect("posterior covariance is positive definite");
        let z: Vec<f64> = (0..self.mean.len()).map(|_| rng.sample(StandardNormal)).collect();
        let lz = mul_vec(&l, &z);
        self.mean.iter().zip(lz).map(|(m, d)| m + d).collect()
    }
}

pub fn conjugate_posterior(
    sample: &CountrySample,
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    omega: &DMatrix<f64>,
) -> ConjugatePosterior {
    let z = design(sample);
    let k = sample.spec.k();
    let nz = z[0].len();
    let l = sample.spec.lags();
    let start = l.p.max(l.q);
    let n = k * nz;
    let oinv = inverse(&from_nalgebra(omega)).expect("invertible Ω");
    let p0 = inverse(&from_nalgebra(prior_cov)).expect("invertible prior covariance");
    let m0: Vec<f64> = prior_mean.iter().copied().collect();
    let mut prec = p0.clone();
    let mut rhs = mul_vec(&p0, &m0);
    for (i, zt) in z.iter().enumerate() {
        let y: Vec<f64> = sample.x[start + i].iter().copied().collect();
        let oy = mul_vec(&oinv, &y);
        for a in 0..k {
            for r in 0..nz {
                rhs[a * nz + r] += oy[a] * zt[r];
                for b in 0..k {
                    let w = oinv[a][b] * zt[r];
                    if w != 0.0 {
                        for c in 0..nz {
                            prec[a * nz + r][b * nz + c] += w * zt[c];
                        }
                    }
                }
            }
        }
    }
    let cov = inverse(&prec).expect("posterior precision is invertible");
    let mean = mul_vec(&cov, &rhs);
    debug_assert_eq!(mean.len(), n);
    ConjugatePosterior { mean, cov }
}
