//! Bayesian estimation of one country's VARX model with stochastic
//! volatility.
//!
//! The chain is Metropolis-within-Gibbs with four blocks per sweep:
//! level coefficients by generalized least squares given `h` and `Ã`; the
//! free entries of `A` by weighted regressions, redrawn until the sign
//! restrictions hold; each `h_{t,j}` by a random-walk Metropolis step
//! (step size tuned during burn-in only); and `(c, Υ, Ξ, Q)` equation by
//! equation. Presample log volatilities carry a wide normal prior.

mod data;
mod loglik;
mod priors;
mod sampler;

pub use data::{CountrySample, RegressorLayout, VolLayout};
pub use loglik::{loglik_path, residuals, vol_loglik_path};
pub use priors::{build_priors, ols, OlsFit, PriorOptions, Priors};
pub use sampler::{
    draw_identification, sample_country, Diagnostics, FixedVolatility, McmcConfig, PosteriorDraw,
    PosteriorDraws, FIXED_Q,
};

use rayon::prelude::*;

use crate::domain::{CountrySpec, Panel, QuarterRange, WeightMatrix};
use crate::error::{Error, Result};

/// Training and estimation windows for one country. Training runs from the
/// first usable quarter through the panel's split; estimation starts right
/// after the split, with the preceding `max(p, q)` quarters as initial
/// conditions.
pub fn country_windows(panel: &Panel, w: &WeightMatrix, spec: &CountrySpec) -> Result<(QuarterRange, QuarterRange)> {
    let split = panel
        .training_split()
        .ok_or_else(|| Error::Config("panel has no training split".into()))?;
    let usable = crate::ingest::foreign_variables(panel, w, spec)?.range;
    let lx = spec.lags().max_x_lag() as i64;
    let training = QuarterRange::new(usable.first, split).map_err(|_| {
        Error::TrainingTooShort { got: 0, need: 1 }
    })?;
    let est_first = split.offset(1 - lx).max(usable.first);
    let estimation = QuarterRange::new(est_first, usable.last)
        .map_err(|_| Error::Config(format!("{}: nothing left to estimate after {split}", spec.id())))?;
    Ok((training, estimation))
}

pub fn build_priors_from_panel(
    panel: &Panel,
    w: &WeightMatrix,
    spec: &CountrySpec,
    vol_in_mean: bool,
    opts: &PriorOptions,
) -> Result<Priors> {
    let (training, _) = country_windows(panel, w, spec)?;
    let need = opts.min_training + spec.lags().max_x_lag();
    if training.len() < need {
        return Err(Error::TrainingTooShort {
            got: training.len().saturating_sub(spec.lags().max_x_lag()),
            need: opts.min_training,
        });
    }
    let sample = CountrySample::from_panel(panel, w, spec, training)?;
    build_priors(&sample, vol_in_mean, opts)
}

/// Estimates one country from the panel's estimation window.
pub fn sample_posterior(
    panel: &Panel,
    w: &WeightMatrix,
    spec: &CountrySpec,
    priors: &Priors,
    cfg: &McmcConfig,
) -> Result<PosteriorDraws> {
    let (_, est) = country_windows(panel, w, spec)?;
    let sample = CountrySample::from_panel(panel, w, spec, est)?;
    sample_country(&sample, priors, cfg)
}

/// Runs independent chains in parallel; output order follows `jobs`.
pub fn sample_all(jobs: &[(CountrySample, Priors)], cfg: &McmcConfig) -> Result<Vec<PosteriorDraws>> {
    jobs.par_iter()
        .map(|(s, p)| sample_country(s, p, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
