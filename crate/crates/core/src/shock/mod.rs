//! Shock experiments on stacked world draws.
//!
//! Responses are generalized IRFs from paired simulations: a baseline and a
//! shocked path share every random draw, so their difference isolates the
//! shock. The direct response of a country replaces its foreign variables by
//! a counterfactual in which only the origin deviates from baseline, and in
//! which the origin itself runs with its foreign variables frozen.

mod bands;
mod groups;
mod irf;
mod simulate;

pub use bands::{bands, quantile_sorted, Band, MIN_BAND_DRAWS};
pub use groups::{
    aggregate_groups, standard_groups, GroupSpec, CHINA, EMERGING, EM_ASIA_EX_CHINA, EM_LATIN_AMERICA,
    GROUP_WEIGHT_TOL,
};
pub use irf::{
    decompose_direct_total, decompose_draw, girf, girf_draw, shock_size, shock_size_level, BandRow,
    DrawResponse, IrfSeries, IrfSet, Measure, Regime, Scope, ShockSpec,
};
pub use simulate::{simulate_country, simulate_global, Impulse, Noise, Paths};
