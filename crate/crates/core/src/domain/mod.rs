//! Shared domain types.
//!
//! Every quantity of the country model
//!
//! ```text
//! x_t = a + Σ_{l=1..p} Φ_l x_{t-l} + Σ_{l=0..q} Λ_l x*_{t-l} + Σ_{l=0..s} Ψ_l h_{t-l} + u_t
//! A u_t = ε_t = H_t^{1/2} e_t,   H_t = diag(exp h_t),   Ω_t = Ã H_t Ã'
//! h_t = c + Σ_{l=1..m} Υ_l h_{t-l} + Σ_{l=1..q} Ξ_l x_{t-l} + η_t,   η_t ~ N(0, Q)
//! x*_t = W̄ x_t
//! ```
//!
//! lives in exactly one place:
//!
//! | symbol | home |
//! |---|---|
//! | `x_it`, `k_i` | [`CountrySpec::domestic`], [`Panel`] |
//! | `x*_it`, `k*_i` | [`CountrySpec::foreign`], [`crate::ingest::foreign_variables`] |
//! | `p_i, q_i, s_i, m_i` | [`LagOrders`] |
//! | `a_i, Φ_iℓ, Λ_iℓ, Ψ_iℓ` | [`CountryParameters`] |
//! | `A_i, Ã_i` | [`IdentificationMatrix`] |
//! | `c_i, Υ_iℓ, Ξ_iℓ, Q_i` | [`VolatilityParameters`] |
//! | `h_it, H_it, Ω_it` | [`LatentVolPath`] |
//! | `ε_it, e_it, u_it, η_it` | simulation-time series in [`crate::shock`] |
//! | `W̄_i, w_ij, N` | [`WeightMatrix`], [`crate::stack::LinkMatrices`] |
//! | `x_t, k` | [`crate::stack::GlobalModel`] |

mod calendar;
mod panel;
mod params;
mod spec;
mod weights;

pub use calendar::{Quarter, QuarterRange};
pub use panel::{CountryData, Panel, RawPanel, RawSeries};
pub use params::{CountryParameters, IdentificationMatrix, LatentVolPath, VolatilityParameters};
pub use spec::{CountrySet, CountrySpec, LagOrders, VariableKind};
pub use weights::{WeightMatrix, ROW_SUM_TOL};
