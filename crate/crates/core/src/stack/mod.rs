//! Assembly of country draws into one world model.
//!
//! Country `i` enters through `x_it = E_i x_t` and `x*_it = W̃_i x_t`.
//! Stacking the level equations gives
//!
//! ```text
//! G0 x_t = a + Σ_l F_l x_{t-l} + Σ_l P_l h_{t-l} + Ã ε_t
//! G0  = stack_i(E_i - Λ_i0 W̃_i)
//! F_l = stack_i(Φ_il E_i + Λ_il W̃_i)
//! ```
//!
//! while log volatility stays country-local.

mod links;
mod model;
mod stability;

pub use links::{build_links, LinkMatrices};
pub use model::{
    draw_indices, final_state, stack_draws, stack_global, CountryBlock, DrawSelection, GlobalModel,
    StartState, COND_THRESHOLD,
};
pub use stability::{check_stability, companion, spectrum, stability_csv, StabilityReport};
