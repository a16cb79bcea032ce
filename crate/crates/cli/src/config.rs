use std::path::{Path, PathBuf};

use gvarsv_core::domain::{CountrySet, CountrySpec, LagOrders, Quarter, VariableKind};
use gvarsv_core::ingest::{FxConvention, TradeBasis};
use gvarsv_core::stack::DrawSelection;
use gvarsv_core::varx::{McmcConfig, PriorOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Output directory; `--out` wins.
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub mcmc: McmcSection,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Long CSV of raw levels: `country,variable,quarter,value`.
    pub levels: PathBuf,
    /// `reporter,partner,exports,imports`.
    pub trade: PathBuf,
    /// `country,weight` (PPP GDP); needed for the euro-area aggregate and
    /// for group responses.
    #[serde(default)]
    pub size_weights: Option<PathBuf>,
    /// Same layout as `levels`, `rate` rows only (e.g. shadow rates).
    #[serde(default)]
    pub rate_override: Option<PathBuf>,
    #[serde(default)]
    pub trade_basis: TradeBasis,
    #[serde(default)]
    pub fx: FxConvention,
    #[serde(default = "default_origin")]
    pub numeraire: String,
    /// Replace the eight original euro members by one `EA` unit.
    #[serde(default)]
    pub euro_area: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_origin")]
    pub origin: String,
    /// Modeled units in stacking order; must include the origin.
    pub countries: Vec<String>,
    #[serde(default)]
    pub equity: bool,
    #[serde(default)]
    pub lags: LagOrders,
    #[serde(default)]
    pub sample_start: Option<Quarter>,
    #[serde(default)]
    pub sample_end: Option<Quarter>,
    /// Last quarter of the training window.
    pub training_end: Quarter,
    #[serde(default = "yes")]
    pub vol_in_mean: bool,
    #[serde(default)]
    pub priors: PriorOptions,
    /// Replaces the standard variable layouts, e.g. for worlds without
    /// exchange rates.
    #[serde(default)]
    pub layout: Option<LayoutConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub origin_domestic: Vec<VariableKind>,
    pub origin_foreign: Vec<VariableKind>,
    pub partner_domestic: Vec<VariableKind>,
    pub partner_foreign: Vec<VariableKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub sign_retry_cap: usize,
    pub keep_paths: bool,
    pub initial_step: f64,
    pub particles: Option<usize>,
}

impl Default for McmcSection {
    fn default() -> Self {
        let d = McmcConfig::default();
        Self {
            draws: d.draws,
            burn_in: d.burn_in,
            thin: d.thin,
            sign_retry_cap: d.sign_retry_cap,
            keep_paths: false,
            initial_step: d.initial_step,
            particles: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartChoice {
    #[default]
    Final,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    ByIndex,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// World draws to stack and simulate.
    pub models: usize,
    pub selection: Selection,
    pub start: StartChoice,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            models: 200,
            selection: Selection::ByIndex,
            start: StartChoice::Final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variable: VariableKind,
    /// In average structural standard deviations of the origin's equation.
    pub level_size: f64,
    /// In standard deviations of the volatility innovation; used by the
    /// `level_vol` regime.
    pub vol_shock: f64,
    pub horizon: usize,
    pub reps: usize,
    pub coverage: f64,
    /// Any of `level`, `level_vol`.
    pub regimes: Vec<String>,
    /// Run the direct/total decomposition in `irf` as well.
    pub direct: bool,
    /// The four emerging-market groups, weighted by `size_weights`.
    pub standard_groups: bool,
    pub groups: Vec<GroupConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variable: VariableKind::ShortRate,
            level_size: 1.0,
            vol_shock: 1.0,
            horizon: 20,
            reps: 200,
            coverage: 0.68,
            regimes: vec!["level".into(), "level_vol".into()],
            direct: true,
            standard_groups: false,
            groups: Vec::new(),
        }
    }
}

fn default_origin() -> String {
    "USA".into()
}

fn yes() -> bool {
    true
}

/// A loaded configuration plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn mcmc(&self) -> McmcConfig {
        let m = &self.config.mcmc;
        McmcConfig {
            draws: m.draws,
            burn_in: m.burn_in,
            thin: m.thin,
            seed: self.seed,
            sign_retry_cap: m.sign_retry_cap,
            keep_paths: m.keep_paths,
            particles: m.particles,
            initial_step: m.initial_step,
            fixed_volatility: None,
        }
    }

    pub fn selection(&self) -> DrawSelection {
        match self.config.solve.selection {
            Selection::ByIndex => DrawSelection::ByIndex,
            Selection::Random => DrawSelection::Random {
                seed: gvarsv_core::rng::derive_seed(self.seed, &[1]),
            },
        }
    }

    pub fn sim_seed(&self) -> u64 {
        gvarsv_core::rng::derive_seed(self.seed, &[2])
    }

    /// Country layouts in stacking order: the origin gets the rate-first
    /// layout (and equity when enabled), everyone else the partner layout.
    pub fn country_set(&self) -> CliResult<CountrySet> {
        let m = &self.config.model;
        if !m.countries.contains(&m.origin) {
            return Err(CliError::User(format!("origin {} is not in model.countries", m.origin)));
        }
        let lags = LagOrders::new(m.lags.p, m.lags.q, m.lags.s, m.lags.m)?;
        let specs = m
            .countries
            .iter()
            .map(|c| match (&m.layout, *c == m.origin) {
                (Some(l), true) => CountrySpec::new(c.clone(), l.origin_domestic.clone(), l.origin_foreign.clone(), lags, true),
                (Some(l), false) => {
                    CountrySpec::new(c.clone(), l.partner_domestic.clone(), l.partner_foreign.clone(), lags, false)
                }
                (None, true) => CountrySpec::origin(c.clone(), lags, m.equity),
                (None, false) => CountrySpec::partner(c.clone(), lags, false),
            })
            .collect::<gvarsv_core::Result<Vec<_>>>()?;
        Ok(CountrySet::new(specs)?)
    }
}

pub fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let seed = seed
        .or(config.seed)
        .ok_or_else(|| CliError::User("a seed is required: set `seed` in the config or pass --seed".into()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match out.or_else(|| config.out.clone()) {
        Some(o) if o.is_absolute() => o,
        Some(o) => base.join(o),
        None => return Err(CliError::User("an output directory is required: set `out` or pass --out".into())),
    };
    let e = &config.experiment;
    for r in &e.regimes {
        if r != "level" && r != "level_vol" {
            return Err(CliError::User(format!("unknown regime {r:?}; expected level or level_vol")));
        }
    }
    if !(0.0..1.0).contains(&e.coverage) {
        return Err(CliError::User("experiment.coverage must lie in [0, 1)".into()));
    }
    if e.regimes.iter().any(|r| r == "level_vol") && e.vol_shock == 0.0 {
        return Err(CliError::User("the level_vol regime needs a nonzero experiment.vol_shock".into()));
    }
    if e.regimes.is_empty() {
        return Err(CliError::User("experiment.regimes is empty".into()));
    }
    Ok(Loaded {
        config,
        base,
        seed,
        out,
    })
}
