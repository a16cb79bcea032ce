//! Writes a synthetic data set with known parameters in the raw input
//! formats, plus a configuration that runs the whole pipeline on it.

use std::fs;
use std::path::Path;

use gvarsv_core::domain::Quarter;
use gvarsv_oracle::fixtures::{levels_csv, trade_csv};
use gvarsv_oracle::world::canonical_world;
use gvarsv_oracle::generate;

use crate::error::{CliError, CliResult};

pub const FIRST: &str = "1900Q1";
/// Transformed data start four quarters after the first level; 60 quarters
/// of training.
pub const TRAINING_END: &str = "1915Q4";
pub const SIZE: &str = "country,weight\nUSA,0.5\nAAA,0.3\nBBB,0.2\n";

pub fn config_text(seed: u64) -> String {
    format!(
        r#"seed = {seed}
out = "run"

[data]
levels = "levels.csv"
trade = "trade.csv"
size_weights = "size.csv"

[model]
origin = "USA"
countries = ["USA", "AAA", "BBB"]
training_end = "{TRAINING_END}"
lags = {{ p = 1, q = 1, s = 1, m = 1 }}

[model.layout]
origin_domestic = ["short_rate", "output_growth", "inflation"]
origin_foreign = ["output_growth", "inflation"]
partner_domestic = ["short_rate", "output_growth", "inflation"]
partner_foreign = ["short_rate", "output_growth", "inflation"]

[mcmc]
draws = 600
burn_in = 200
thin = 10

[solve]
models = 40

[experiment]
horizon = 12
reps = 20
regimes = ["level", "level_vol"]

[[experiment.groups]]
name = "AAA+BBB"
members = ["AAA", "BBB"]
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| CliError::User(format!("cannot write {}: {e}", p.display())))
}

pub fn run(out: &Path, periods: usize, world_seed: Option<u64>, run_seed: u64) -> CliResult<()> {
    if periods < 100 {
        return Err(CliError::User("--periods must be at least 100 (60 go to training)".into()));
    }
    let mut world = canonical_world();
    world.t = periods;
    if let Some(s) = world_seed {
        world.seed = s;
    }
    let data = generate(&world)?;
    fs::create_dir_all(out).map_err(|e| CliError::User(format!("cannot create {}: {e}", out.display())))?;
    let first: Quarter = FIRST.parse()?;
    write(out, "levels.csv", &levels_csv(&world, &data, first))?;
    write(out, "trade.csv", &trade_csv(&world))?;
    write(out, "size.csv", SIZE)?;
    let truth = serde_json::to_string_pretty(&world).map_err(|e| CliError::Internal(e.to_string()))?;
    write(out, "truth.json", &(truth + "\n"))?;
    write(out, "config.toml", &config_text(run_seed))?;
    Ok(())
}
