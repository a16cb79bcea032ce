//! Hands a synthetic world to the library under test.

use gvarsv_core::stack::{build_links, stack_global, CountryBlock, GlobalModel, StartState};
use gvarsv_core::varx::CountrySample;
use gvarsv_core::Result;

use crate::simulate::{Generated, WorldStart};
use crate::world::TrueWorld;

pub fn blocks(world: &TrueWorld) -> Vec<CountryBlock> {
    world
        .countries
        .iter()
        .zip(world.specs())
        .map(|(c, s)| CountryBlock {
            spec: s.clone(),
            params: c.params.clone(),
            vol: c.vol.clone(),
        })
        .collect()
}

/// The true world as a stacked model starting from `start`.
pub fn global_model(world: &TrueWorld, start: &WorldStart) -> Result<GlobalModel> {
    let links = build_links(&world.weights, &world.set)?;
    let (x, h) = start.stacked();
    stack_global(&world.set, &links, blocks(world), StartState { x, h })
}

/// Per-country training and estimation samples. The first `training`
/// periods train the prior; estimation uses the rest, with its lags taken
/// from the end of the training window.
pub fn samples(world: &TrueWorld, data: &Generated, training: usize) -> Result<Vec<(CountrySample, CountrySample)>> {
    world
        .specs()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let lx = s.lags().max_x_lag();
            let train = CountrySample::new(s.clone(), data.x[i][..training].to_vec(), data.xstar[i][..training].to_vec())?;
            let est = CountrySample::new(
                s.clone(),
                data.x[i][training - lx..].to_vec(),
                data.xstar[i][training - lx..].to_vec(),
            )?;
            Ok((train, est))
        })
        .collect()
}
