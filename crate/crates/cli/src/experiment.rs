use gvarsv_core::shock::{
    aggregate_groups, decompose_direct_total, girf, shock_size, standard_groups, BandRow, GroupSpec, IrfSet, Scope,
    ShockSpec,
};
use gvarsv_core::stack::{build_links, check_stability, stability_csv, stack_draws, GlobalModel, LinkMatrices};
use gvarsv_core::varx::PosteriorDraws;
use serde::{Deserialize, Serialize};

use crate::artifacts::Stage;
use crate::config::{Loaded, StartChoice};
use crate::error::{CliError, CliResult};
use crate::ingest::{self, Ingested};
use crate::estimate;

pub struct World {
    pub data: Ingested,
    pub draws: Vec<PosteriorDraws>,
    pub links: LinkMatrices,
    pub models: Vec<GlobalModel>,
}

pub fn stack(cfg: &Loaded) -> CliResult<World> {
    let data = ingest::load(cfg)?;
    let draws = estimate::load(cfg, &data.set)?;
    let links = build_links(&data.weights, &data.set)?;
    let n = cfg.config.solve.models;
    if n == 0 {
        return Err(CliError::User("solve.models must be positive".into()));
    }
    let mut models = stack_draws(&data.set, &links, &draws, n, cfg.selection())?;
    if cfg.config.solve.start == StartChoice::Mean {
        models = models
            .into_iter()
            .map(GlobalModel::with_mean_start)
            .collect::<gvarsv_core::Result<_>>()?;
    }
    Ok(World {
        data,
        draws,
        links,
        models,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SolveSummary {
    models: usize,
    flagged: usize,
    max_spectral_radius: f64,
    max_condition: f64,
    start: StartChoice,
}

pub fn solve(cfg: &Loaded) -> CliResult<()> {
    let w = stack(cfg)?;
    let mut stage = Stage::create(cfg, "solve")?;
    stage.upstream(cfg, ingest::STAGE)?;
    stage.upstream(cfg, estimate::STAGE)?;
    let reports: Vec<_> = w.models.iter().map(check_stability).collect();
    stage.write("stability.csv", stability_csv(&reports).as_bytes())?;
    let summary = SolveSummary {
        models: reports.len(),
        flagged: reports.iter().filter(|r| r.flagged).count(),
        max_spectral_radius: reports.iter().map(|r| r.spectral_radius).fold(0.0, f64::max),
        max_condition: w.models.iter().map(|m| m.condition).fold(0.0, f64::max),
        start: cfg.config.solve.start,
    };
    stage.write_json("solve.json", &summary)?;
    stage.finish()?;
    Ok(())
}

fn groups(cfg: &Loaded, data: &Ingested) -> CliResult<Vec<GroupSpec>> {
    let e = &cfg.config.experiment;
    if !e.standard_groups && e.groups.is_empty() {
        return Ok(Vec::new());
    }
    let size = data
        .size
        .as_ref()
        .ok_or_else(|| CliError::User("group responses need data.size_weights".into()))?;
    let mut out = if e.standard_groups { standard_groups(size)? } else { Vec::new() };
    for g in &e.groups {
        let members: Vec<&str> = g.members.iter().map(String::as_str).collect();
        out.push(GroupSpec::weighted(&g.name, &members, size)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandsFile {
    pub origin: String,
    pub unit_sd: f64,
    pub coverage: f64,
    pub reps: usize,
    pub models: usize,
    pub groups: Vec<GroupSpec>,
    pub rows: Vec<BandRow>,
}

/// Runs every configured regime and writes one CSV per regime and scope.
/// `scopes` lists the scopes to keep; anything beyond total needs the
/// decomposition.
fn responses(cfg: &Loaded, name: &str, scopes: &[Scope]) -> CliResult<()> {
    let w = stack(cfg)?;
    let e = &cfg.config.experiment;
    let set = &w.data.set;
    let oi = set.origin_index();
    let origin = set.specs()[oi].id().to_string();
    let pos = set.specs()[oi]
        .position(e.variable)
        .ok_or_else(|| CliError::User(format!("{origin} has no {}", e.variable)))?;
    let unit_sd = shock_size(&w.draws[oi], pos)?;
    let groups = groups(cfg, &w.data)?;
    let mut stage = Stage::create(cfg, name)?;
    stage.upstream(cfg, ingest::STAGE)?;
    stage.upstream(cfg, estimate::STAGE)?;

    let mut all = IrfSet {
        horizon: e.horizon,
        series: Vec::new(),
    };
    for regime in &e.regimes {
        let spec = ShockSpec {
            origin: origin.clone(),
            variable: e.variable,
            level_size: e.level_size,
            vol_shock: (regime == "level_vol").then_some(e.vol_shock),
            horizon: e.horizon,
        };
        spec.validate(set)?;
        // Regimes share random numbers so their differences are not noise.
        let seed = cfg.sim_seed();
        let mut irfs = if scopes == [Scope::Total] {
            girf(&w.models, &spec, unit_sd, e.reps, seed)?
        } else {
            decompose_direct_total(&w.models, &w.links, &spec, unit_sd, e.reps, seed)?
        };
        irfs.series.retain(|s| scopes.contains(&s.regime.scope));
        if !groups.is_empty() {
            let g = aggregate_groups(&irfs, &groups)?;
            irfs = irfs.merge(g)?;
        }
        for scope in scopes {
            let part = IrfSet {
                horizon: e.horizon,
                series: irfs.series.iter().filter(|s| s.regime.scope == *scope).cloned().collect(),
            };
            let Some(first) = part.series.first() else { continue };
            let file = format!("irf_{}.csv", first.regime.name());
            stage.write(&file, part.to_csv(e.coverage)?.as_bytes())?;
        }
        all = all.merge(irfs)?;
    }
    let bands = BandsFile {
        origin,
        unit_sd,
        coverage: e.coverage,
        reps: e.reps,
        models: w.models.len(),
        groups,
        rows: all.band_rows(e.coverage)?,
    };
    stage.write_json("irf_bands.json", &bands)?;
    stage.finish()?;
    Ok(())
}

pub fn irf(cfg: &Loaded) -> CliResult<()> {
    if cfg.config.experiment.direct {
        responses(cfg, "irf", &[Scope::Total, Scope::Direct])
    } else {
        responses(cfg, "irf", &[Scope::Total])
    }
}

pub fn decompose(cfg: &Loaded) -> CliResult<()> {
    responses(cfg, "decompose", &[Scope::Total, Scope::Direct, Scope::Indirect])
}
