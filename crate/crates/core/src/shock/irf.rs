use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bands::{bands, Band};
use super::simulate::{simulate_country, simulate_global, Impulse, Noise, Paths};
use crate::domain::{CountrySet, VariableKind};
use crate::error::{Error, Result};
use crate::rng::sim_rng;
use crate::stack::{GlobalModel, LinkMatrices};
use crate::varx::PosteriorDraws;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockSpec {
    pub origin: String,
    #[serde(default = "default_target")]
    pub variable: VariableKind,
    /// In units of the average structural standard deviation.
    pub level_size: f64,
    /// In standard deviations of the volatility innovation.
    #[serde(default)]
    pub vol_shock: Option<f64>,
    pub horizon: usize,
}

fn default_target() -> VariableKind {
    VariableKind::ShortRate
}

impl ShockSpec {
    pub fn validate(&self, set: &CountrySet) -> Result<()> {
        if !self.level_size.is_finite() || self.vol_shock.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Config("shock sizes must be finite".into()));
        }
        if self.horizon < 1 {
            return Err(Error::Config("shock horizon must be at least 1".into()));
        }
        let i = set
            .index_of(&self.origin)
            .ok_or_else(|| Error::Config(format!("shock origin {} is not modeled", self.origin)))?;
        if set.specs()[i].position(self.variable).is_none() {
            return Err(Error::Config(format!("{} has no {}", self.origin, self.variable)));
        }
        Ok(())
    }

    pub fn regime_vol(&self) -> bool {
        self.vol_shock.is_some_and(|v| v != 0.0)
    }
}

/// Average structural standard deviation `exp(h/2)` of the rate equation,
/// over the sample and then over draws.
pub fn shock_size_level(draws: &PosteriorDraws) -> Result<f64> {
    let pos = draws
        .spec
        .position(VariableKind::ShortRate)
        .ok_or_else(|| Error::Config(format!("{} has no short rate", draws.spec.id())))?;
    shock_size(draws, pos)
}

pub fn shock_size(draws: &PosteriorDraws, pos: usize) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::TooFewDraws { got: 0, need: 1 });
    }
    Ok(draws.draws.iter().map(|d| d.mean_sd[pos]).sum::<f64>() / draws.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Total,
    Direct,
    Indirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Regime {
    pub vol_shock: bool,
    pub scope: Scope,
}

impl Regime {
    pub fn name(&self) -> String {
        let s = match self.scope {
            Scope::Total => "total",
            Scope::Direct => "direct",
            Scope::Indirect => "indirect",
        };
        format!("{}_{s}", if self.vol_shock { "level_vol" } else { "level" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Level,
    LogVol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfSeries {
    pub country: String,
    pub variable: VariableKind,
    pub measure: Measure,
    pub regime: Regime,
    /// `per_draw[d][h]`, averaged over replications.
    pub per_draw: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfSet {
    pub horizon: usize,
    pub series: Vec<IrfSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub country: String,
    pub variable: VariableKind,
    pub measure: Measure,
    pub regime: String,
    pub horizon: usize,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

impl IrfSet {
    pub fn get(&self, country: &str, variable: VariableKind, measure: Measure, regime: Regime) -> Option<&IrfSeries> {
        self.series
            .iter()
            .find(|s| s.country == country && s.variable == variable && s.measure == measure && s.regime == regime)
    }

    pub fn merge(mut self, other: IrfSet) -> Result<IrfSet> {
        if self.horizon != other.horizon {
            return Err(Error::invariant("cannot merge IRF sets with different horizons"));
        }
        self.series.extend(other.series);
        Ok(self)
    }

    pub fn band_rows(&self, coverage: f64) -> Result<Vec<BandRow>> {
        let mut rows = Vec::new();
        for s in &self.series {
            let Band { lo, median, hi } = bands(&s.per_draw, coverage)?;
            for h in 0..median.len() {
                rows.push(BandRow {
                    country: s.country.clone(),
                    variable: s.variable,
                    measure: s.measure,
                    regime: s.regime.name(),
                    horizon: h,
                    median: median[h],
                    lo: lo[h],
                    hi: hi[h],
                });
            }
        }
        Ok(rows)
    }

    /// Tidy CSV of medians and bands.
    pub fn to_csv(&self, coverage: f64) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["country", "variable", "measure", "regime", "horizon", "median", "lo", "hi"])?;
        let fmt = |v: f64| format!("{v:.12e}");
        for r in self.band_rows(coverage)? {
            w.write_record([
                r.country.clone(),
                r.variable.to_string(),
                match r.measure {
                    Measure::Level => "level".into(),
                    Measure::LogVol => "log_vol".into(),
                },
                r.regime.clone(),
                r.horizon.to_string(),
                fmt(r.median),
                fmt(r.lo),
                fmt(r.hi),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invariant(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Per-draw responses in stacked layout, `k × (H + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawResponse {
    pub x: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl DrawResponse {
    fn zeros(k: usize, len: usize) -> Self {
        Self {
            x: DMatrix::zeros(k, len),
            h: DMatrix::zeros(k, len),
        }
    }

    fn add_diff(&mut self, a: &Paths, b: &Paths, rows: usize) {
        for t in 0..self.x.ncols() {
            for r in 0..rows {
                self.x[(r, t)] += a.x[t][r] - b.x[t][r];
                self.h[(r, t)] += a.h[t][r] - b.h[t][r];
            }
        }
    }

    fn scale(&mut self, s: f64) {
        self.x *= s;
        self.h *= s;
    }
}

fn impulse(model: &GlobalModel, spec: &ShockSpec, unit_sd: f64) -> Result<Impulse> {
    spec.validate(&model.set)?;
    let o = model.set.index_of(&spec.origin).expect("validated");
    let pos = model.set.specs()[o].position(spec.variable).expect("validated");
    Ok(Impulse {
        index: model.index(o, pos),
        eps: spec.level_size * unit_sd,
        eta_sd: spec.vol_shock.unwrap_or(0.0),
    })
}

fn sizes(model: &GlobalModel) -> Vec<usize> {
    model.set.specs().iter().map(|s| s.k()).collect()
}

/// Replication-averaged paired-path response for one world draw.
pub fn girf_draw(model: &GlobalModel, spec: &ShockSpec, unit_sd: f64, reps: usize, seed: u64, draw: usize) -> Result<DrawResponse> {
    let imp = impulse(model, spec, unit_sd)?;
    let periods = spec.horizon + 1;
    let sz = sizes(model);
    let mut acc = DrawResponse::zeros(model.k, periods);
    for rep in 0..reps {
        let mut rng = sim_rng(seed, draw, rep);
        let noise = Noise::draw(&sz, periods, &mut rng);
        let base = simulate_global(model, &noise, None, (draw, rep))?;
        let shocked = simulate_global(model, &noise, Some(&imp), (draw, rep))?;
        acc.add_diff(&shocked, &base, model.k);
    }
    acc.scale(1.0 / reps as f64);
    Ok(acc)
}

/// Total and direct responses for one world draw, both stacked.
pub fn decompose_draw(
    model: &GlobalModel,
    links: &LinkMatrices,
    spec: &ShockSpec,
    unit_sd: f64,
    reps: usize,
    seed: u64,
    draw: usize,
) -> Result<(DrawResponse, DrawResponse)> {
    let imp = impulse(model, spec, unit_sd)?;
    let periods = spec.horizon + 1;
    let sz = sizes(model);
    let n = sz.len();
    let o = model.origin_index_of(&spec.origin);
    let lx = model.start.x.len();
    let mut total = DrawResponse::zeros(model.k, periods);
    let mut direct = DrawResponse::zeros(model.k, periods);
    let block_start = |i: usize| -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let (off, ki) = (model.offsets[i], sz[i]);
        (
            model.start.x.iter().map(|v| v.rows(off, ki).into_owned()).collect(),
            model.start.h.iter().map(|v| v.rows(off, ki).into_owned()).collect(),
        )
    };
    let local = Impulse {
        index: imp.index - model.offsets[o],
        ..imp.clone()
    };
    for rep in 0..reps {
        let ids = (draw, rep);
        let mut rng = sim_rng(seed, draw, rep);
        let noise = Noise::draw(&sz, periods, &mut rng);
        let base = simulate_global(model, &noise, None, ids)?;
        let shocked = simulate_global(model, &noise, Some(&imp), ids)?;
        total.add_diff(&shocked, &base, model.k);

        let full_base: Vec<DVector<f64>> = model.start.x.iter().chain(&base.x).cloned().collect();
        // The origin with its own foreign variables frozen at baseline.
        let xstar_o: Vec<DVector<f64>> = full_base.iter().map(|x| links.foreign_of(o, x)).collect();
        let (x0, h0) = block_start(o);
        let nb = noise.block(model.offsets[o], sz[o]);
        let o_base = simulate_country(&model.countries[o], &x0, &h0, &xstar_o, &nb, None, ids)?;
        let o_cf = simulate_country(&model.countries[o], &x0, &h0, &xstar_o, &nb, Some(&local), ids)?;
        add_block(&mut direct, model.offsets[o], &o_cf, &o_base);

        let mix = |op: &Paths| -> Vec<DVector<f64>> {
            let mut out = full_base.clone();
            for (t, v) in op.x.iter().enumerate() {
                out[lx + t].rows_mut(model.offsets[o], sz[o]).copy_from(v);
            }
            out
        };
        let mix_base = mix(&o_base);
        let mix_cf = mix(&o_cf);
        for j in (0..n).filter(|&j| j != o) {
            let xs_base: Vec<DVector<f64>> = mix_base.iter().map(|x| links.foreign_of(j, x)).collect();
            let xs_cf: Vec<DVector<f64>> = mix_cf.iter().map(|x| links.foreign_of(j, x)).collect();
            let (x0, h0) = block_start(j);
            let nb = noise.block(model.offsets[j], sz[j]);
            let jb = simulate_country(&model.countries[j], &x0, &h0, &xs_base, &nb, None, ids)?;
            let jc = simulate_country(&model.countries[j], &x0, &h0, &xs_cf, &nb, None, ids)?;
            add_block(&mut direct, model.offsets[j], &jc, &jb);
        }
    }
    total.scale(1.0 / reps as f64);
    direct.scale(1.0 / reps as f64);
    Ok((total, direct))
}

fn add_block(acc: &mut DrawResponse, off: usize, a: &Paths, b: &Paths) {
    for t in 0..acc.x.ncols() {
        for r in 0..a.x[t].len() {
            acc.x[(off + r, t)] += a.x[t][r] - b.x[t][r];
            acc.h[(off + r, t)] += a.h[t][r] - b.h[t][r];
        }
    }
}

impl GlobalModel {
    fn origin_index_of(&self, id: &str) -> usize {
        self.set.index_of(id).expect("validated origin")
    }
}

fn collect(models: &[GlobalModel], per_draw: Vec<DrawResponse>, regime: Regime, into: &mut Vec<IrfSeries>) {
    let set = &models[0].set;
    for (i, spec) in set.specs().iter().enumerate() {
        for (pos, &v) in spec.domestic().iter().enumerate() {
            let g = models[0].index(i, pos);
            for (measure, pick) in [
                (Measure::Level, (|r: &DrawResponse| &r.x) as fn(&DrawResponse) -> &DMatrix<f64>),
                (Measure::LogVol, |r: &DrawResponse| &r.h),
            ] {
                into.push(IrfSeries {
                    country: spec.id().to_string(),
                    variable: v,
                    measure,
                    regime,
                    per_draw: per_draw.iter().map(|r| pick(r).row(g).iter().copied().collect()).collect(),
                });
            }
        }
    }
}

fn check_models(models: &[GlobalModel], reps: usize) -> Result<()> {
    if models.is_empty() {
        return Err(Error::TooFewDraws { got: 0, need: 1 });
    }
    if reps == 0 {
        return Err(Error::Config("at least one replication is needed".into()));
    }
    Ok(())
}

/// Generalized impulse responses over world draws; replications of draw `d`
/// use streams `(seed, d, rep)`.
pub fn girf(models: &[GlobalModel], spec: &ShockSpec, unit_sd: f64, reps: usize, seed: u64) -> Result<IrfSet> {
    check_models(models, reps)?;
    let per_draw = models
        .par_iter()
        .enumerate()
        .map(|(d, m)| girf_draw(m, spec, unit_sd, reps, seed, d))
        .collect::<Result<Vec<_>>>()?;
    let mut series = Vec::new();
    let regime = Regime {
        vol_shock: spec.regime_vol(),
        scope: Scope::Total,
    };
    collect(models, per_draw, regime, &mut series);
    Ok(IrfSet {
        horizon: spec.horizon,
        series,
    })
}

/// Total, direct and indirect (= total − direct) responses.
pub fn decompose_direct_total(
    models: &[GlobalModel],
    links: &LinkMatrices,
    spec: &ShockSpec,
    unit_sd: f64,
    reps: usize,
    seed: u64,
) -> Result<IrfSet> {
    check_models(models, reps)?;
    let pairs = models
        .par_iter()
        .enumerate()
        .map(|(d, m)| decompose_draw(m, links, spec, unit_sd, reps, seed, d))
        .collect::<Result<Vec<_>>>()?;
    let vol = spec.regime_vol();
    let mut series = Vec::new();
    let indirect: Vec<DrawResponse> = pairs
        .iter()
        .map(|(t, d)| DrawResponse {
            x: &t.x - &d.x,
            h: &t.h - &d.h,
        })
        .collect();
    let (tot, dir): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    collect(models, tot, Regime { vol_shock: vol, scope: Scope::Total }, &mut series);
    collect(models, dir, Regime { vol_shock: vol, scope: Scope::Direct }, &mut series);
    collect(models, indirect, Regime { vol_shock: vol, scope: Scope::Indirect }, &mut series);
    Ok(IrfSet {
        horizon: spec.horizon,
        series,
    })
}
