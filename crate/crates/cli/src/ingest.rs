use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use gvarsv_core::domain::{CountryData, CountrySet, Panel, QuarterRange, RawSeries, VariableKind, WeightMatrix};
use gvarsv_core::ingest::{
    aggregate_euro_area, build_weight_matrix, load_panel, load_trade_flows, load_weights_csv, override_short_rate,
    raw_request, transform, Aggregate, TransformOptions,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::Stage;
use crate::config::Loaded;
use crate::error::{CliError, CliResult};

pub const STAGE: &str = "ingest";

/// Everything later stages need from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub set: CountrySet,
    pub panel: Panel,
    pub weights: WeightMatrix,
    /// Size weights of all listed countries, if supplied.
    pub size: Option<BTreeMap<String, f64>>,
}

fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::User(format!("{what} file not found: {}", path.display())))
    }
}

/// Countries that have at least one `rate` row in an override file.
fn override_codes(path: &Path) -> CliResult<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(gvarsv_core::Error::from)?;
        if rec.get(1) == Some("rate") {
            out.insert(rec.get(0).unwrap_or_default().to_string());
        }
    }
    Ok(out)
}

/// Cuts every country to `[first, last]`.
fn trim(panel: Panel, first: Option<gvarsv_core::domain::Quarter>, last: Option<gvarsv_core::domain::Quarter>) -> CliResult<Panel> {
    if first.is_none() && last.is_none() {
        return Ok(panel);
    }
    let r = panel.range();
    let first = first.unwrap_or(r.first).max(r.first);
    let last = last.unwrap_or(r.last).min(r.last);
    let range = QuarterRange::new(first, last).map_err(|_| CliError::User(format!("sample {first}..{last} is empty")))?;
    let mut out = Vec::new();
    for c in panel.into_countries() {
        let a = c.range.first.max(first);
        let b = c.range.last.min(last);
        if a > b {
            return Err(CliError::User(format!("{}: no data inside the sample {range}", c.code)));
        }
        let (i, j) = (c.range.index_of(a).expect("inside"), c.range.index_of(b).expect("inside"));
        out.push(CountryData {
            code: c.code,
            range: QuarterRange::new(a, b)?,
            series: c.series.into_iter().map(|(v, s)| (v, s[i..=j].to_vec())).collect(),
        });
    }
    Ok(Panel::new(range, None, out)?)
}

pub fn build(cfg: &Loaded, stage: Option<&mut Stage>) -> CliResult<Ingested> {
    let d = &cfg.config.data;
    let m = &cfg.config.model;
    let set = cfg.country_set()?;
    let levels = cfg.resolve(&d.levels);
    let trade = cfg.resolve(&d.trade);
    require(&levels, "levels")?;
    require(&trade, "trade")?;
    let size_path = d.size_weights.as_ref().map(|p| cfg.resolve(p));
    let override_path = d.rate_override.as_ref().map(|p| cfg.resolve(p));
    if let Some(p) = &size_path {
        require(p, "size weights")?;
    }
    if let Some(p) = &override_path {
        require(p, "rate override")?;
    }
    if let Some(stage) = stage {
        stage.input("levels", &levels)?;
        stage.input("trade", &trade)?;
        if let Some(p) = &size_path {
            stage.input("size_weights", p)?;
        }
        if let Some(p) = &override_path {
            stage.input("rate_override", p)?;
        }
    }

    let agg = d.euro_area.then(Aggregate::euro_area);
    if let Some(a) = &agg {
        if !m.countries.contains(&a.code) {
            return Err(CliError::User(format!("data.euro_area is set but {} is not in model.countries", a.code)));
        }
    }
    let request = raw_request(set.specs(), agg.as_ref(), &d.numeraire);
    let raw = load_panel(&levels, &request)?;
    let mut countries: Vec<(String, Vec<VariableKind>)> = Vec::new();
    for s in set.specs() {
        match &agg {
            Some(a) if a.code == s.id() => {
                countries.extend(a.members.iter().map(|c| (c.clone(), s.domestic().to_vec())));
            }
            _ => countries.push((s.id().to_string(), s.domestic().to_vec())),
        }
    }
    let opts = TransformOptions {
        numeraire: d.numeraire.clone(),
        fx: d.fx,
    };
    let mut panel = transform(&raw, &countries, &opts)?;

    let size = size_path.as_deref().map(load_weights_csv).transpose()?;
    if let Some(a) = &agg {
        let size = size
            .as_ref()
            .ok_or_else(|| CliError::User("data.euro_area needs data.size_weights".into()))?;
        let mut w = BTreeMap::new();
        for c in &a.members {
            let x = size
                .get(c)
                .ok_or_else(|| CliError::User(format!("no size weight for euro member {c}")))?;
            w.insert(c.clone(), *x);
        }
        let total: f64 = w.values().sum();
        w.values_mut().for_each(|x| *x /= total);
        panel = aggregate_euro_area(&panel, a, &w)?;
    }
    if let Some(p) = &override_path {
        let codes = override_codes(p)?;
        let req: BTreeMap<String, BTreeSet<RawSeries>> = set
            .ids()
            .into_iter()
            .filter(|c| codes.contains(c))
            .map(|c| (c, BTreeSet::from([RawSeries::Rate])))
            .collect();
        if !req.is_empty() {
            panel = override_short_rate(&panel, &load_panel(p, &req)?)?;
        }
    }
    let panel = trim(panel, m.sample_start, m.sample_end)?;
    let r = panel.range();
    if !(m.training_end > r.first && m.training_end < r.last) {
        return Err(CliError::User(format!("model.training_end {} must lie strictly inside the sample {r}", m.training_end)));
    }
    let panel = panel.with_training_split(Some(m.training_end))?;

    let mut flows = load_trade_flows(&trade)?;
    if let Some(a) = &agg {
        if !flows.order.contains(&a.code) {
            flows = flows.aggregate(a)?;
        }
    }
    let flows = flows.restrict(&set.ids())?;
    let weights = build_weight_matrix(&flows, d.trade_basis)?;
    Ok(Ingested {
        set,
        panel,
        weights,
        size,
    })
}

fn weights_csv(w: &WeightMatrix) -> String {
    let mut s = String::from("country");
    for c in w.order() {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (i, c) in w.order().iter().enumerate() {
        s.push_str(c);
        for j in 0..w.n() {
            s.push_str(&format!(",{:.17e}", w.get(i, j)));
        }
        s.push('\n');
    }
    s
}

pub fn run(cfg: &Loaded) -> CliResult<()> {
    let mut stage = Stage::create(cfg, STAGE)?;
    let data = build(cfg, Some(&mut stage))?;
    stage.write_json("ingested.json", &data)?;
    stage.write("panel.csv", data.panel.to_csv()?.as_bytes())?;
    stage.write("weights.csv", weights_csv(&data.weights).as_bytes())?;
    stage.finish()?;
    Ok(())
}

pub fn load(cfg: &Loaded) -> CliResult<Ingested> {
    let data: Ingested = crate::artifacts::read_json(cfg, STAGE, "ingested.json")?;
    if data.set != cfg.country_set()? {
        return Err(CliError::User("the model layout changed since ingest; run `gvar-sv ingest` again".into()));
    }
    Ok(data)
}
