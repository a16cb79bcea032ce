use std::collections::BTreeMap;
use std::fmt::Write;

use gvarsv_core::shock::{BandRow, Measure};
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, Stage};
use crate::config::Loaded;
use crate::error::{CliError, CliResult};
use crate::experiment::BandsFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub country: String,
    pub variable: String,
    pub measure: Measure,
    pub regime: String,
    pub impact: f64,
    pub impact_lo: f64,
    pub impact_hi: f64,
    /// Largest absolute median and where it occurs.
    pub peak: f64,
    pub peak_horizon: usize,
}

fn summarize(rows: &[BandRow]) -> Vec<Summary> {
    let mut by: BTreeMap<(String, String, Measure, String), Vec<&BandRow>> = BTreeMap::new();
    for r in rows {
        by.entry((r.regime.clone(), r.country.clone(), r.measure, r.variable.to_string()))
            .or_default()
            .push(r);
    }
    by.into_iter()
        .map(|((regime, country, measure, variable), rs)| {
            let impact = rs.iter().find(|r| r.horizon == 0).expect("horizon 0");
            let peak = rs
                .iter()
                .fold(rs[0], |a, b| if b.median.abs() > a.median.abs() { b } else { a });
            Summary {
                country,
                variable,
                measure,
                regime,
                impact: impact.median,
                impact_lo: impact.lo,
                impact_hi: impact.hi,
                peak: peak.median,
                peak_horizon: peak.horizon,
            }
        })
        .collect()
}

pub fn run(cfg: &Loaded) -> CliResult<()> {
    let mut stage = Stage::create(cfg, "report")?;
    let mut sources = Vec::new();
    for name in ["irf", "decompose"] {
        if cfg.out.join(name).join(crate::artifacts::MANIFEST).is_file() {
            stage.upstream(cfg, name)?;
            sources.push((name, read_json::<BandsFile>(cfg, name, "irf_bands.json")?));
        }
    }
    if sources.is_empty() {
        return Err(CliError::User("no responses found; run `gvar-sv irf` or `gvar-sv decompose` first".into()));
    }
    let mut md = String::from("# Shock responses\n");
    let mut json = BTreeMap::new();
    for (name, b) in &sources {
        let s = summarize(&b.rows);
        writeln!(
            md,
            "\n## {name}\n\nOrigin {}; shock unit {:.6} (average structural sd); {} world draws x {} replications; \
             {:.0}% bands.\n",
            b.origin,
            b.unit_sd,
            b.models,
            b.reps,
            100.0 * b.coverage
        )
        .expect("string write");
        md.push_str("| regime | country | variable | measure | impact | band | peak | at |\n");
        md.push_str("|---|---|---|---|---|---|---|---|\n");
        for r in &s {
            let measure = match r.measure {
                Measure::Level => "level",
                Measure::LogVol => "log_vol",
            };
            writeln!(
                md,
                "| {} | {} | {} | {measure} | {:.4} | [{:.4}, {:.4}] | {:.4} | {} |",
                r.regime, r.country, r.variable, r.impact, r.impact_lo, r.impact_hi, r.peak, r.peak_horizon
            )
            .expect("string write");
        }
        json.insert(name.to_string(), s);
    }
    stage.write("report.md", md.as_bytes())?;
    stage.write_json("summary.json", &json)?;
    stage.finish()?;
    Ok(())
}
