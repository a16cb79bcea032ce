use std::fmt::Write;

use gvarsv_core::varx::{build_priors_from_panel, sample_posterior, PosteriorDraws};
use rayon::prelude::*;

use crate::artifacts::{read_json, Stage};
use crate::config::Loaded;
use crate::error::{core_code, CliError, CliResult};
use crate::ingest;

pub const STAGE: &str = "estimate";

pub fn draws_file(code: &str) -> String {
    format!("draws/{code}.json")
}

fn diagnostics_row(out: &mut String, d: &PosteriorDraws) {
    let g = &d.diagnostics;
    let n = g.loglik_trace.len().max(1) as f64;
    let ll = g.loglik_trace.iter().sum::<f64>() / n;
    let mh = g.mean_h_trace.iter().sum::<f64>() / n;
    for (j, v) in d.spec.domestic().iter().enumerate() {
        let q = g.q_trace.iter().map(|q| q[j]).sum::<f64>() / n;
        writeln!(
            out,
            "{},{v},{},{:.6},{:.6},{:.6e},{},{},{:.6},{:.6}",
            d.spec.id(),
            d.len(),
            g.h_acceptance[j],
            g.h_step[j],
            q,
            g.sign_redraws_total,
            g.sign_redraws_max,
            ll,
            mh
        )
        .expect("string write");
    }
}

pub fn run(cfg: &Loaded) -> CliResult<()> {
    let data = ingest::load(cfg)?;
    let mcmc = cfg.mcmc();
    mcmc.validate()?;
    let m = &cfg.config.model;
    let mut stage = Stage::create(cfg, STAGE)?;
    stage.upstream(cfg, ingest::STAGE)?;

    // Chains are seeded by country code, so the schedule cannot change
    // their output.
    let results: Vec<gvarsv_core::Result<PosteriorDraws>> = data
        .set
        .specs()
        .par_iter()
        .map(|spec| {
            let priors = build_priors_from_panel(&data.panel, &data.weights, spec, m.vol_in_mean, &m.priors)?;
            sample_posterior(&data.panel, &data.weights, spec, &priors, &mcmc)
        })
        .collect();

    let mut diag = String::from(
        "country,variable,retained,h_acceptance,h_step,mean_q,sign_redraws_total,sign_redraws_max,mean_loglik,mean_h\n",
    );
    let mut failures = Vec::new();
    let mut code = 0;
    for (spec, r) in data.set.specs().iter().zip(results) {
        match r {
            Ok(d) => {
                diagnostics_row(&mut diag, &d);
                stage.write_json(&draws_file(spec.id()), &d)?;
            }
            Err(e) => {
                code = code.max(core_code(&e));
                let msg = format!("{}: {e}", spec.id());
                stage.fail(msg.clone());
                failures.push(msg);
            }
        }
    }
    stage.write("diagnostics.csv", diag.as_bytes())?;
    stage.finish()?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial {
            message: format!(
                "estimation failed for {} of {} countries (other draws were written):\n  {}",
                failures.len(),
                data.set.len(),
                failures.join("\n  ")
            ),
            code,
        })
    }
}

/// Draws of every modeled country, in model order.
pub fn load(cfg: &Loaded, set: &gvarsv_core::domain::CountrySet) -> CliResult<Vec<PosteriorDraws>> {
    let manifest = crate::artifacts::read_manifest(cfg, STAGE)?;
    set.specs()
        .iter()
        .map(|s| {
            let rel = draws_file(s.id());
            if !manifest.outputs.contains_key(&rel) {
                return Err(CliError::User(format!(
                    "no posterior draws for {}; run `gvar-sv estimate` first",
                    s.id()
                )));
            }
            let d: PosteriorDraws = read_json(cfg, STAGE, &rel)?;
            if &d.spec != s {
                return Err(CliError::User(format!(
                    "draws for {} were made with another layout; run `gvar-sv estimate` again",
                    s.id()
                )));
            }
            Ok(d)
        })
        .collect()
}
