//! Writes generated worlds in the raw input formats: levels whose annual
//! log differences reproduce the generated growth rates, and trade flows
//! whose total-trade shares reproduce the weights.

use std::fmt::Write;

use gvarsv_core::domain::{Quarter, VariableKind};

use crate::simulate::Generated;
use crate::world::TrueWorld;

/// Raw panel CSV. The first generated period lands four quarters after
/// `first`; the four leading quarters carry unit levels.
pub fn levels_csv(world: &TrueWorld, data: &Generated, first: Quarter) -> String {
    let mut out = String::from("country,variable,quarter,value\n");
    let n = data.len();
    for (i, spec) in world.specs().iter().enumerate() {
        for (pos, v) in spec.domestic().iter().enumerate() {
            let name = match v {
                VariableKind::OutputGrowth => "gdp",
                VariableKind::Inflation => "cpi",
                VariableKind::ShortRate => "rate",
                VariableKind::EquityPriceGrowth => "equity",
                VariableKind::RealFxGrowth => "fx",
            };
            let mut logs = vec![0.0; n + 4];
            for t in 0..n {
                logs[t + 4] = logs[t] + data.x[i][t][pos] / 100.0;
            }
            for (t, lv) in logs.iter().enumerate() {
                let value = if *v == VariableKind::ShortRate {
                    if t < 4 { 0.0 } else { data.x[i][t - 4][pos] }
                } else {
                    lv.exp()
                };
                writeln!(out, "{},{name},{},{value:.17e}", spec.id(), first.offset(t as i64)).expect("string write");
            }
        }
    }
    out
}

pub fn trade_csv(world: &TrueWorld) -> String {
    let ids = world.set.ids();
    let mut out = String::from("reporter,partner,exports,imports\n");
    for (i, a) in ids.iter().enumerate() {
        for (j, b) in ids.iter().enumerate() {
            if i != j {
                let f = 50.0 * world.weights.get(i, j);
                writeln!(out, "{a},{b},{f:.17e},{f:.17e}").expect("string write");
            }
        }
    }
    out
}
