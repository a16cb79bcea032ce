use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::irf::{IrfSeries, IrfSet};
use crate::error::{Error, Result};

pub const GROUP_WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub members: Vec<(String, f64)>,
}

impl GroupSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.members.iter().map(|m| m.1).sum();
        if self.members.is_empty() || (sum - 1.0).abs() > GROUP_WEIGHT_TOL {
            return Err(Error::WeightSum {
                sum,
                tol: GROUP_WEIGHT_TOL,
            });
        }
        if self.members.iter().any(|m| !(m.1 >= 0.0)) {
            return Err(Error::Config(format!("group {}: negative weight", self.name)));
        }
        Ok(())
    }

    /// Weights proportional to `size`, normalized within the group.
    pub fn weighted(name: &str, members: &[&str], size: &BTreeMap<String, f64>) -> Result<Self> {
        let raw: Vec<(String, f64)> = members
            .iter()
            .map(|m| {
                size.get(*m)
                    .map(|&s| (m.to_string(), s))
                    .ok_or_else(|| Error::Config(format!("group {name}: no weight for {m}")))
            })
            .collect::<Result<_>>()?;
        let total: f64 = raw.iter().map(|m| m.1).sum();
        if !(total > 0.0) {
            return Err(Error::Config(format!("group {name}: weights sum to {total}")));
        }
        Ok(Self {
            name: name.into(),
            members: raw.into_iter().map(|(m, s)| (m, s / total)).collect(),
        })
    }
}

pub const EMERGING: [&str; 8] = ["ARG", "CHL", "IND", "KOR", "MYS", "PHL", "ZAF", "THA"];
pub const CHINA: [&str; 1] = ["CHN"];
pub const EM_ASIA_EX_CHINA: [&str; 5] = ["IND", "KOR", "MYS", "PHL", "THA"];
pub const EM_LATIN_AMERICA: [&str; 2] = ["ARG", "CHL"];

/// The four reporting groups with size weights (e.g. PPP GDP).
pub fn standard_groups(size: &BTreeMap<String, f64>) -> Result<Vec<GroupSpec>> {
    Ok(vec![
        GroupSpec::weighted("EM", &EMERGING, size)?,
        GroupSpec::weighted("China", &CHINA, size)?,
        GroupSpec::weighted("EM Asia ex China", &EM_ASIA_EX_CHINA, size)?,
        GroupSpec::weighted("EM Latin America", &EM_LATIN_AMERICA, size)?,
    ])
}

/// Group responses, formed draw by draw before any band is taken. A series
/// is produced for every (variable, measure, regime) all members share.
pub fn aggregate_groups(irfs: &IrfSet, groups: &[GroupSpec]) -> Result<IrfSet> {
    let mut series = Vec::new();
    for g in groups {
        g.validate()?;
        let first = &g.members[0].0;
        if !irfs.series.iter().any(|s| &s.country == first) {
            return Err(Error::Config(format!("group {}: {first} has no responses", g.name)));
        }
        for proto in irfs.series.iter().filter(|s| &s.country == first) {
            let mut parts = Vec::with_capacity(g.members.len());
            for (m, w) in &g.members {
                match irfs.get(m, proto.variable, proto.measure, proto.regime) {
                    Some(s) => parts.push((s, *w)),
                    None => break,
                }
            }
            if parts.len() != g.members.len() {
                continue;
            }
            let draws = proto.per_draw.len();
            let len = irfs.horizon + 1;
            let per_draw = (0..draws)
                .map(|d| {
                    (0..len)
                        .map(|h| parts.iter().map(|(s, w)| w * s.per_draw[d][h]).sum())
                        .collect()
                })
                .collect();
            series.push(IrfSeries {
                country: g.name.clone(),
                variable: proto.variable,
                measure: proto.measure,
                regime: proto.regime,
                per_draw,
            });
        }
    }
    Ok(IrfSet {
        horizon: irfs.horizon,
        series,
    })
}
