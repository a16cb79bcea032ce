use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endogenous macro variable. Declaration order is the canonical ordering
/// inside every country block: the policy rate comes first so that the
/// recursive identification puts it at the top of the system.
///
/// Rates are percent per annum; growth rates and inflation are annual
/// log-differences times 100.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    ShortRate,
    OutputGrowth,
    Inflation,
    RealFxGrowth,
    EquityPriceGrowth,
}

impl VariableKind {
    pub const ALL: [VariableKind; 5] = [
        VariableKind::ShortRate,
        VariableKind::OutputGrowth,
        VariableKind::Inflation,
        VariableKind::RealFxGrowth,
        VariableKind::EquityPriceGrowth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariableKind::ShortRate => "short_rate",
            VariableKind::OutputGrowth => "output_growth",
            VariableKind::Inflation => "inflation",
            VariableKind::RealFxGrowth => "real_fx_growth",
            VariableKind::EquityPriceGrowth => "equity_price_growth",
        }
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariableKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VariableKind::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invariant(format!("unknown variable {s:?}")))
    }
}

/// Lag orders of one country model.
///
/// `p` domestic lags, `q` foreign lags (the foreign block also carries lag 0,
/// and the volatility equation uses `q` lags of the domestic variables),
/// `s` volatility-in-mean lags (plus lag 0), `m` volatility-transition lags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagOrders {
    pub p: usize,
    pub q: usize,
    pub s: usize,
    pub m: usize,
}

impl LagOrders {
    pub fn new(p: usize, q: usize, s: usize, m: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::invariant("lag order p must be >= 1"));
        }
        if m < 1 {
            return Err(Error::invariant("lag order m must be >= 1"));
        }
        Ok(Self { p, q, s, m })
    }

    /// Observations consumed as initial conditions for the level lags.
    pub fn max_x_lag(&self) -> usize {
        self.p.max(self.q)
    }

    /// Presample log-volatility values required by the lags.
    pub fn max_h_lag(&self) -> usize {
        self.s.max(self.m)
    }
}

impl Default for LagOrders {
    fn default() -> Self {
        Self { p: 2, q: 1, s: 1, m: 1 }
    }
}

fn strictly_canonical(vars: &[VariableKind]) -> bool {
    vars.windows(2).all(|w| w[0] < w[1])
}

/// Layout of one country model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountrySpecRaw", into = "CountrySpecRaw")]
pub struct CountrySpec {
    id: String,
    domestic: Vec<VariableKind>,
    foreign: Vec<VariableKind>,
    lags: LagOrders,
    is_shock_origin: bool,
}

#[derive(Serialize, Deserialize)]
struct CountrySpecRaw {
    id: String,
    domestic: Vec<VariableKind>,
    foreign: Vec<VariableKind>,
    lags: LagOrders,
    is_shock_origin: bool,
}

impl TryFrom<CountrySpecRaw> for CountrySpec {
    type Error = Error;
    fn try_from(r: CountrySpecRaw) -> Result<Self> {
        CountrySpec::new(r.id, r.domestic, r.foreign, r.lags, r.is_shock_origin)
    }
}

impl From<CountrySpec> for CountrySpecRaw {
    fn from(s: CountrySpec) -> Self {
        CountrySpecRaw {
            id: s.id,
            domestic: s.domestic,
            foreign: s.foreign,
            lags: s.lags,
            is_shock_origin: s.is_shock_origin,
        }
    }
}

impl CountrySpec {
    pub fn new(
        id: impl Into<String>,
        domestic: Vec<VariableKind>,
        foreign: Vec<VariableKind>,
        lags: LagOrders,
        is_shock_origin: bool,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invariant("country id is empty"));
        }
        if domestic.is_empty() {
            return Err(Error::invariant(format!("{id}: no domestic variables")));
        }
        if !strictly_canonical(&domestic) {
            return Err(Error::invariant(format!(
                "{id}: domestic variables must be duplicate-free and in canonical order \
                 (short_rate, output_growth, inflation, real_fx_growth, equity_price_growth)"
            )));
        }
        if !strictly_canonical(&foreign) {
            return Err(Error::invariant(format!(
                "{id}: foreign variables must be duplicate-free and in canonical order"
            )));
        }
        LagOrders::new(lags.p, lags.q, lags.s, lags.m)?;
        if is_shock_origin {
            if domestic.contains(&VariableKind::RealFxGrowth) {
                return Err(Error::invariant(format!(
                    "{id}: the shock-origin (numeraire) country cannot carry real_fx_growth \
                     as a domestic variable"
                )));
            }
            if foreign.contains(&VariableKind::ShortRate) {
                return Err(Error::invariant(format!(
                    "{id}: the shock-origin country excludes the foreign short rate"
                )));
            }
            if domestic.first() != Some(&VariableKind::ShortRate) {
                return Err(Error::invariant(format!(
                    "{id}: the shock-origin country must order short_rate first"
                )));
            }
        }
        Ok(Self {
            id,
            domestic,
            foreign,
            lags,
            is_shock_origin,
        })
    }

    /// Shock-origin layout: (rate, output, inflation[, equity]) with foreign
    /// output, inflation and the real effective exchange rate.
    pub fn origin(id: impl Into<String>, lags: LagOrders, equity: bool) -> Result<Self> {
        use VariableKind::*;
        let mut dom = vec![ShortRate, OutputGrowth, Inflation];
        if equity {
            dom.push(EquityPriceGrowth);
        }
        CountrySpec::new(id, dom, vec![OutputGrowth, Inflation, RealFxGrowth], lags, true)
    }

    /// Non-origin layout: (rate, output, inflation, real fx[, equity]) with
    /// foreign rate, output and inflation.
    pub fn partner(id: impl Into<String>, lags: LagOrders, equity: bool) -> Result<Self> {
        use VariableKind::*;
        let mut dom = vec![ShortRate, OutputGrowth, Inflation, RealFxGrowth];
        if equity {
            dom.push(EquityPriceGrowth);
        }
        CountrySpec::new(id, dom, vec![ShortRate, OutputGrowth, Inflation], lags, false)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn domestic(&self) -> &[VariableKind] {
        &self.domestic
    }

    pub fn foreign(&self) -> &[VariableKind] {
        &self.foreign
    }

    pub fn lags(&self) -> LagOrders {
        self.lags
    }

    pub fn is_shock_origin(&self) -> bool {
        self.is_shock_origin
    }

    pub fn k(&self) -> usize {
        self.domestic.len()
    }

    pub fn k_star(&self) -> usize {
        self.foreign.len()
    }

    pub fn position(&self, v: VariableKind) -> Option<usize> {
        self.domestic.iter().position(|&d| d == v)
    }

    pub fn with_lags(&self, lags: LagOrders) -> Result<Self> {
        CountrySpec::new(
            self.id.clone(),
            self.domestic.clone(),
            self.foreign.clone(),
            lags,
            self.is_shock_origin,
        )
    }

    /// Positions (row, column) in the impact matrix constrained to be
    /// non-positive: output and inflation responses to the rate shock.
    pub fn sign_restricted_entries(&self) -> Vec<(usize, usize)> {
        if !self.is_shock_origin {
            return Vec::new();
        }
        let Some(rate) = self.position(VariableKind::ShortRate) else {
            return Vec::new();
        };
        [VariableKind::OutputGrowth, VariableKind::Inflation]
            .into_iter()
            .filter_map(|v| self.position(v).map(|r| (r, rate)))
            .collect()
    }
}

/// The collection of country models making up one world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CountrySpec>", into = "Vec<CountrySpec>")]
pub struct CountrySet {
    specs: Vec<CountrySpec>,
}

impl TryFrom<Vec<CountrySpec>> for CountrySet {
    type Error = Error;
    fn try_from(specs: Vec<CountrySpec>) -> Result<Self> {
        CountrySet::new(specs)
    }
}

impl From<CountrySet> for Vec<CountrySpec> {
    fn from(s: CountrySet) -> Self {
        s.specs
    }
}

impl CountrySet {
    pub fn new(specs: Vec<CountrySpec>) -> Result<Self> {
        let origins = specs.iter().filter(|s| s.is_shock_origin).count();
        if origins != 1 {
            return Err(Error::invariant(format!(
                "exactly one country must be the shock origin, found {origins}"
            )));
        }
        let mut seen = BTreeSet::new();
        for s in &specs {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invariant(format!("duplicate country id {}", s.id)));
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[CountrySpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn origin_index(&self) -> usize {
        self.specs.iter().position(|s| s.is_shock_origin).expect("validated")
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.id.clone()).collect()
    }

    /// Stacked dimension of the world system.
    pub fn total_k(&self) -> usize {
        self.specs.iter().map(CountrySpec::k).sum()
    }

    /// Offsets of each country block inside the stacked vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.specs.len());
        let mut acc = 0;
        for s in &self.specs {
            off.push(acc);
            acc += s.k();
        }
        off
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VariableKind::*;

    #[test]
    fn standard_layouts() {
        let us = CountrySpec::origin("USA", LagOrders::default(), false).unwrap();
        assert_eq!(us.k(), 3);
        assert!(!us.foreign().contains(&ShortRate));
        assert_eq!(us.foreign(), &[OutputGrowth, Inflation, RealFxGrowth]);
        assert_eq!(us.sign_restricted_entries(), vec![(1, 0), (2, 0)]);

        let ea = CountrySpec::partner("EA", LagOrders::default(), true).unwrap();
        assert_eq!(ea.domestic().last(), Some(&EquityPriceGrowth));
        assert_eq!(ea.foreign(), &[ShortRate, OutputGrowth, Inflation]);
        assert!(ea.sign_restricted_entries().is_empty());
    }

    #[test]
    fn rejects_bad_specs() {
        let lags = LagOrders::default();
        assert!(CountrySpec::new("X", vec![], vec![], lags, false).is_err());
        assert!(CountrySpec::new("X", vec![Inflation, ShortRate], vec![], lags, false).is_err());
        assert!(CountrySpec::new("X", vec![ShortRate, ShortRate], vec![], lags, false).is_err());
        let err = CountrySpec::new(
            "USA",
            vec![ShortRate, OutputGrowth, RealFxGrowth],
            vec![],
            lags,
            true,
        )
        .unwrap_err();
        assert!(err.to_string().contains("real_fx_growth"));
        assert!(CountrySpec::new("USA", vec![ShortRate], vec![ShortRate], lags, true).is_err());
        assert!(LagOrders::new(0, 1, 1, 1).is_err());
        assert!(LagOrders::new(1, 0, 0, 0).is_err());
    }

    #[test]
    fn country_set_needs_one_origin() {
        let lags = LagOrders::default();
        let a = CountrySpec::partner("A", lags, false).unwrap();
        let b = CountrySpec::partner("B", lags, false).unwrap();
        assert!(CountrySet::new(vec![a.clone(), b.clone()]).is_err());
        let us = CountrySpec::origin("USA", lags, false).unwrap();
        let set = CountrySet::new(vec![us.clone(), a.clone(), b]).unwrap();
        assert_eq!(set.total_k(), 11);
        assert_eq!(set.offsets(), vec![0, 3, 7]);
        assert!(CountrySet::new(vec![us, a.clone(), a]).is_err());
    }

    #[test]
    fn serde_revalidates() {
        let us = CountrySpec::origin("USA", LagOrders::default(), false).unwrap();
        let json = serde_json::to_string(&us).unwrap();
        let back: CountrySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, us);
        let tampered = json.replace("\"short_rate\",\"output_growth\"", "\"output_growth\",\"short_rate\"");
        assert!(serde_json::from_str::<CountrySpec>(&tampered).is_err());
    }
}
