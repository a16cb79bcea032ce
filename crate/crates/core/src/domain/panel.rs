use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::calendar::{Quarter, QuarterRange};
use super::spec::VariableKind;
use crate::error::{Error, Result};

/// Raw quarterly level series as delivered by the data source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawSeries {
    /// Real GDP index.
    Gdp,
    /// Consumer price index.
    Cpi,
    /// Nominal short-term (or shadow) policy rate, percent per annum.
    Rate,
    /// Nominal exchange rate, local currency per US dollar.
    Fx,
    /// CPI-deflated equity price index.
    Equity,
}

impl RawSeries {
    pub const ALL: [RawSeries; 5] = [
        RawSeries::Gdp,
        RawSeries::Cpi,
        RawSeries::Rate,
        RawSeries::Fx,
        RawSeries::Equity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RawSeries::Gdp => "gdp",
            RawSeries::Cpi => "cpi",
            RawSeries::Rate => "rate",
            RawSeries::Fx => "fx",
            RawSeries::Equity => "equity",
        }
    }
}

impl fmt::Display for RawSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RawSeries {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RawSeries::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invariant(format!("unknown raw series {s:?}")))
    }
}

/// Raw levels for every country over a common quarter grid; `None` marks a
/// missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub range: QuarterRange,
    pub countries: BTreeMap<String, BTreeMap<RawSeries, Vec<Option<f64>>>>,
    /// (country, series, quarter) triples absent from the input.
    pub gaps: Vec<(String, RawSeries, Quarter)>,
}

impl RawPanel {
    pub fn series(&self, country: &str, s: RawSeries) -> Option<&[Option<f64>]> {
        self.countries.get(country)?.get(&s).map(Vec::as_slice)
    }
}

/// Transformed data of one country over its own (possibly shortened) sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryData {
    pub code: String,
    pub range: QuarterRange,
    pub series: BTreeMap<VariableKind, Vec<f64>>,
}

impl CountryData {
    pub fn get(&self, v: VariableKind, q: Quarter) -> Option<f64> {
        let idx = self.range.index_of(q)?;
        self.series.get(&v).map(|s| s[idx])
    }

    pub fn variables(&self) -> Vec<VariableKind> {
        self.series.keys().copied().collect()
    }
}

/// Model-ready panel: transformed series, rectangular within each country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    range: QuarterRange,
    training_split: Option<Quarter>,
    countries: Vec<CountryData>,
}

impl Panel {
    pub fn new(
        range: QuarterRange,
        training_split: Option<Quarter>,
        countries: Vec<CountryData>,
    ) -> Result<Self> {
        if let Some(split) = training_split {
            if split <= range.first || split >= range.last {
                return Err(Error::invariant(format!(
                    "training split {split} must lie strictly inside {range}"
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &countries {
            if !seen.insert(c.code.as_str()) {
                return Err(Error::invariant(format!("duplicate country {}", c.code)));
            }
            if !range.contains(c.range.first) || !range.contains(c.range.last) {
                return Err(Error::invariant(format!(
                    "{}: sample {} outside panel range {range}",
                    c.code, c.range
                )));
            }
            for (v, s) in &c.series {
                if s.len() != c.range.len() {
                    return Err(Error::invariant(format!(
                        "{}/{v}: {} values for {} quarters (panel must be rectangular per country)",
                        c.code,
                        s.len(),
                        c.range.len()
                    )));
                }
                if let Some(i) = s.iter().position(|x| !x.is_finite()) {
                    return Err(Error::invariant(format!(
                        "{}/{v}: non-finite value at {}",
                        c.code,
                        c.range.at(i)
                    )));
                }
            }
        }
        Ok(Self {
            range,
            training_split,
            countries,
        })
    }

    pub fn range(&self) -> QuarterRange {
        self.range
    }

    pub fn training_split(&self) -> Option<Quarter> {
        self.training_split
    }

    pub fn with_training_split(mut self, split: Option<Quarter>) -> Result<Self> {
        self.training_split = split;
        Panel::new(self.range, self.training_split, self.countries)
    }

    pub fn countries(&self) -> &[CountryData] {
        &self.countries
    }

    pub fn country(&self, code: &str) -> Option<&CountryData> {
        self.countries.iter().find(|c| c.code == code)
    }

    pub fn codes(&self) -> Vec<String> {
        self.countries.iter().map(|c| c.code.clone()).collect()
    }

    pub fn into_countries(self) -> Vec<CountryData> {
        self.countries
    }

    /// Series of `code`/`v` restricted to `window`, if fully covered.
    pub fn window(&self, code: &str, v: VariableKind, window: QuarterRange) -> Option<&[f64]> {
        let c = self.country(code)?;
        let s = c.series.get(&v)?;
        let a = c.range.index_of(window.first)?;
        let b = c.range.index_of(window.last)?;
        Some(&s[a..=b])
    }

    /// Canonical long-format CSV: `country,variable,quarter,value`, rows
    /// sorted by country order, variable order, then time.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["country", "variable", "quarter", "value"])?;
        for c in &self.countries {
            for (v, s) in &c.series {
                for (i, x) in s.iter().enumerate() {
                    w.write_record([
                        c.code.as_str(),
                        v.name(),
                        &c.range.at(i).to_string(),
                        &x.to_string(),
                    ])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::invariant(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses the canonical CSV written by [`Panel::to_csv`].
    pub fn from_csv(text: &str, range: QuarterRange, training_split: Option<Quarter>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows: Vec<(String, VariableKind, Quarter, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let perr = |msg: String| Error::Parse {
                path: "<panel>".into(),
                line,
                msg,
            };
            if rec.len() != 4 {
                return Err(perr(format!("expected 4 fields, got {}", rec.len())));
            }
            let v: VariableKind = rec[1].parse().map_err(|e: Error| perr(e.to_string()))?;
            let q: Quarter = rec[2].parse().map_err(|e: Error| perr(e.to_string()))?;
            let x: f64 = rec[3].parse().map_err(|_| perr(format!("bad value {:?}", &rec[3])))?;
            rows.push((rec[0].to_string(), v, q, x));
        }
        let mut order: Vec<String> = Vec::new();
        let mut data: BTreeMap<String, BTreeMap<VariableKind, Vec<(Quarter, f64)>>> = BTreeMap::new();
        for (c, v, q, x) in rows {
            if !order.contains(&c) {
                order.push(c.clone());
            }
            data.entry(c).or_default().entry(v).or_default().push((q, x));
        }
        let mut countries = Vec::new();
        for code in order {
            let vars = data.remove(&code).expect("present");
            let mut crange: Option<QuarterRange> = None;
            let mut series = BTreeMap::new();
            for (v, obs) in vars {
                let first = obs.first().expect("non-empty").0;
                let last = obs.last().expect("non-empty").0;
                let r = QuarterRange::new(first, last)?;
                if obs.len() != r.len() || obs.iter().enumerate().any(|(i, (q, _))| *q != r.at(i)) {
                    return Err(Error::invariant(format!(
                        "{code}/{v}: quarters not contiguous and increasing"
                    )));
                }
                match crange {
                    None => crange = Some(r),
                    Some(cr) if cr != r => {
                        return Err(Error::invariant(format!(
                            "{code}: variables cover different samples"
                        )))
                    }
                    _ => {}
                }
                series.insert(v, obs.into_iter().map(|(_, x)| x).collect());
            }
            countries.push(CountryData {
                code,
                range: crange.expect("at least one variable"),
                series,
            });
        }
        Panel::new(range, training_split, countries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Quarter {
        s.parse().unwrap()
    }

    fn small() -> Panel {
        let range = QuarterRange::new(q("2000Q1"), q("2001Q4")).unwrap();
        let mut series = BTreeMap::new();
        series.insert(VariableKind::ShortRate, (0..8).map(|i| i as f64 * 0.25).collect());
        series.insert(VariableKind::Inflation, (0..8).map(|i| 1.0 / (i as f64 + 3.0)).collect());
        Panel::new(
            range,
            Some(q("2000Q3")),
            vec![CountryData {
                code: "AAA".into(),
                range,
                series,
            }],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = small();
        let text = p.to_csv().unwrap();
        let back = Panel::from_csv(&text, p.range(), p.training_split()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_csv().unwrap(), text);
    }

    #[test]
    fn rejects_split_on_boundary() {
        let p = small();
        assert!(p.clone().with_training_split(Some(q("2000Q1"))).is_err());
        assert!(p.clone().with_training_split(Some(q("2001Q4"))).is_err());
        assert!(p.with_training_split(Some(q("2001Q3"))).is_ok());
    }

    #[test]
    fn rejects_ragged_country() {
        let range = QuarterRange::new(q("2000Q1"), q("2000Q4")).unwrap();
        let mut series = BTreeMap::new();
        series.insert(VariableKind::ShortRate, vec![1.0, 2.0, 3.0]);
        let err = Panel::new(range, None, vec![CountryData { code: "A".into(), range, series }])
            .unwrap_err();
        assert!(err.to_string().contains("rectangular"));
    }
}
