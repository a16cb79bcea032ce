//! Loading, transforming and linking the raw data.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{
    CountryData, CountrySpec, Panel, Quarter, QuarterRange, RawPanel, RawSeries, VariableKind,
    WeightMatrix,
};
use crate::error::{Error, Result};

/// Tolerance on the sum of aggregation weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Raw series needed to build a country's transformed variables.
pub fn raw_requirements(domestic: &[VariableKind]) -> BTreeSet<RawSeries> {
    let mut out = BTreeSet::new();
    for v in domestic {
        match v {
            VariableKind::OutputGrowth => {
                out.insert(RawSeries::Gdp);
            }
            VariableKind::Inflation => {
                out.insert(RawSeries::Cpi);
            }
            VariableKind::ShortRate => {
                out.insert(RawSeries::Rate);
            }
            VariableKind::RealFxGrowth => {
                out.insert(RawSeries::Fx);
                out.insert(RawSeries::Cpi);
            }
            VariableKind::EquityPriceGrowth => {
                out.insert(RawSeries::Equity);
            }
        }
    }
    out
}

/// Euro-area style aggregate: member codes and their PPP-GDP weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub code: String,
    pub members: Vec<String>,
}

impl Aggregate {
    /// The eight original euro members.
    pub fn euro_area() -> Self {
        Self {
            code: "EA".into(),
            members: ["AUT", "BEL", "FIN", "FRA", "DEU", "ITA", "NLD", "ESP"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// (country, raw series) pairs to load. Aggregates are expanded into their
/// members; every country needing a real exchange rate also needs the
/// numeraire's CPI.
pub fn raw_request(
    specs: &[CountrySpec],
    aggregate: Option<&Aggregate>,
    numeraire: &str,
) -> BTreeMap<String, BTreeSet<RawSeries>> {
    let mut req: BTreeMap<String, BTreeSet<RawSeries>> = BTreeMap::new();
    let mut needs_usd_cpi = false;
    for s in specs {
        let r = raw_requirements(s.domestic());
        needs_usd_cpi |= r.contains(&RawSeries::Fx);
        match aggregate {
            Some(a) if a.code == s.id() => {
                for m in &a.members {
                    req.entry(m.clone()).or_default().extend(r.iter().copied());
                }
            }
            _ => {
                req.entry(s.id().to_string()).or_default().extend(r);
            }
        }
    }
    if needs_usd_cpi {
        req.entry(numeraire.to_string()).or_default().insert(RawSeries::Cpi);
    }
    req
}

/// Reads a long-format CSV `country,variable,quarter,value` of raw levels.
/// Empty values are recorded as gaps.
pub fn load_panel(path: &Path, request: &BTreeMap<String, BTreeSet<RawSeries>>) -> Result<RawPanel> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_panel(&text, path, request)
}

pub fn parse_panel(
    text: &str,
    path: &Path,
    request: &BTreeMap<String, BTreeSet<RawSeries>>,
) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let perr = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let headers = rdr.headers()?.clone();
    let want = ["country", "variable", "quarter", "value"];
    if headers.len() < 4 || headers.iter().take(4).zip(want).any(|(h, w)| h != w) {
        if headers.is_empty() {
            return Err(Error::NoRows(path.to_path_buf()));
        }
        return Err(perr(1, format!("header must be {}", want.join(","))));
    }

    let mut obs: BTreeMap<(String, RawSeries), BTreeMap<Quarter, Option<f64>>> = BTreeMap::new();
    let mut last_seen: BTreeMap<(String, RawSeries), Quarter> = BTreeMap::new();
    let mut n_rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        n_rows += 1;
        let country = rec.get(0).unwrap_or_default().to_string();
        let var_name = rec.get(1).unwrap_or_default();
        let Ok(var) = var_name.parse::<RawSeries>() else {
            return Err(perr(line, format!("unknown variable {var_name:?}")));
        };
        let q: Quarter = rec
            .get(2)
            .unwrap_or_default()
            .parse()
            .map_err(|e: Error| perr(line, e.to_string()))?;
        if !request.get(&country).is_some_and(|r| r.contains(&var)) {
            continue;
        }
        let raw_val = rec.get(3).unwrap_or_default();
        let value = if raw_val.is_empty() || raw_val.eq_ignore_ascii_case("na") {
            None
        } else {
            let x: f64 = raw_val
                .parse()
                .map_err(|_| perr(line, format!("bad value {raw_val:?}")))?;
            if !x.is_finite() {
                return Err(perr(line, format!("non-finite value {raw_val:?}")));
            }
            Some(x)
        };
        let key = (country, var);
        if let Some(prev) = last_seen.get(&key) {
            if q == *prev || obs[&key].contains_key(&q) {
                return Err(perr(line, format!("duplicate row for {}/{} {q}", key.0, key.1)));
            }
            if q < *prev {
                return Err(perr(
                    line,
                    format!("quarter {q} out of order for {}/{} (after {prev})", key.0, key.1),
                ));
            }
        }
        last_seen.insert(key.clone(), q);
        obs.entry(key).or_default().insert(q, value);
    }
    if n_rows == 0 {
        return Err(Error::NoRows(path.to_path_buf()));
    }

    let mut missing = Vec::new();
    for (c, vars) in request {
        for v in vars {
            if !obs.get(&(c.clone(), *v)).is_some_and(|m| m.values().any(Option::is_some)) {
                missing.push(format!("{c}/{v}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSeries(missing));
    }

    let first = obs.values().filter_map(|m| m.keys().next()).min().copied().expect("rows");
    let last = obs.values().filter_map(|m| m.keys().last()).max().copied().expect("rows");
    let range = QuarterRange::new(first, last)?;
    let mut countries: BTreeMap<String, BTreeMap<RawSeries, Vec<Option<f64>>>> = BTreeMap::new();
    let mut gaps = Vec::new();
    for ((c, v), m) in obs {
        let series: Vec<Option<f64>> = range.iter().map(|q| m.get(&q).copied().flatten()).collect();
        for (i, x) in series.iter().enumerate() {
            if x.is_none() {
                gaps.push((c.clone(), v, range.at(i)));
            }
        }
        countries.entry(c).or_default().insert(v, series);
    }
    Ok(RawPanel {
        range,
        countries,
        gaps,
    })
}

/// Sign convention for real exchange-rate growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FxConvention {
    /// `rer = fx · CPI_numeraire / CPI_local` with fx in local currency per
    /// numeraire unit; a real depreciation is positive.
    #[default]
    DepreciationPositive,
    /// Same ratio inverted; a real appreciation is positive.
    AppreciationPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformOptions {
    pub numeraire: String,
    pub fx: FxConvention,
}

fn log_level(
    raw: &[Option<f64>],
    t: usize,
    country: &str,
    series: RawSeries,
    range: &QuarterRange,
) -> Result<Option<f64>> {
    match raw[t] {
        None => Ok(None),
        Some(x) if x > 0.0 => Ok(Some(x.ln())),
        Some(x) => Err(Error::NonPositiveLevel {
            country: country.to_string(),
            variable: series.to_string(),
            quarter: range.at(t).to_string(),
            value: x,
        }),
    }
}

/// `100 (ln X_t - ln X_{t-4})` over the raw grid; `None` where either end
/// is missing.
fn annual_log_diff(
    raw: &[Option<f64>],
    country: &str,
    series: RawSeries,
    range: &QuarterRange,
) -> Result<Vec<Option<f64>>> {
    let logs: Vec<Option<f64>> = (0..raw.len())
        .map(|t| log_level(raw, t, country, series, range))
        .collect::<Result<_>>()?;
    Ok((0..raw.len())
        .map(|t| match (t.checked_sub(4).and_then(|s| logs[s]), logs[t]) {
            (Some(a), Some(b)) => Some(100.0 * (b - a)),
            _ => None,
        })
        .collect())
}

fn transform_one(
    raw: &RawPanel,
    country: &str,
    vars: &[VariableKind],
    opts: &TransformOptions,
) -> Result<BTreeMap<VariableKind, Vec<Option<f64>>>> {
    let range = &raw.range;
    let get = |c: &str, s: RawSeries| {
        raw.series(c, s)
            .ok_or_else(|| Error::MissingSeries(vec![format!("{c}/{s}")]))
    };
    let mut out = BTreeMap::new();
    for &v in vars {
        let series = match v {
            VariableKind::OutputGrowth => annual_log_diff(get(country, RawSeries::Gdp)?, country, RawSeries::Gdp, range)?,
            VariableKind::Inflation => annual_log_diff(get(country, RawSeries::Cpi)?, country, RawSeries::Cpi, range)?,
            VariableKind::EquityPriceGrowth => {
                annual_log_diff(get(country, RawSeries::Equity)?, country, RawSeries::Equity, range)?
            }
            VariableKind::ShortRate => {
                // Levels pass through, aligned with the growth rates.
                let r = get(country, RawSeries::Rate)?;
                (0..r.len()).map(|t| if t >= 4 { r[t] } else { None }).collect()
            }
            VariableKind::RealFxGrowth => {
                let fx = get(country, RawSeries::Fx)?;
                let cpi = get(country, RawSeries::Cpi)?;
                let cpi_n = get(&opts.numeraire, RawSeries::Cpi)?;
                let rer: Vec<Option<f64>> = (0..fx.len())
                    .map(|t| -> Result<Option<f64>> {
                        let lf = log_level(fx, t, country, RawSeries::Fx, range)?;
                        let lp = log_level(cpi, t, country, RawSeries::Cpi, range)?;
                        let ln = log_level(cpi_n, t, &opts.numeraire, RawSeries::Cpi, range)?;
                        Ok(match (lf, lp, ln) {
                            (Some(f), Some(p), Some(n)) => Some(match opts.fx {
                                FxConvention::DepreciationPositive => (f + n - p).exp(),
                                FxConvention::AppreciationPositive => (p - f - n).exp(),
                            }),
                            _ => None,
                        })
                    })
                    .collect::<Result<_>>()?;
                annual_log_diff(&rer, country, RawSeries::Fx, range)?
            }
        };
        out.insert(v, series);
    }
    Ok(out)
}

/// Turns raw levels into model variables and trims each country to the
/// block where all of its variables are observed. The first four quarters
/// of the grid are always lost to the annual differencing.
pub fn transform(raw: &RawPanel, countries: &[(String, Vec<VariableKind>)], opts: &TransformOptions) -> Result<Panel> {
    if raw.range.len() < 5 {
        return Err(Error::invariant(format!(
            "need at least 5 quarters of levels, panel covers {}",
            raw.range.len()
        )));
    }
    let out_range = QuarterRange::new(raw.range.first.offset(4), raw.range.last)?;
    let mut data = Vec::new();
    for (code, vars) in countries {
        let series = transform_one(raw, code, vars, opts)?;
        let n = raw.range.len();
        let avail: Vec<bool> = (0..n).map(|t| series.values().all(|s| s[t].is_some())).collect();
        let Some(t0) = avail.iter().position(|&a| a) else {
            return Err(Error::invariant(format!(
                "{code}: no quarter with all variables observed (need 5 consecutive quarters of levels)"
            )));
        };
        let t1 = avail.iter().rposition(|&a| a).expect("t0 exists");
        if let Some(g) = (t0..=t1).find(|&t| !avail[t]) {
            let var = series
                .iter()
                .find(|(_, s)| s[g].is_none())
                .map(|(v, _)| v.to_string())
                .unwrap_or_default();
            return Err(Error::Gap {
                country: code.clone(),
                variable: var,
                quarter: raw.range.at(g).to_string(),
            });
        }
        let crange = QuarterRange::new(raw.range.at(t0), raw.range.at(t1))?;
        let series = series
            .into_iter()
            .map(|(v, s)| (v, s[t0..=t1].iter().map(|x| x.expect("available")).collect()))
            .collect();
        data.push(CountryData {
            code: code.clone(),
            range: crange,
            series,
        });
    }
    Panel::new(out_range, None, data)
}

fn check_weight_sum(weights: impl Iterator<Item = f64>) -> Result<()> {
    let sum: f64 = weights.sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSum {
            sum,
            tol: WEIGHT_SUM_TOL,
        });
    }
    Ok(())
}

/// Replaces the aggregate's members by one country whose series are the
/// weighted averages of the members' transformed series, over the quarters
/// all members cover. The aggregate takes the place of its first member.
pub fn aggregate_euro_area(panel: &Panel, agg: &Aggregate, weights: &BTreeMap<String, f64>) -> Result<Panel> {
    let missing: Vec<String> = agg
        .members
        .iter()
        .filter(|m| panel.country(m).is_none())
        .map(|m| format!("{m} (aggregate member)"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSeries(missing));
    }
    let w: Vec<f64> = agg
        .members
        .iter()
        .map(|m| {
            weights
                .get(m)
                .copied()
                .ok_or_else(|| Error::Config(format!("no aggregation weight for {m}")))
        })
        .collect::<Result<_>>()?;
    check_weight_sum(w.iter().copied())?;

    let members: Vec<&CountryData> = agg.members.iter().map(|m| panel.country(m).expect("checked")).collect();
    let vars = members[0].variables();
    if let Some(m) = members.iter().find(|m| m.variables() != vars) {
        return Err(Error::invariant(format!(
            "aggregate member {} carries different variables than {}",
            m.code, members[0].code
        )));
    }
    let first = members.iter().map(|m| m.range.first).max().expect("members");
    let last = members.iter().map(|m| m.range.last).min().expect("members");
    let range = QuarterRange::new(first, last)?;
    let mut series = BTreeMap::new();
    for v in vars {
        let s: Vec<f64> = range
            .iter()
            .map(|q| {
                members
                    .iter()
                    .zip(&w)
                    .map(|(m, wi)| wi * m.get(v, q).expect("inside common range"))
                    .sum()
            })
            .collect();
        series.insert(v, s);
    }
    let ea = CountryData {
        code: agg.code.clone(),
        range,
        series,
    };
    let mut out = Vec::new();
    let mut placed = false;
    for c in panel.countries() {
        if agg.members.contains(&c.code) {
            if !placed {
                out.push(ea.clone());
                placed = true;
            }
        } else {
            out.push(c.clone());
        }
    }
    Panel::new(panel.range(), panel.training_split(), out)
}

/// Replaces the short rate by an alternative series (e.g. a shadow rate)
/// wherever the override has an observation.
pub fn override_short_rate(panel: &Panel, overrides: &RawPanel) -> Result<Panel> {
    let mut out = Vec::new();
    for c in panel.countries() {
        let mut c = c.clone();
        if let (Some(ov), Some(rate)) = (
            overrides.series(&c.code, RawSeries::Rate),
            c.series.get_mut(&VariableKind::ShortRate),
        ) {
            for (i, q) in c.range.iter().enumerate() {
                if let Some(Some(x)) = overrides.range.index_of(q).map(|j| ov[j]) {
                    rate[i] = x;
                }
            }
        }
        out.push(c);
    }
    Panel::new(panel.range(), panel.training_split(), out)
}

/// Which side of bilateral trade the weights are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeBasis {
    #[default]
    Total,
    Exports,
    Imports,
}

/// Bilateral trade flows: `exports[(i, j)]` is what `i` ships to `j`,
/// `imports[(i, j)]` what `i` buys from `j`, both averaged over `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeFlows {
    pub order: Vec<String>,
    pub exports: DMatrix<f64>,
    pub imports: DMatrix<f64>,
    pub window: Option<(i32, i32)>,
}

impl TradeFlows {
    pub fn new(order: Vec<String>, exports: DMatrix<f64>, imports: DMatrix<f64>, window: Option<(i32, i32)>) -> Result<Self> {
        let n = order.len();
        for (name, m) in [("exports", &exports), ("imports", &imports)] {
            if m.shape() != (n, n) {
                return Err(Error::invariant(format!("{name} matrix has shape {:?}", m.shape())));
            }
            if let Some(x) = m.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(Error::invariant(format!("{name} flow {x} is negative or non-finite")));
            }
            for i in 0..n {
                if m[(i, i)] != 0.0 {
                    return Err(Error::invariant(format!("{name} flow of {} with itself is nonzero", order[i])));
                }
            }
        }
        Ok(Self {
            order,
            exports,
            imports,
            window,
        })
    }

    /// Flow matrix under `basis`. Total trade is exports plus imports.
    pub fn flows(&self, basis: TradeBasis) -> DMatrix<f64> {
        match basis {
            TradeBasis::Total => &self.exports + &self.imports,
            TradeBasis::Exports => self.exports.clone(),
            TradeBasis::Imports => self.imports.clone(),
        }
    }

    /// Merges members into one unit; flows among members are dropped.
    pub fn aggregate(&self, agg: &Aggregate) -> Result<Self> {
        let idx = |c: &str| self.order.iter().position(|o| o == c);
        for m in &agg.members {
            if idx(m).is_none() {
                return Err(Error::MissingSeries(vec![format!("{m} (trade flows)")]));
            }
        }
        let mut order = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut placed = false;
        for (i, c) in self.order.iter().enumerate() {
            if agg.members.contains(c) {
                if !placed {
                    order.push(agg.code.clone());
                    groups.push(agg.members.iter().map(|m| idx(m).expect("checked")).collect());
                    placed = true;
                }
            } else {
                order.push(c.clone());
                groups.push(vec![i]);
            }
        }
        let n = order.len();
        let fold = |m: &DMatrix<f64>| {
            DMatrix::from_fn(n, n, |a, b| {
                if a == b {
                    return 0.0;
                }
                groups[a]
                    .iter()
                    .flat_map(|&i| groups[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| m[(i, j)])
                    .sum()
            })
        };
        TradeFlows::new(order, fold(&self.exports), fold(&self.imports), self.window)
    }

    /// Keeps only `order`, in that sequence.
    pub fn restrict(&self, order: &[String]) -> Result<Self> {
        let idx: Vec<usize> = order
            .iter()
            .map(|c| {
                self.order
                    .iter()
                    .position(|o| o == c)
                    .ok_or_else(|| Error::MissingSeries(vec![format!("{c} (trade flows)")]))
            })
            .collect::<Result<_>>()?;
        let n = idx.len();
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(n, n, |a, b| m[(idx[a], idx[b])]);
        TradeFlows::new(order.to_vec(), pick(&self.exports), pick(&self.imports), self.window)
    }
}

/// Reads `reporter,partner,exports,imports` rows. An optional first line
/// `# window: 1990-2016` records the averaging window.
pub fn load_trade_flows(path: &Path) -> Result<TradeFlows> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trade_flows(&text, path)
}

pub fn parse_trade_flows(text: &str, path: &Path) -> Result<TradeFlows> {
    let perr = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut window = None;
    let mut body = text;
    let mut offset = 0u64;
    if let Some(first) = text.lines().next() {
        if let Some(rest) = first.trim().strip_prefix('#') {
            if let Some(w) = rest.trim().strip_prefix("window:") {
                let (a, b) = w
                    .trim()
                    .split_once('-')
                    .ok_or_else(|| perr(1, format!("bad window {w:?}")))?;
                let a: i32 = a.trim().parse().map_err(|_| perr(1, format!("bad window {w:?}")))?;
                let b: i32 = b.trim().parse().map_err(|_| perr(1, format!("bad window {w:?}")))?;
                window = Some((a, b));
            }
            body = &text[first.len()..].trim_start_matches(['\r', '\n']);
            offset = 1;
        }
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2 + offset;
        let rec = rec?;
        if rec.len() != 4 {
            return Err(perr(line, format!("expected reporter,partner,exports,imports, got {} fields", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(line, format!("bad flow {s:?}")));
        let (e, m) = (num(&rec[2])?, num(&rec[3])?);
        if e < 0.0 || m < 0.0 || !e.is_finite() || !m.is_finite() {
            return Err(perr(line, "flows must be non-negative".into()));
        }
        if rec[0] == rec[1] && (e != 0.0 || m != 0.0) {
            return Err(perr(line, format!("nonzero flow of {} with itself", &rec[0])));
        }
        rows.push((rec[0].to_string(), rec[1].to_string(), e, m));
    }
    if rows.is_empty() {
        return Err(Error::NoRows(path.to_path_buf()));
    }
    let mut order: Vec<String> = Vec::new();
    for (a, b, _, _) in &rows {
        for c in [a, b] {
            if !order.contains(c) {
                order.push(c.clone());
            }
        }
    }
    let n = order.len();
    let pos = |c: &str| order.iter().position(|o| o == c).expect("collected");
    let mut ex = DMatrix::zeros(n, n);
    let mut im = DMatrix::zeros(n, n);
    for (a, b, e, m) in rows {
        let (i, j) = (pos(&a), pos(&b));
        ex[(i, j)] = e;
        im[(i, j)] = m;
    }
    TradeFlows::new(order, ex, im, window)
}

/// Row-normalises the flow matrix: `w_ij = flow_ij / Σ_j flow_ij`.
pub fn build_weight_matrix(flows: &TradeFlows, basis: TradeBasis) -> Result<WeightMatrix> {
    weight_matrix_from_flows(flows.order.clone(), &flows.flows(basis))
}

pub fn weight_matrix_from_flows(order: Vec<String>, flows: &DMatrix<f64>) -> Result<WeightMatrix> {
    let n = order.len();
    if flows.shape() != (n, n) {
        return Err(Error::invariant("flow matrix does not match the country order"));
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        if flows[(i, i)] != 0.0 {
            return Err(Error::invariant(format!("nonzero own flow for {}", order[i])));
        }
        let total: f64 = flows.row(i).sum();
        if total <= 0.0 {
            return Err(Error::IsolatedCountry(order[i].clone()));
        }
        for j in 0..n {
            w[(i, j)] = flows[(i, j)] / total;
        }
    }
    WeightMatrix::new(order, w)
}

/// Reads `country,weight` rows.
pub fn load_weights_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: "expected country,weight".into(),
            });
        }
        let w: f64 = rec[1].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("bad weight {:?}", &rec[1]),
        })?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("weight {w} must be non-negative"),
            });
        }
        out.insert(rec[0].to_string(), w);
    }
    if out.is_empty() {
        return Err(Error::NoRows(path.to_path_buf()));
    }
    Ok(out)
}

/// Foreign variables of one country over the window all its weighted
/// partners cover.
#[derive(Debug, Clone, PartialEq)]
pub struct ForeignSeries {
    pub range: QuarterRange,
    pub kinds: Vec<VariableKind>,
    /// `values[kind index][t]`
    pub values: Vec<Vec<f64>>,
}

impl ForeignSeries {
    pub fn get(&self, v: VariableKind) -> Option<&[f64]> {
        self.kinds.iter().position(|&k| k == v).map(|i| self.values[i].as_slice())
    }
}

/// `x*_it = Σ_j w_ij x_jt` for every foreign variable kind of `spec`.
pub fn foreign_variables(panel: &Panel, w: &WeightMatrix, spec: &CountrySpec) -> Result<ForeignSeries> {
    let i = w
        .index_of(spec.id())
        .ok_or_else(|| Error::invariant(format!("{} not in weight matrix", spec.id())))?;
    let partners: Vec<(usize, f64)> = (0..w.n())
        .filter(|&j| j != i && w.get(i, j) > 0.0)
        .map(|j| (j, w.get(i, j)))
        .collect();
    let mut first = panel.country(spec.id()).map(|c| c.range.first).unwrap_or(panel.range().first);
    let mut last = panel.country(spec.id()).map(|c| c.range.last).unwrap_or(panel.range().last);
    let mut datas = Vec::new();
    for &(j, wij) in &partners {
        let code = &w.order()[j];
        let c = panel.country(code).ok_or_else(|| Error::MissingPartnerVariable {
            country: spec.id().to_string(),
            partner: code.clone(),
            variable: "any".into(),
            weight: wij,
        })?;
        for &v in spec.foreign() {
            if !c.series.contains_key(&v) {
                return Err(Error::MissingPartnerVariable {
                    country: spec.id().to_string(),
                    partner: code.clone(),
                    variable: v.to_string(),
                    weight: wij,
                });
            }
        }
        first = first.max(c.range.first);
        last = last.min(c.range.last);
        datas.push((c, wij));
    }
    let range = QuarterRange::new(first, last).map_err(|_| {
        Error::invariant(format!("{}: partners share no common sample", spec.id()))
    })?;
    let values = spec
        .foreign()
        .iter()
        .map(|&v| {
            range
                .iter()
                .map(|q| datas.iter().map(|(c, wij)| wij * c.get(v, q).expect("in range")).sum())
                .collect()
        })
        .collect();
    Ok(ForeignSeries {
        range,
        kinds: spec.foreign().to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ROW_SUM_TOL;
    use proptest::prelude::*;

    fn q(s: &str) -> Quarter {
        s.parse().unwrap()
    }

    fn req(pairs: &[(&str, &[RawSeries])]) -> BTreeMap<String, BTreeSet<RawSeries>> {
        pairs
            .iter()
            .map(|(c, s)| (c.to_string(), s.iter().copied().collect()))
            .collect()
    }

    fn csv_rows(country: &str, var: &str, start: Quarter, vals: &[f64]) -> String {
        vals.iter()
            .enumerate()
            .map(|(i, v)| format!("{country},{var},{},{v}\n", start.offset(i as i64)))
            .collect()
    }

    #[test]
    fn empty_file_has_no_rows() {
        let err = parse_panel("", Path::new("x.csv"), &req(&[])).unwrap_err();
        assert!(err.to_string().contains("no rows"));
        let err = parse_panel("country,variable,quarter,value\n", Path::new("x.csv"), &req(&[])).unwrap_err();
        assert!(err.to_string().contains("no rows"));
    }

    #[test]
    fn one_country_eight_quarters() {
        let vals: Vec<f64> = (1..=8).map(|i| 100.0 + i as f64).collect();
        let text = format!("country,variable,quarter,value\n{}", csv_rows("AAA", "gdp", q("2001Q1"), &vals));
        let raw = parse_panel(&text, Path::new("x.csv"), &req(&[("AAA", &[RawSeries::Gdp])])).unwrap();
        assert_eq!(raw.range.len(), 8);
        assert_eq!(raw.range.first, q("2001Q1"));
        let back: Vec<f64> = raw.series("AAA", RawSeries::Gdp).unwrap().iter().map(|x| x.unwrap()).collect();
        assert_eq!(back, vals);
        assert!(raw.gaps.is_empty());
    }

    #[test]
    fn reports_missing_and_malformed() {
        let text = "country,variable,quarter,value\nAAA,gdp,2001Q1,1\nAAA,gdp,2001-2,1\n";
        let err = parse_panel(text, Path::new("x.csv"), &req(&[("AAA", &[RawSeries::Gdp])])).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let text = "country,variable,quarter,value\nAAA,gdp,2001Q1,1\n";
        let err = parse_panel(text, Path::new("x.csv"), &req(&[("AAA", &[RawSeries::Gdp, RawSeries::Cpi]), ("BBB", &[RawSeries::Gdp])])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("AAA/cpi") && msg.contains("BBB/gdp"), "{msg}");
        let dup = "country,variable,quarter,value\nAAA,gdp,2001Q1,1\nAAA,gdp,2001Q1,2\n";
        assert!(parse_panel(dup, Path::new("x.csv"), &req(&[("AAA", &[RawSeries::Gdp])])).is_err());
        let back = "country,variable,quarter,value\nAAA,gdp,2001Q2,1\nAAA,gdp,2001Q1,2\n";
        assert!(parse_panel(back, Path::new("x.csv"), &req(&[("AAA", &[RawSeries::Gdp])])).is_err());
    }

    fn raw_one(country: &str, series: &[(RawSeries, Vec<Option<f64>>)], start: Quarter) -> RawPanel {
        let n = series[0].1.len();
        let mut m = BTreeMap::new();
        m.insert(country.to_string(), series.iter().cloned().collect());
        RawPanel {
            range: QuarterRange::new(start, start.offset(n as i64 - 1)).unwrap(),
            countries: m,
            gaps: vec![],
        }
    }

    fn opts() -> TransformOptions {
        TransformOptions {
            numeraire: "USA".into(),
            fx: FxConvention::DepreciationPositive,
        }
    }

    #[test]
    fn constant_gdp_has_zero_growth() {
        let raw = raw_one("AAA", &[(RawSeries::Gdp, vec![Some(5.0); 12])], q("2000Q1"));
        let p = transform(&raw, &[("AAA".into(), vec![VariableKind::OutputGrowth])], &opts()).unwrap();
        let c = p.country("AAA").unwrap();
        assert_eq!(c.range.first, q("2001Q1"));
        assert!(c.series[&VariableKind::OutputGrowth].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn doubling_gdp_growth_is_100_ln2() {
        let vals: Vec<Option<f64>> = (0..8).map(|t| Some(2f64.powf(t as f64 / 4.0))).collect();
        let raw = raw_one("AAA", &[(RawSeries::Gdp, vals)], q("2000Q1"));
        let p = transform(&raw, &[("AAA".into(), vec![VariableKind::OutputGrowth])], &opts()).unwrap();
        for g in &p.country("AAA").unwrap().series[&VariableKind::OutputGrowth] {
            assert!((g - 69.31471805599453).abs() < 1e-10, "{g}");
        }
    }

    #[test]
    fn nonpositive_level_is_named() {
        let mut vals = vec![Some(1.0); 8];
        vals[5] = Some(0.0);
        let raw = raw_one("AAA", &[(RawSeries::Cpi, vals)], q("2000Q1"));
        let err = transform(&raw, &[("AAA".into(), vec![VariableKind::Inflation])], &opts()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("AAA") && msg.contains("cpi") && msg.contains("2001Q2"), "{msg}");
    }

    #[test]
    fn leading_missing_shortens_sample_and_inner_gap_errors() {
        let mut vals: Vec<Option<f64>> = (0..12).map(|t| Some(1.0 + t as f64)).collect();
        vals[0] = None;
        vals[1] = None;
        let raw = raw_one("AAA", &[(RawSeries::Gdp, vals.clone())], q("2000Q1"));
        let p = transform(&raw, &[("AAA".into(), vec![VariableKind::OutputGrowth])], &opts()).unwrap();
        assert_eq!(p.country("AAA").unwrap().range.first, q("2001Q3"));
        vals[8] = None;
        let raw = raw_one("AAA", &[(RawSeries::Gdp, vals)], q("2000Q1"));
        assert!(matches!(
            transform(&raw, &[("AAA".into(), vec![VariableKind::OutputGrowth])], &opts()),
            Err(Error::Gap { .. })
        ));
    }

    #[test]
    fn real_exchange_rate_growth() {
        let n = 9;
        let mut countries = BTreeMap::new();
        let us_cpi: Vec<Option<f64>> = (0..n).map(|t| Some(100.0 * (0.01 * t as f64).exp())).collect();
        let cpi: Vec<Option<f64>> = (0..n).map(|t| Some(100.0 * (0.03 * t as f64).exp())).collect();
        let fx: Vec<Option<f64>> = (0..n).map(|t| Some(2.0 * (0.05 * t as f64).exp())).collect();
        countries.insert("USA".to_string(), [(RawSeries::Cpi, us_cpi)].into_iter().collect());
        countries.insert("AAA".to_string(), [(RawSeries::Cpi, cpi), (RawSeries::Fx, fx)].into_iter().collect());
        let raw = RawPanel {
            range: QuarterRange::new(q("2000Q1"), q("2002Q1")).unwrap(),
            countries,
            gaps: vec![],
        };
        let p = transform(&raw, &[("AAA".into(), vec![VariableKind::RealFxGrowth])], &opts()).unwrap();
        // 4 quarters × (0.05 + 0.01 - 0.03) × 100 = 12
        for g in &p.country("AAA").unwrap().series[&VariableKind::RealFxGrowth] {
            assert!((g - 12.0).abs() < 1e-10);
        }
        let flip = TransformOptions {
            fx: FxConvention::AppreciationPositive,
            ..opts()
        };
        let p = transform(&raw, &[("AAA".into(), vec![VariableKind::RealFxGrowth])], &flip).unwrap();
        assert!((p.country("AAA").unwrap().series[&VariableKind::RealFxGrowth][0] + 12.0).abs() < 1e-10);
    }

    fn panel_of(codes: &[&str], vals: &[Vec<f64>]) -> Panel {
        let range = QuarterRange::new(q("2000Q1"), q("2000Q1").offset(vals[0].len() as i64 - 1)).unwrap();
        let countries = codes
            .iter()
            .zip(vals)
            .map(|(c, v)| CountryData {
                code: c.to_string(),
                range,
                series: VariableKind::ALL[..3].iter().map(|&k| (k, v.clone())).collect(),
            })
            .collect();
        Panel::new(range, None, countries).unwrap()
    }

    #[test]
    fn euro_aggregation_cases() {
        let agg = Aggregate {
            code: "EA".into(),
            members: vec!["M1".into(), "M2".into()],
        };
        let p = panel_of(&["X", "M1", "M2"], &[vec![9.0; 3], vec![1.0; 3], vec![3.0; 3]]);
        let w: BTreeMap<String, f64> = [("M1".into(), 0.5), ("M2".into(), 0.5)].into();
        let out = aggregate_euro_area(&p, &agg, &w).unwrap();
        assert_eq!(out.codes(), vec!["X", "EA"]);
        assert!(out.country("EA").unwrap().series.values().all(|s| s.iter().all(|&x| x == 2.0)));

        let w: BTreeMap<String, f64> = [("M1".into(), 1.0), ("M2".into(), 0.0)].into();
        let out = aggregate_euro_area(&p, &agg, &w).unwrap();
        assert_eq!(out.country("EA").unwrap().series, p.country("M1").unwrap().series);

        let w: BTreeMap<String, f64> = [("M1".into(), 0.5), ("M2".into(), 0.6)].into();
        assert!(matches!(aggregate_euro_area(&p, &agg, &w), Err(Error::WeightSum { .. })));
    }

    #[test]
    fn eight_identical_members() {
        let agg = Aggregate::euro_area();
        let vals: Vec<Vec<f64>> = (0..8).map(|_| vec![1.5, -0.5, 2.25]).collect();
        let codes: Vec<&str> = agg.members.iter().map(String::as_str).collect();
        let p = panel_of(&codes, &vals);
        let w: BTreeMap<String, f64> = agg.members.iter().map(|m| (m.clone(), 0.125)).collect();
        let out = aggregate_euro_area(&p, &agg, &w).unwrap();
        assert_eq!(out.countries().len(), 1);
        for s in out.country("EA").unwrap().series.values() {
            assert_eq!(s, &vec![1.5, -0.5, 2.25]);
        }
    }

    #[test]
    fn weight_matrix_cases() {
        let order: Vec<String> = ["A", "B"].map(String::from).to_vec();
        let w = weight_matrix_from_flows(order, &DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 7.0, 0.0])).unwrap();
        assert_eq!(w.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let order: Vec<String> = ["A", "B", "C"].map(String::from).to_vec();
        let f = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 3.0, 2.0, 0.0, 2.0, 1.0, 1.0, 0.0]);
        let w = weight_matrix_from_flows(order.clone(), &f).unwrap();
        assert_eq!(w.matrix().row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.25, 0.75]);

        let f = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(weight_matrix_from_flows(order, &f), Err(Error::IsolatedCountry(c)) if c == "B"));
    }

    #[test]
    fn trade_file_parse_and_aggregate() {
        let text = "# window: 1990-2016\nreporter,partner,exports,imports\nA,B,1,2\nA,C,3,0\nB,A,2,1\nB,C,1,1\nC,A,0,3\nC,B,1,1\n";
        let t = parse_trade_flows(text, Path::new("t.csv")).unwrap();
        assert_eq!(t.window, Some((1990, 2016)));
        let w = build_weight_matrix(&t, TradeBasis::Total).unwrap();
        assert_eq!(w.get(0, 1), 0.5);
        let we = build_weight_matrix(&t, TradeBasis::Exports).unwrap();
        assert_eq!(we.get(0, 2), 0.75);
        let agg = t
            .aggregate(&Aggregate {
                code: "BC".into(),
                members: vec!["B".into(), "C".into()],
            })
            .unwrap();
        assert_eq!(agg.order, vec!["A", "BC"]);
        assert_eq!(agg.exports[(0, 1)], 4.0);
        assert_eq!(agg.exports[(1, 0)], 2.0);
        let bad = "reporter,partner,exports,imports\nA,B,-1,2\n";
        assert!(parse_trade_flows(bad, Path::new("t.csv")).is_err());
    }

    fn three_world(vals: [f64; 3]) -> (Panel, WeightMatrix) {
        let p = panel_of(&["A", "B", "C"], &[vec![vals[0]; 4], vec![vals[1]; 4], vec![vals[2]; 4]]);
        let f = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let w = weight_matrix_from_flows(vec!["A".into(), "B".into(), "C".into()], &f).unwrap();
        (p, w)
    }

    fn partner_spec(id: &str) -> CountrySpec {
        CountrySpec::new(
            id,
            vec![VariableKind::ShortRate, VariableKind::OutputGrowth, VariableKind::Inflation],
            vec![VariableKind::ShortRate, VariableKind::OutputGrowth, VariableKind::Inflation],
            Default::default(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn foreign_variable_cases() {
        let (p, w) = three_world([0.0, 2.0, 4.0]);
        let fa = foreign_variables(&p, &w, &partner_spec("A")).unwrap();
        assert!(fa.values.iter().all(|s| s.iter().all(|&x| x == 3.0)));
        let fb = foreign_variables(&p, &w, &partner_spec("B")).unwrap();
        assert!(fb.values.iter().all(|s| s.iter().all(|&x| x == 4.0)));
    }

    #[test]
    fn origin_foreign_set_excludes_rate() {
        let us = CountrySpec::origin("USA", Default::default(), false).unwrap();
        assert!(!us.foreign().contains(&VariableKind::ShortRate));
        let range = QuarterRange::new(q("2000Q1"), q("2000Q4")).unwrap();
        let mk = |code: &str, vars: &[VariableKind], x: f64| CountryData {
            code: code.into(),
            range,
            series: vars.iter().map(|&v| (v, vec![x; 4])).collect(),
        };
        let p = Panel::new(
            range,
            None,
            vec![
                mk("USA", us.domestic(), 1.0),
                mk("A", &VariableKind::ALL[..4], 2.0),
                mk("B", &VariableKind::ALL[..3], 5.0),
            ],
        )
        .unwrap();
        let f = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let w = weight_matrix_from_flows(vec!["USA".into(), "A".into(), "B".into()], &f).unwrap();
        let fx = foreign_variables(&p, &w, &us).unwrap();
        assert_eq!(fx.kinds, us.foreign());
        assert_eq!(fx.get(VariableKind::RealFxGrowth).unwrap(), &[2.0; 4]);
        // B has no exchange rate; putting weight on it is an error naming B.
        let f = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let w = weight_matrix_from_flows(vec!["USA".into(), "A".into(), "B".into()], &f).unwrap();
        let err = foreign_variables(&p, &w, &us).unwrap_err();
        assert!(matches!(err, Error::MissingPartnerVariable { ref partner, .. } if partner == "B"));
    }

    proptest! {
        #[test]
        fn weight_rows_are_stochastic(flows in proptest::collection::vec(0.01f64..100.0, 16)) {
            let n = 4;
            let mut f = DMatrix::from_vec(n, n, flows);
            for i in 0..n { f[(i, i)] = 0.0; }
            let order: Vec<String> = (0..n).map(|i| format!("C{i}")).collect();
            let w = weight_matrix_from_flows(order, &f).unwrap();
            for i in 0..n {
                prop_assert_eq!(w.get(i, i), 0.0);
                prop_assert!((w.matrix().row(i).sum() - 1.0).abs() <= ROW_SUM_TOL);
            }
        }

        #[test]
        fn foreign_variables_are_linear(
            a in proptest::collection::vec(-5.0f64..5.0, 3),
            b in proptest::collection::vec(-5.0f64..5.0, 3),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let (pa, w) = three_world([a[0], a[1], a[2]]);
            let (pb, _) = three_world([b[0], b[1], b[2]]);
            let combo = [0, 1, 2].map(|i| alpha * a[i] + beta * b[i]);
            let (pc, _) = three_world(combo);
            let spec = partner_spec("A");
            let fa = foreign_variables(&pa, &w, &spec).unwrap();
            let fb = foreign_variables(&pb, &w, &spec).unwrap();
            let fc = foreign_variables(&pc, &w, &spec).unwrap();
            for k in 0..3 {
                for t in 0..4 {
                    let lin = alpha * fa.values[k][t] + beta * fb.values[k][t];
                    prop_assert!((fc.values[k][t] - lin).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn aggregation_is_weighted_mean(
            x1 in proptest::collection::vec(-10.0f64..10.0, 5),
            x2 in proptest::collection::vec(-10.0f64..10.0, 5),
            w1 in 0.0f64..1.0,
        ) {
            let agg = Aggregate { code: "EA".into(), members: vec!["M1".into(), "M2".into()] };
            let p = panel_of(&["M1", "M2"], &[x1.clone(), x2.clone()]);
            let w: BTreeMap<String, f64> = [("M1".into(), w1), ("M2".into(), 1.0 - w1)].into();
            let out = aggregate_euro_area(&p, &agg, &w).unwrap();
            for s in out.country("EA").unwrap().series.values() {
                for t in 0..5 {
                    prop_assert!((s[t] - (w1 * x1[t] + (1.0 - w1) * x2[t])).abs() < 1e-12);
                }
            }
        }
    }
}
