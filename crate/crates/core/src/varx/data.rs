use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{
    CountryParameters, CountrySpec, IdentificationMatrix, Panel, QuarterRange, WeightMatrix,
};
use crate::error::{Error, Result};
use crate::ingest::foreign_variables;

/// Domestic and foreign observations of one country over a window. The
/// first `lags.max_x_lag()` periods serve as initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct CountrySample {
    pub spec: CountrySpec,
    pub range: Option<QuarterRange>,
    pub x: Vec<DVector<f64>>,
    pub xstar: Vec<DVector<f64>>,
}

impl CountrySample {
    pub fn new(spec: CountrySpec, x: Vec<DVector<f64>>, xstar: Vec<DVector<f64>>) -> Result<Self> {
        if x.len() != xstar.len() {
            return Err(Error::invariant("domestic and foreign samples differ in length"));
        }
        if x.iter().any(|v| v.len() != spec.k()) || xstar.iter().any(|v| v.len() != spec.k_star()) {
            return Err(Error::invariant(format!("{}: observation dimensions do not match the spec", spec.id())));
        }
        if x.len() <= spec.lags().max_x_lag() {
            return Err(Error::invariant(format!("{}: sample shorter than the lag order", spec.id())));
        }
        Ok(Self {
            spec,
            range: None,
            x,
            xstar,
        })
    }

    /// Pulls the window from the panel and builds the foreign variables.
    pub fn from_panel(panel: &Panel, w: &WeightMatrix, spec: &CountrySpec, window: QuarterRange) -> Result<Self> {
        let c = panel
            .country(spec.id())
            .ok_or_else(|| Error::MissingSeries(vec![spec.id().to_string()]))?;
        let fs = foreign_variables(panel, w, spec)?;
        let covered = |r: &QuarterRange| r.contains(window.first) && r.contains(window.last);
        if !covered(&c.range) || !covered(&fs.range) {
            return Err(Error::invariant(format!(
                "{}: window {window} not covered (domestic {}, foreign {})",
                spec.id(),
                c.range,
                fs.range
            )));
        }
        let mut x = Vec::with_capacity(window.len());
        let mut xstar = Vec::with_capacity(window.len());
        for q in window.iter() {
            let dom: Vec<f64> = spec
                .domestic()
                .iter()
                .map(|&v| {
                    c.get(v, q)
                        .ok_or_else(|| Error::MissingSeries(vec![format!("{}/{v}", spec.id())]))
                })
                .collect::<Result<_>>()?;
            x.push(DVector::from_vec(dom));
            let i = fs.range.index_of(q).expect("covered");
            xstar.push(DVector::from_iterator(spec.k_star(), fs.values.iter().map(|s| s[i])));
        }
        let mut s = CountrySample::new(spec.clone(), x, xstar)?;
        s.range = Some(window);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Number of periods with a full set of lags.
    pub fn n_obs(&self) -> usize {
        self.len() - self.spec.lags().max_x_lag()
    }

    /// Data index of estimation period `i`.
    pub fn t_of(&self, i: usize) -> usize {
        i + self.spec.lags().max_x_lag()
    }
}

/// Column layout of the level-equation regressors
/// `z_t = [1, x_{t-1..t-p}, x*_{t..t-q}, h_{t..t-s}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorLayout {
    pub k: usize,
    pub k_star: usize,
    pub p: usize,
    pub q: usize,
    pub s: usize,
    pub vol_in_mean: bool,
}

impl RegressorLayout {
    pub fn new(spec: &CountrySpec, vol_in_mean: bool) -> Self {
        let l = spec.lags();
        Self {
            k: spec.k(),
            k_star: spec.k_star(),
            p: l.p,
            q: l.q,
            s: l.s,
            vol_in_mean,
        }
    }

    /// Regressors not involving log volatility.
    pub fn n_x(&self) -> usize {
        1 + self.p * self.k + (self.q + 1) * self.k_star
    }

    pub fn n_z(&self) -> usize {
        self.n_x() + if self.vol_in_mean { (self.s + 1) * self.k } else { 0 }
    }

    pub fn n_beta(&self) -> usize {
        self.k * self.n_z()
    }

    /// Column where `Ψ_l` starts.
    pub fn psi_col(&self, l: usize) -> usize {
        self.n_x() + l * self.k
    }

    pub fn fill_x(&self, sample: &CountrySample, t: usize, out: &mut [f64]) {
        out[0] = 1.0;
        let mut c = 1;
        for l in 1..=self.p {
            out[c..c + self.k].copy_from_slice(sample.x[t - l].as_slice());
            c += self.k;
        }
        for l in 0..=self.q {
            out[c..c + self.k_star].copy_from_slice(sample.xstar[t - l].as_slice());
            c += self.k_star;
        }
    }

    /// `n_obs × n_x` matrix of the volatility-free regressors.
    pub fn x_design(&self, sample: &CountrySample) -> DMatrix<f64> {
        let n = sample.n_obs();
        let mut z = DMatrix::zeros(n, self.n_x());
        let mut row = vec![0.0; self.n_x()];
        for i in 0..n {
            self.fill_x(sample, sample.t_of(i), &mut row);
            for (c, v) in row.iter().enumerate() {
                z[(i, c)] = *v;
            }
        }
        z
    }

    /// Coefficient matrix `B` (k × n_z, row j = equation j) from the
    /// equation-major coefficient vector.
    pub fn b_matrix(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let nz = self.n_z();
        DMatrix::from_fn(self.k, nz, |j, r| beta[j * nz + r])
    }

    pub fn to_params(&self, beta: &DVector<f64>, ident: IdentificationMatrix) -> CountryParameters {
        let b = self.b_matrix(beta);
        let (k, ks) = (self.k, self.k_star);
        let intercept = b.column(0).into_owned();
        let domestic = (0..self.p)
            .map(|l| b.columns(1 + l * k, k).into_owned())
            .collect();
        let f0 = 1 + self.p * k;
        let foreign = (0..=self.q)
            .map(|l| b.columns(f0 + l * ks, ks).into_owned())
            .collect();
        let vol_in_mean = (0..=self.s)
            .map(|l| {
                if self.vol_in_mean {
                    b.columns(self.psi_col(l), k).into_owned()
                } else {
                    DMatrix::zeros(k, k)
                }
            })
            .collect();
        CountryParameters {
            intercept,
            domestic,
            foreign,
            vol_in_mean,
            ident,
        }
    }

    pub fn from_params(&self, params: &CountryParameters) -> DVector<f64> {
        let nz = self.n_z();
        let (k, ks) = (self.k, self.k_star);
        let mut b = DMatrix::zeros(k, nz);
        b.set_column(0, &params.intercept);
        for l in 0..self.p {
            b.columns_mut(1 + l * k, k).copy_from(&params.domestic[l]);
        }
        let f0 = 1 + self.p * k;
        for l in 0..=self.q {
            b.columns_mut(f0 + l * ks, ks).copy_from(&params.foreign[l]);
        }
        if self.vol_in_mean {
            for l in 0..=self.s {
                b.columns_mut(self.psi_col(l), k).copy_from(&params.vol_in_mean[l]);
            }
        }
        DVector::from_fn(k * nz, |i, _| b[(i / nz, i % nz)])
    }

    /// Indices into the coefficient vector that belong to `Ψ`.
    pub fn psi_indices(&self) -> Vec<usize> {
        if !self.vol_in_mean {
            return Vec::new();
        }
        let nz = self.n_z();
        (0..self.k)
            .flat_map(|j| (self.n_x()..nz).map(move |r| j * nz + r))
            .collect()
    }
}

/// Column layout of the volatility-equation regressors
/// `w_τ = [1, h_{τ-1..τ-m}, x_{t-1..t-q}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolLayout {
    pub k: usize,
    pub m: usize,
    pub q: usize,
}

impl VolLayout {
    pub fn new(spec: &CountrySpec) -> Self {
        Self {
            k: spec.k(),
            m: spec.lags().m,
            q: spec.lags().q,
        }
    }

    pub fn n_w(&self) -> usize {
        1 + self.m * self.k + self.q * self.k
    }
}
