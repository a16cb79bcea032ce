use gvarsv_core::domain::{
    CountryParameters, CountrySet, CountrySpec, IdentificationMatrix, LagOrders, VariableKind,
    VolatilityParameters, WeightMatrix,
};
use gvarsv_core::varx::FIXED_Q;
use gvarsv_core::Result;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use VariableKind::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueCountry {
    pub params: CountryParameters,
    pub vol: VolatilityParameters,
}

/// A world with known parameters. `t` is the number of periods kept after
/// the generator burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueWorld {
    pub set: CountrySet,
    pub weights: WeightMatrix,
    pub countries: Vec<TrueCountry>,
    pub seed: u64,
    pub t: usize,
    pub burn: usize,
}

impl TrueWorld {
    pub fn specs(&self) -> &[CountrySpec] {
        self.set.specs()
    }

    pub fn n(&self) -> usize {
        self.countries.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.order() != self.set.ids().as_slice() {
            return Err(gvarsv_core::Error::Invariant("weight order differs from the country set".into()));
        }
        for (c, s) in self.countries.iter().zip(self.specs()) {
            c.params.validate(s)?;
            c.vol.validate(s)?;
        }
        Ok(())
    }
}

pub fn lags1() -> LagOrders {
    LagOrders::new(1, 1, 1, 1).expect("valid lags")
}

pub fn origin_spec(id: &str, lags: LagOrders) -> CountrySpec {
    CountrySpec::new(id, vec![ShortRate, OutputGrowth, Inflation], vec![OutputGrowth, Inflation], lags, true)
        .expect("valid origin spec")
}

pub fn partner_spec(id: &str, lags: LagOrders) -> CountrySpec {
    CountrySpec::new(id, vec![ShortRate, OutputGrowth, Inflation], vec![ShortRate, OutputGrowth, Inflation], lags, false)
        .expect("valid partner spec")
}

/// Persistent, sizeable volatility swings keep the latent paths identified
/// at `T = 400`.
const VOL_PERSISTENCE: f64 = 0.95;
const VOL_Q: f64 = 0.1;

fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

fn ident(v: &[f64]) -> IdentificationMatrix {
    IdentificationMatrix::new(m(3, 3, v), vec![ShortRate, OutputGrowth, Inflation]).expect("unit lower triangular")
}

/// Volatility block with mean log variance `target` when `x = 0`.
fn vol(target: [f64; 3], persistence: f64, q: f64, feedback: f64) -> VolatilityParameters {
    let ups = DMatrix::from_fn(3, 3, |i, j| if i == j { persistence } else { 0.0 });
    let c = DVector::from_fn(3, |i, _| {
        target[i] - (0..3).map(|j| ups[(i, j)] * target[j]).sum::<f64>()
    });
    VolatilityParameters {
        intercept: c,
        vol_lags: vec![ups],
        macro_feedback: vec![DMatrix::from_fn(3, 3, |i, j| if i == j { feedback } else { 0.0 })],
        innovation_var: DVector::from_element(3, q),
    }
}

fn canonical_countries(lambda0: bool) -> Vec<TrueCountry> {
    let l0 = |v: &[f64], c: usize| if lambda0 { m(3, c, v) } else { DMatrix::zeros(3, c) };
    let us = TrueCountry {
        params: CountryParameters {
            intercept: DVector::from_vec(vec![0.3, 0.8, 0.5]),
            domestic: vec![m(3, 3, &[0.7, 0.10, 0.15, -0.10, 0.4, 0.0, 0.0, 0.10, 0.5])],
            foreign: vec![
                l0(&[0.0, 0.0, 0.2, 0.0, 0.0, 0.1], 2),
                m(3, 2, &[0.05, 0.05, 0.15, 0.0, 0.0, 0.10]),
            ],
            vol_in_mean: vec![
                m(3, 3, &[0.10, 0.0, 0.0, -0.20, -0.10, 0.0, 0.0, 0.0, 0.05]),
                m(3, 3, &[0.05, 0.0, 0.0, -0.05, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ],
            ident: ident(&[1.0, 0.0, 0.0, -0.3, 1.0, 0.0, -0.2, 0.2, 1.0]),
        },
        vol: vol([-1.0, -0.5, -1.2], VOL_PERSISTENCE, VOL_Q, 0.02),
    };
    let a = TrueCountry {
        params: CountryParameters {
            intercept: DVector::from_vec(vec![0.5, 1.0, 0.6]),
            domestic: vec![m(3, 3, &[0.6, 0.05, 0.10, -0.05, 0.35, 0.05, 0.0, 0.05, 0.45])],
            foreign: vec![
                l0(&[0.3, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.1], 3),
                m(3, 3, &[0.15, 0.0, 0.0, -0.10, 0.15, 0.0, 0.0, 0.05, 0.10]),
            ],
            vol_in_mean: vec![
                m(3, 3, &[0.05, 0.0, 0.0, -0.10, -0.05, 0.0, 0.0, 0.0, 0.05]),
                DMatrix::zeros(3, 3),
            ],
            ident: ident(&[1.0, 0.0, 0.0, 0.1, 1.0, 0.0, 0.1, 0.3, 1.0]),
        },
        vol: vol([-0.8, -0.3, -1.0], VOL_PERSISTENCE, VOL_Q, 0.01),
    };
    let b = TrueCountry {
        params: CountryParameters {
            intercept: DVector::from_vec(vec![0.4, 0.6, 0.7]),
            domestic: vec![m(3, 3, &[0.5, 0.0, 0.10, 0.05, 0.45, -0.05, 0.05, 0.10, 0.4])],
            foreign: vec![
                l0(&[0.2, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.2], 3),
                m(3, 3, &[0.10, 0.05, 0.0, 0.0, 0.10, 0.0, 0.05, 0.0, 0.15]),
            ],
            vol_in_mean: vec![
                m(3, 3, &[0.0, 0.0, 0.0, -0.05, 0.05, 0.0, 0.0, 0.0, -0.05]),
                DMatrix::zeros(3, 3),
            ],
            ident: ident(&[1.0, 0.0, 0.0, -0.2, 1.0, 0.0, 0.1, 0.1, 1.0]),
        },
        vol: vol([-0.6, -0.7, -0.9], VOL_PERSISTENCE, VOL_Q, 0.0),
    };
    vec![us, a, b]
}

fn three_country_weights() -> WeightMatrix {
    WeightMatrix::new(
        vec!["USA".into(), "AAA".into(), "BBB".into()],
        m(3, 3, &[0.0, 0.6, 0.4, 0.7, 0.0, 0.3, 0.5, 0.5, 0.0]),
    )
    .expect("valid weights")
}

fn three_country_set(lags: LagOrders) -> CountrySet {
    CountrySet::new(vec![origin_spec("USA", lags), partner_spec("AAA", lags), partner_spec("BBB", lags)])
        .expect("valid set")
}

/// Three countries with three variables each, `T = 400` estimation periods
/// plus a 60-quarter training window. Contemporaneous foreign loadings are
/// zero so that foreign variables are weakly exogenous in each country.
pub fn canonical_world() -> TrueWorld {
    TrueWorld {
        set: three_country_set(lags1()),
        weights: three_country_weights(),
        countries: canonical_countries(false),
        seed: 20_240_501,
        t: 461,
        burn: 300,
    }
}

/// Like the canonical world but with contemporaneous spillovers.
pub fn spillover_world() -> TrueWorld {
    TrueWorld {
        countries: canonical_countries(true),
        ..canonical_world()
    }
}

/// Shuts every volatility channel: `Ψ = Ξ = 0`, `Υ = 0`, `Q → 0`.
pub fn linearize(mut world: TrueWorld) -> TrueWorld {
    for c in &mut world.countries {
        for p in &mut c.params.vol_in_mean {
            p.fill(0.0);
        }
        let target = c.vol.mean_log_vol(&DVector::zeros(3)).expect("stationary volatility");
        for u in &mut c.vol.vol_lags {
            u.fill(0.0);
        }
        for x in &mut c.vol.macro_feedback {
            x.fill(0.0);
        }
        c.vol.intercept = target;
        c.vol.innovation_var.fill(FIXED_Q);
    }
    world
}

/// Two countries where the origin ignores its partner entirely.
pub fn no_spillback_world() -> TrueWorld {
    let lags = lags1();
    let mut cs = canonical_countries(true);
    cs.truncate(2);
    for l in &mut cs[0].params.foreign {
        l.fill(0.0);
    }
    TrueWorld {
        set: CountrySet::new(vec![origin_spec("USA", lags), partner_spec("AAA", lags)]).expect("valid set"),
        weights: WeightMatrix::new(vec!["USA".into(), "AAA".into()], m(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .expect("valid weights"),
        countries: cs,
        seed: 7,
        t: 200,
        burn: 200,
    }
}

/// US → AAA → BBB: BBB trades only with AAA, so it has no direct exposure.
pub fn chain_world() -> TrueWorld {
    TrueWorld {
        weights: WeightMatrix::new(
            vec!["USA".into(), "AAA".into(), "BBB".into()],
            m(3, 3, &[0.0, 0.5, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        )
        .expect("valid weights"),
        seed: 11,
        t: 200,
        burn: 200,
        ..spillover_world()
    }
}

/// One country; its foreign block sees no partner.
pub fn single_country_world() -> TrueWorld {
    let lags = lags1();
    let mut us = canonical_countries(true).remove(0);
    for l in &mut us.params.foreign {
        l.fill(0.0);
    }
    let spec = CountrySpec::new("USA", vec![ShortRate, OutputGrowth, Inflation], vec![], lags, true)
        .expect("valid spec");
    let params = CountryParameters {
        foreign: vec![DMatrix::zeros(3, 0); 2],
        ..us.params
    };
    TrueWorld {
        set: CountrySet::new(vec![spec]).expect("valid set"),
        weights: WeightMatrix::single("USA"),
        countries: vec![TrueCountry { params, vol: us.vol }],
        seed: 3,
        t: 200,
        burn: 200,
    }
}
