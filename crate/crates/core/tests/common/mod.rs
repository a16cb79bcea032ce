#![allow(dead_code)]

use gvarsv_core::domain::{CountrySpec, LagOrders, VariableKind};
use gvarsv_core::rng::StreamRng;
use gvarsv_core::varx::{build_priors, CountrySample, PriorOptions, Priors};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use VariableKind::*;

pub fn lags() -> LagOrders {
    LagOrders::new(1, 1, 1, 1).unwrap()
}

pub fn origin() -> CountrySpec {
    CountrySpec::new("USA", vec![ShortRate, OutputGrowth, Inflation], vec![OutputGrowth, Inflation], lags(), true).unwrap()
}

/// Stationary VARX(1) data with mild heteroskedasticity and an AR(1)
/// foreign block. `u = Ã ε` with a rate shock that lowers output and
/// inflation.
pub fn sample(spec: &CountrySpec, n: usize, seed: u64) -> CountrySample {
    let mut rng = StreamRng::seed_from_u64(seed);
    let k = spec.k();
    let ks = spec.k_star();
    let phi = DMatrix::from_fn(k, k, |i, j| if i == j { 0.5 } else { 0.05 });
    let at = DMatrix::from_fn(k, k, |i, j| match (i, j) {
        _ if i == j => 1.0,
        (_, 0) if i > 0 => -0.4,
        _ if j < i => 0.1,
        _ => 0.0,
    });
    let mut x = vec![DVector::zeros(k)];
    let mut xs = vec![DVector::zeros(ks)];
    let mut h = -0.5;
    for t in 1..n {
        h = -0.5 + 0.9 * (h + 0.5) + 0.2 * rng.sample::<f64, _>(StandardNormal);
        let eps = DVector::from_fn(k, |_, _| (0.5 * h as f64).exp() * rng.sample::<f64, _>(StandardNormal));
        let star = DVector::from_fn(ks, |r, _| 0.6 * xs[t - 1][r] + rng.sample::<f64, _>(StandardNormal));
        let lam = DMatrix::from_element(k, ks, 0.1);
        let next = DVector::from_element(k, 0.3) + &phi * &x[t - 1] + &lam * &xs[t - 1] + &at * eps;
        x.push(next);
        xs.push(star);
    }
    CountrySample::new(spec.clone(), x, xs).unwrap()
}

/// Training and estimation samples cut from one series.
pub fn split(spec: &CountrySpec, n_train: usize, n_est: usize, seed: u64) -> (CountrySample, CountrySample) {
    let full = sample(spec, n_train + n_est, seed);
    let lx = spec.lags().max_x_lag();
    let train = CountrySample::new(spec.clone(), full.x[..n_train].to_vec(), full.xstar[..n_train].to_vec()).unwrap();
    let est = CountrySample::new(spec.clone(), full.x[n_train - lx..].to_vec(), full.xstar[n_train - lx..].to_vec()).unwrap();
    (train, est)
}

pub fn priors(train: &CountrySample) -> Priors {
    build_priors(train, true, &PriorOptions::default()).unwrap()
}

use gvarsv_core::domain::{CountryParameters, CountrySet, IdentificationMatrix, VolatilityParameters, WeightMatrix};
use gvarsv_core::stack::{build_links, stack_global, CountryBlock, GlobalModel, StartState};

pub fn partner(id: &str) -> CountrySpec {
    CountrySpec::new(id, vec![ShortRate, OutputGrowth, Inflation], vec![ShortRate, OutputGrowth, Inflation], lags(), false).unwrap()
}

/// Deterministic block with coefficients scaled by `tag` so blocks differ.
pub fn block(spec: &CountrySpec, tag: f64) -> CountryBlock {
    let (k, ks) = (spec.k(), spec.k_star());
    let at = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else if j < i { -0.2 * tag } else { 0.0 });
    CountryBlock {
        spec: spec.clone(),
        params: CountryParameters {
            intercept: DVector::from_fn(k, |i, _| 0.1 * (i as f64 + tag)),
            domestic: vec![DMatrix::from_fn(k, k, |i, j| if i == j { 0.4 + 0.05 * tag } else { 0.03 })],
            foreign: vec![DMatrix::from_element(k, ks, 0.05 * tag), DMatrix::from_element(k, ks, 0.04)],
            vol_in_mean: vec![DMatrix::from_element(k, k, 0.02), DMatrix::zeros(k, k)],
            ident: IdentificationMatrix::new(at, spec.domestic().to_vec()).unwrap(),
        },
        vol: VolatilityParameters {
            intercept: DVector::from_element(k, -0.1),
            vol_lags: vec![DMatrix::from_diagonal_element(k, k, 0.8)],
            macro_feedback: vec![DMatrix::from_element(k, k, 0.01)],
            innovation_var: DVector::from_element(k, 0.05),
        },
    }
}

pub fn two_country(order_us_first: bool) -> GlobalModel {
    let us = origin();
    let aa = partner("AAA");
    let (specs, blocks, ids) = if order_us_first {
        (vec![us.clone(), aa.clone()], vec![block(&us, 1.0), block(&aa, 2.0)], vec!["USA", "AAA"])
    } else {
        (vec![aa.clone(), us.clone()], vec![block(&aa, 2.0), block(&us, 1.0)], vec!["AAA", "USA"])
    };
    let set = CountrySet::new(specs).unwrap();
    let w = WeightMatrix::new(ids.iter().map(|s| s.to_string()).collect(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
    let links = build_links(&w, &set).unwrap();
    let k = set.total_k();
    let start = StartState { x: vec![DVector::from_element(k, 0.5)], h: vec![DVector::from_element(k, -0.3)] };
    stack_global(&set, &links, blocks, start).unwrap()
}
