use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use gvarsv_core::domain::{LatentVolPath, Quarter, VariableKind};
use gvarsv_core::ingest::{
    build_weight_matrix, foreign_variables, parse_panel, parse_trade_flows, raw_requirements, transform, TradeBasis,
    TransformOptions,
};
use gvarsv_core::rng::StreamRng;
use gvarsv_core::shock::{decompose_draw, girf_draw, simulate_global, Noise, ShockSpec};
use gvarsv_core::stack::build_links;
use gvarsv_core::varx::{loglik_path, CountrySample};
use gvarsv_oracle::linear::analytic_irf;
use gvarsv_oracle::loglik::{loglik_explicit, loglik_trace};
use gvarsv_oracle::world::*;
use gvarsv_oracle::{bridge, brute_force_direct, brute_force_irf, generate, BruteShock, WorldStart};
use nalgebra::DMatrix;
use rand::SeedableRng;

fn shock(level: f64, vol: Option<f64>, horizon: usize) -> ShockSpec {
    ShockSpec {
        origin: "USA".into(),
        variable: VariableKind::ShortRate,
        level_size: level,
        vol_shock: vol,
        horizon,
    }
}

fn max_gap(a: &DMatrix<f64>, b: &[DMatrix<f64>], offsets: &[usize]) -> f64 {
    let mut gap = 0.0f64;
    for (i, m) in b.iter().enumerate() {
        for r in 0..m.nrows() {
            for t in 0..m.ncols() {
                gap = gap.max((a[(offsets[i] + r, t)] - m[(r, t)]).abs());
            }
        }
    }
    gap
}

fn generated_start(world: &TrueWorld) -> WorldStart {
    let mut w = world.clone();
    w.t = 30;
    WorldStart::from_generated(&generate(&w).unwrap(), 1, 1)
}

#[test]
fn girf_matches_brute_force_in_a_nonlinear_world() {
    let world = spillover_world();
    let start = generated_start(&world);
    let model = bridge::global_model(&world, &start).unwrap();
    for vol in [None, Some(1.0)] {
        let spec = shock(1.0, vol, 12);
        let unit = 0.6;
        let core = girf_draw(&model, &spec, unit, 25, 99, 3).unwrap();
        let bs = BruteShock { country: 0, pos: 0, eps: unit, eta_sd: vol.unwrap_or(0.0) };
        let brute = brute_force_irf(&world, &start, &bs, 12, 25, 99, 3).unwrap();
        assert!(max_gap(&core.x, &brute.x, &model.offsets) < 1e-10);
        assert!(max_gap(&core.h, &brute.h, &model.offsets) < 1e-10);
        assert!(brute.x[1].iter().any(|v| v.abs() > 1e-3));
    }
}

#[test]
fn direct_response_matches_frozen_path_brute_force() {
    let world = spillover_world();
    let start = generated_start(&world);
    let model = bridge::global_model(&world, &start).unwrap();
    let links = build_links(&world.weights, &world.set).unwrap();
    let spec = shock(1.0, Some(1.0), 10);
    let (total, direct) = decompose_draw(&model, &links, &spec, 0.5, 10, 5, 0).unwrap();
    let bs = BruteShock { country: 0, pos: 0, eps: 0.5, eta_sd: 1.0 };
    let brute = brute_force_direct(&world, &start, &bs, 10, 10, 5, 0).unwrap();
    let brute_total = brute_force_irf(&world, &start, &bs, 10, 10, 5, 0).unwrap();
    assert!(max_gap(&direct.x, &brute.x, &model.offsets) < 1e-10);
    assert!(max_gap(&direct.h, &brute.h, &model.offsets) < 1e-10);
    assert!(max_gap(&total.x, &brute_total.x, &model.offsets) < 1e-10);
    // The indirect part is not negligible in this world.
    assert!((&total.x - &direct.x).amax() > 1e-3);
}

#[test]
fn linear_reduction_matches_moving_average_responses() {
    let world = linearize(spillover_world());
    let start = WorldStart::quiet(&world, 1, 1);
    let model = bridge::global_model(&world, &start).unwrap();
    let unit = 0.7;
    let core = girf_draw(&model, &shock(1.0, None, 20), unit, 3, 1, 0).unwrap();
    let ma = analytic_irf(&world, 0, 0, unit, 20);
    for (h, y) in ma.iter().enumerate() {
        for (r, v) in y.iter().enumerate() {
            assert!((core.x[(r, h)] - v).abs() < 1e-8, "h = {h}, row {r}");
        }
    }
}

#[test]
fn single_country_generation_equals_stacked_simulation() {
    let world = single_country_world();
    let data = generate(&world).unwrap();
    let start = WorldStart::quiet(&world, 1, 1);
    let model = bridge::global_model(&world, &start).unwrap();
    let mut rng = StreamRng::seed_from_u64(world.seed);
    let noise = Noise::draw(&[3], world.burn + world.t, &mut rng);
    let paths = simulate_global(&model, &noise, None, (0, 0)).unwrap();
    for t in 0..world.t {
        let gap = (&paths.x[world.burn + t] - &data.x[0][t]).amax();
        assert!(gap < 1e-9, "t = {t}: {gap}");
        assert!((&paths.h[world.burn + t] - &data.h[0][t]).amax() < 1e-9);
    }
}

#[test]
fn loglik_agrees_with_both_closed_forms() {
    let world = canonical_world();
    let data = generate(&world).unwrap();
    for (i, spec) in world.specs().iter().enumerate() {
        let sample = CountrySample::new(spec.clone(), data.x[i][..120].to_vec(), data.xstar[i][..120].to_vec()).unwrap();
        // Presample column for h_{t-1} followed by the 119 in-sample periods.
        let h = DMatrix::from_fn(3, 120, |r, c| data.h[i][c][r]);
        let path = LatentVolPath::new(1, h).unwrap();
        let params = &world.countries[i].params;
        let core = loglik_path(&sample, params, &path).unwrap();
        let a = loglik_explicit(&sample, params, &path);
        let b = loglik_trace(&sample, params, &path);
        assert!((core - a).abs() < 1e-8, "{core} vs {a}");
        assert!((core - b).abs() < 1e-8, "{core} vs {b}");
    }
}

#[test]
fn fixtures_round_trip_through_ingest() {
    let mut world = canonical_world();
    world.t = 40;
    let data = generate(&world).unwrap();
    let first: Quarter = "1990Q1".parse().unwrap();
    let csv = gvarsv_oracle::fixtures::levels_csv(&world, &data, first);
    let request: BTreeMap<String, BTreeSet<_>> = world
        .specs()
        .iter()
        .map(|s| (s.id().to_string(), raw_requirements(s.domestic())))
        .collect();
    let raw = parse_panel(&csv, Path::new("levels.csv"), &request).unwrap();
    let countries: Vec<(String, Vec<VariableKind>)> =
        world.specs().iter().map(|s| (s.id().to_string(), s.domestic().to_vec())).collect();
    let opts = TransformOptions { numeraire: "USA".into(), fx: Default::default() };
    let panel = transform(&raw, &countries, &opts).unwrap();
    let flows = parse_trade_flows(&gvarsv_oracle::fixtures::trade_csv(&world), Path::new("trade.csv")).unwrap();
    let w = build_weight_matrix(&flows, TradeBasis::Total).unwrap();
    assert!((w.matrix() - world.weights.matrix()).amax() < 1e-14);
    for (i, spec) in world.specs().iter().enumerate() {
        let c = panel.country(spec.id()).unwrap();
        for (pos, &v) in spec.domestic().iter().enumerate() {
            for t in 0..world.t {
                let got = c.get(v, first.offset(4 + t as i64)).unwrap();
                assert!((got - data.x[i][t][pos]).abs() < 1e-9);
            }
        }
        let fs = foreign_variables(&panel, &w, spec).unwrap();
        for (r, series) in fs.values.iter().enumerate() {
            for t in 0..world.t {
                assert!((series[t] - data.xstar[i][t][r]).abs() < 1e-9);
            }
        }
    }
}
