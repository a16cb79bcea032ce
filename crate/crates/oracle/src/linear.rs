//! Moving-average responses of a world without volatility dynamics, built
//! directly from the country equations.

use crate::dense::{inverse, mul, zeros, Mat};
use crate::world::TrueWorld;

fn offsets(world: &TrueWorld) -> (Vec<usize>, usize) {
    let mut offs = Vec::new();
    let mut acc = 0;
    for s in world.specs() {
        offs.push(acc);
        acc += s.k();
    }
    (offs, acc)
}

/// Coefficient on stacked `x_{t-lag}` of every country equation, with the
/// foreign loadings expanded through the weights. Lag 0 carries only the
/// foreign part.
fn stacked_lag(world: &TrueWorld, lag: usize) -> Mat {
    let specs = world.specs();
    let (offs, k) = offsets(world);
    let mut m = zeros(k, k);
    for (i, s) in specs.iter().enumerate() {
        let p = &world.countries[i].params;
        if lag >= 1 {
            if let Some(phi) = p.domestic.get(lag - 1) {
                for r in 0..s.k() {
                    for c in 0..s.k() {
                        m[offs[i] + r][offs[i] + c] += phi[(r, c)];
                    }
                }
            }
        }
        if let Some(lam) = p.foreign.get(lag) {
            for (c, &v) in s.foreign().iter().enumerate() {
                for (j, sj) in specs.iter().enumerate() {
                    let w = world.weights.get(i, j);
                    if j == i || w == 0.0 {
                        continue;
                    }
                    let pos = sj.position(v).expect("partner kind");
                    for r in 0..s.k() {
                        m[offs[i] + r][offs[j] + pos] += lam[(r, c)] * w;
                    }
                }
            }
        }
    }
    m
}

/// Response of stacked `x` at horizons `0..=horizon` to a structural shock
/// of size `size` in equation `pos` of country `country`.
pub fn analytic_irf(world: &TrueWorld, country: usize, pos: usize, size: f64, horizon: usize) -> Vec<Vec<f64>> {
    let (offs, k) = offsets(world);
    let mut g0 = stacked_lag(world, 0);
    for (r, row) in g0.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = -*v;
        }
        row[r] += 1.0;
    }
    let g0_inv = inverse(&g0).expect("G0 invertible");
    let max_lag = world
        .specs()
        .iter()
        .map(|s| s.lags().max_x_lag())
        .max()
        .unwrap_or(1);
    let b: Vec<Mat> = (1..=max_lag).map(|l| mul(&g0_inv, &stacked_lag(world, l))).collect();
    let at = world.countries[country].params.ident.a_tilde();
    let mut shock = vec![vec![0.0]; k];
    for r in 0..at.nrows() {
        shock[offs[country] + r][0] = at[(r, pos)] * size;
    }
    let mut out: Vec<Vec<f64>> = vec![mul(&g0_inv, &shock).into_iter().map(|r| r[0]).collect()];
    for h in 1..=horizon {
        let mut y = vec![0.0; k];
        for (l, bl) in b.iter().enumerate() {
            if h > l {
                let prev = &out[h - l - 1];
                for r in 0..k {
                    y[r] += bl[r].iter().zip(prev).map(|(a, x)| a * x).sum::<f64>();
                }
            }
        }
        out.push(y);
    }
    out
}
