//! Loop-based world simulation. Every period draws, for each country in
//! order, `k_i` level normals and then `k_i` volatility normals, and solves
//! the contemporaneous foreign links by Gaussian elimination.

use gvarsv_core::rng::{sim_rng, StreamRng};
use gvarsv_core::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::world::TrueWorld;

/// Bound beyond which a simulated level counts as explosive.
pub const EXPLOSION: f64 = 1e8;

/// Per-country histories, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldStart {
    pub x: Vec<Vec<DVector<f64>>>,
    pub h: Vec<Vec<DVector<f64>>>,
}

impl WorldStart {
    /// Zero levels and log volatilities at their unconditional means.
    pub fn quiet(world: &TrueWorld, lx: usize, lh: usize) -> Self {
        let x = world.specs().iter().map(|s| vec![DVector::zeros(s.k()); lx]).collect();
        let h = world
            .countries
            .iter()
            .zip(world.specs())
            .map(|(c, s)| {
                let hbar = c.vol.mean_log_vol(&DVector::zeros(s.k())).unwrap_or_else(|| c.vol.intercept.clone());
                vec![hbar; lh]
            })
            .collect();
        Self { x, h }
    }

    /// The last `lx` levels and `lh` log volatilities of generated data.
    pub fn from_generated(data: &Generated, lx: usize, lh: usize) -> Self {
        let tail = |v: &Vec<DVector<f64>>, n: usize| v[v.len() - n..].to_vec();
        Self {
            x: data.x.iter().map(|c| tail(c, lx)).collect(),
            h: data.h.iter().map(|c| tail(c, lh)).collect(),
        }
    }

    /// Stacked copy (oldest first) in the layout of the global model.
    pub fn stacked(&self) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let cat = |hist: &Vec<Vec<DVector<f64>>>| -> Vec<DVector<f64>> {
            let len = hist[0].len();
            (0..len)
                .map(|t| DVector::from_iterator(hist.iter().map(|c| c[t].len()).sum(), hist.iter().flat_map(|c| c[t].iter().copied())))
                .collect()
        };
        (cat(&self.x), cat(&self.h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteShock {
    pub country: usize,
    pub pos: usize,
    pub eps: f64,
    pub eta_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldPath {
    /// `x[i][t]`
    pub x: Vec<Vec<DVector<f64>>>,
    pub h: Vec<Vec<DVector<f64>>>,
}

/// Solves `a y = b` by elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut y = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * y[c];
        }
        y[r] = s / a[r][r];
    }
    Some(y)
}

/// `x*_i` from every country's current levels.
pub fn foreign_of(world: &TrueWorld, i: usize, levels: &[DVector<f64>]) -> DVector<f64> {
    let specs = world.specs();
    let kinds = specs[i].foreign();
    let mut out = DVector::zeros(kinds.len());
    for (r, &v) in kinds.iter().enumerate() {
        for j in 0..specs.len() {
            let w = world.weights.get(i, j);
            if j != i && w != 0.0 {
                let pos = specs[j].position(v).expect("partner carries every foreign kind");
                out[r] += w * levels[j][pos];
            }
        }
    }
    out
}

fn draw_noise<R: Rng>(world: &TrueWorld, rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut e = Vec::new();
    let mut eta = Vec::new();
    for s in world.specs() {
        e.push((0..s.k()).map(|_| rng.sample(StandardNormal)).collect());
        eta.push((0..s.k()).map(|_| rng.sample(StandardNormal)).collect());
    }
    (e, eta)
}

/// Log volatility and structural shock of one country at one period.
fn vol_and_shock(
    world: &TrueWorld,
    i: usize,
    hx: &[DVector<f64>],
    hh: &[DVector<f64>],
    e: &[f64],
    eta: &[f64],
    shock: Option<&BruteShock>,
) -> (Vec<f64>, Vec<f64>) {
    let vp = &world.countries[i].vol;
    let k = e.len();
    let mut h = vec![0.0; k];
    let mut eps = vec![0.0; k];
    for r in 0..k {
        let mut v = vp.intercept[r];
        for (l, ups) in vp.vol_lags.iter().enumerate() {
            let past = &hh[hh.len() - 1 - l];
            for c in 0..k {
                v += ups[(r, c)] * past[c];
            }
        }
        for (l, xi) in vp.macro_feedback.iter().enumerate() {
            let past = &hx[hx.len() - 1 - l];
            for c in 0..k {
                v += xi[(r, c)] * past[c];
            }
        }
        let sd = vp.innovation_var[r].sqrt();
        let mut innov = sd * eta[r];
        if let Some(s) = shock.filter(|s| s.country == i && s.pos == r && s.eta_sd != 0.0) {
            innov += s.eta_sd * sd;
        }
        v += innov;
        h[r] = v;
        eps[r] = (v / 2.0).exp() * e[r];
        if let Some(s) = shock.filter(|s| s.country == i && s.pos == r && s.eps != 0.0) {
            eps[r] += s.eps;
        }
    }
    (h, eps)
}

/// Everything in country `i`'s level equation except the `Λ_0 x*_t` term.
fn level_rhs(
    world: &TrueWorld,
    i: usize,
    hx: &[DVector<f64>],
    hh_with_now: &[DVector<f64>],
    past_star: &dyn Fn(usize) -> DVector<f64>,
    eps: &[f64],
) -> Vec<f64> {
    let p = &world.countries[i].params;
    let k = eps.len();
    let at = p.ident.a_tilde();
    let mut out = vec![0.0; k];
    for r in 0..k {
        let mut v = p.intercept[r];
        for (l, phi) in p.domestic.iter().enumerate() {
            let past = &hx[hx.len() - 1 - l];
            for c in 0..k {
                v += phi[(r, c)] * past[c];
            }
        }
        for (l, lam) in p.foreign.iter().enumerate().skip(1) {
            let xs = past_star(l);
            for c in 0..xs.len() {
                v += lam[(r, c)] * xs[c];
            }
        }
        for (l, psi) in p.vol_in_mean.iter().enumerate() {
            let hl = &hh_with_now[hh_with_now.len() - 1 - l];
            for c in 0..k {
                v += psi[(r, c)] * hl[c];
            }
        }
        for c in 0..=r {
            v += at[(r, c)] * eps[c];
        }
        out[r] = v;
    }
    out
}

fn explosive(v: &[f64]) -> bool {
    v.iter().any(|x| !x.is_finite() || x.abs() > EXPLOSION)
}

fn unstable() -> Error {
    Error::Invariant("unstable world: simulated level exceeded 1e8".into())
}

/// Simulates the whole world for `periods` periods from `start`.
pub fn simulate_world<R: Rng>(
    world: &TrueWorld,
    start: &WorldStart,
    periods: usize,
    rng: &mut R,
    shock: Option<&BruteShock>,
) -> Result<WorldPath> {
    let specs = world.specs();
    let n = specs.len();
    let mut xs = start.x.clone();
    let mut hs = start.h.clone();
    let sizes: Vec<usize> = specs.iter().map(|s| s.k()).collect();
    let offs: Vec<usize> = sizes.iter().scan(0, |a, &k| { let o = *a; *a += k; Some(o) }).collect();
    let ktot: usize = sizes.iter().sum();
    for t in 0..periods {
        let (e, eta) = draw_noise(world, rng);
        let sh = if t == 0 { shock } else { None };
        let mut rhs = vec![0.0; ktot];
        for i in 0..n {
            let (h, eps) = vol_and_shock(world, i, &xs[i], &hs[i], &e[i], &eta[i], sh);
            hs[i].push(DVector::from_vec(h));
            let xs_ref = &xs;
            let past_star = |l: usize| -> DVector<f64> {
                let lv: Vec<DVector<f64>> = xs_ref.iter().map(|c| c[c.len() - l].clone()).collect();
                foreign_of(world, i, &lv)
            };
            let r = level_rhs(world, i, &xs[i], &hs[i], &past_star, &eps);
            rhs[offs[i]..offs[i] + sizes[i]].copy_from_slice(&r);
        }
        // x_i - Λ_0 Σ_j w_ij S_j x_j = rhs_i
        let mut a = vec![vec![0.0; ktot]; ktot];
        for i in 0..n {
            let lam0 = &world.countries[i].params.foreign[0];
            for r in 0..sizes[i] {
                let row = offs[i] + r;
                a[row][row] += 1.0;
                for (c, &v) in specs[i].foreign().iter().enumerate() {
                    for j in 0..n {
                        let w = world.weights.get(i, j);
                        if j != i && w != 0.0 {
                            let pos = specs[j].position(v).expect("partner kind");
                            a[row][offs[j] + pos] -= lam0[(r, c)] * w;
                        }
                    }
                }
            }
        }
        let sol = gauss_solve(a, rhs).ok_or_else(|| Error::Invariant("singular contemporaneous system".into()))?;
        if explosive(&sol) {
            return Err(unstable());
        }
        for i in 0..n {
            xs[i].push(DVector::from_column_slice(&sol[offs[i]..offs[i] + sizes[i]]));
        }
    }
    let lx = start.x[0].len();
    let lh = start.h[0].len();
    Ok(WorldPath {
        x: xs.into_iter().map(|mut v| v.split_off(lx)).collect(),
        h: hs.into_iter().map(|mut v| v.split_off(lh)).collect(),
    })
}

/// Generated observables and latent truth, burn-in removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub x: Vec<Vec<DVector<f64>>>,
    pub xstar: Vec<Vec<DVector<f64>>>,
    pub h: Vec<Vec<DVector<f64>>>,
}

impl Generated {
    pub fn len(&self) -> usize {
        self.x[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn generate(world: &TrueWorld) -> Result<Generated> {
    world.validate()?;
    let lx = world.specs().iter().map(|s| s.lags().max_x_lag()).max().unwrap_or(1);
    let lh = world.specs().iter().map(|s| s.lags().max_h_lag()).max().unwrap_or(1);
    let start = WorldStart::quiet(world, lx, lh);
    let mut rng = StreamRng::seed_from_u64(world.seed);
    let path = simulate_world(world, &start, world.burn + world.t, &mut rng, None)?;
    let keep = |v: &Vec<DVector<f64>>| v[world.burn..].to_vec();
    let x: Vec<Vec<DVector<f64>>> = path.x.iter().map(keep).collect();
    let h = path.h.iter().map(keep).collect();
    let xstar = (0..world.n())
        .map(|i| {
            (0..world.t)
                .map(|t| {
                    let lv: Vec<DVector<f64>> = x.iter().map(|c| c[t].clone()).collect();
                    foreign_of(world, i, &lv)
                })
                .collect()
        })
        .collect();
    Ok(Generated { x, xstar, h })
}

/// Per-country responses, `k_i × (H + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteIrf {
    pub x: Vec<DMatrix<f64>>,
    pub h: Vec<DMatrix<f64>>,
}

impl BruteIrf {
    fn zeros(world: &TrueWorld, len: usize) -> Self {
        let z: Vec<DMatrix<f64>> = world.specs().iter().map(|s| DMatrix::zeros(s.k(), len)).collect();
        Self { x: z.clone(), h: z }
    }

    fn add(&mut self, i: usize, a: &[DVector<f64>], b: &[DVector<f64>], ha: &[DVector<f64>], hb: &[DVector<f64>]) {
        for t in 0..self.x[i].ncols() {
            for r in 0..self.x[i].nrows() {
                self.x[i][(r, t)] += a[t][r] - b[t][r];
                self.h[i][(r, t)] += ha[t][r] - hb[t][r];
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for m in self.x.iter_mut().chain(self.h.iter_mut()) {
            *m *= s;
        }
    }
}

/// Paired-path GIRF of world draw `draw`: replication `rep` replays stream
/// `(seed, draw, rep)` for both paths.
pub fn brute_force_irf(
    world: &TrueWorld,
    start: &WorldStart,
    shock: &BruteShock,
    horizon: usize,
    reps: usize,
    seed: u64,
    draw: usize,
) -> Result<BruteIrf> {
    let mut out = BruteIrf::zeros(world, horizon + 1);
    for rep in 0..reps {
        let base = simulate_world(world, start, horizon + 1, &mut sim_rng(seed, draw, rep), None)?;
        let hit = simulate_world(world, start, horizon + 1, &mut sim_rng(seed, draw, rep), Some(shock))?;
        for i in 0..world.n() {
            out.add(i, &hit.x[i], &base.x[i], &hit.h[i], &base.h[i]);
        }
    }
    out.scale(1.0 / reps as f64);
    Ok(out)
}

/// Country `i` alone, with its foreign variables read from `star(t)` for
/// the simulated period `t` (and `star` of negative offsets for lags).
fn simulate_alone(
    world: &TrueWorld,
    i: usize,
    start: &WorldStart,
    noise: &[(Vec<f64>, Vec<f64>)],
    star: &dyn Fn(isize) -> DVector<f64>,
    shock: Option<&BruteShock>,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let mut xs = start.x[i].clone();
    let mut hs = start.h[i].clone();
    let lam0 = &world.countries[i].params.foreign[0];
    for (t, (e, eta)) in noise.iter().enumerate() {
        let sh = if t == 0 { shock } else { None };
        let (h, eps) = vol_and_shock(world, i, &xs, &hs, e, eta, sh);
        hs.push(DVector::from_vec(h));
        let past = |l: usize| star(t as isize - l as isize);
        let mut x = level_rhs(world, i, &xs, &hs, &past, &eps);
        let now = star(t as isize);
        for r in 0..x.len() {
            for c in 0..now.len() {
                x[r] += lam0[(r, c)] * now[c];
            }
        }
        xs.push(DVector::from_vec(x));
    }
    let (lx, lh) = (start.x[i].len(), start.h[i].len());
    (xs.split_off(lx), hs.split_off(lh))
}

/// Direct responses by frozen-path simulation: the origin runs with its
/// foreign variables at their baseline values, and each partner sees the
/// baseline world except for the origin's own deviation.
pub fn brute_force_direct(
    world: &TrueWorld,
    start: &WorldStart,
    shock: &BruteShock,
    horizon: usize,
    reps: usize,
    seed: u64,
    draw: usize,
) -> Result<BruteIrf> {
    let n = world.n();
    let o = shock.country;
    let periods = horizon + 1;
    let mut out = BruteIrf::zeros(world, periods);
    for rep in 0..reps {
        let mut rng = sim_rng(seed, draw, rep);
        let mut noise: Vec<Vec<(Vec<f64>, Vec<f64>)>> = vec![Vec::new(); n];
        for _ in 0..periods {
            let (e, eta) = draw_noise(world, &mut rng);
            for i in 0..n {
                noise[i].push((e[i].clone(), eta[i].clone()));
            }
        }
        let base = simulate_world(world, start, periods, &mut sim_rng(seed, draw, rep), None)?;
        let level_at = |paths: &[Vec<DVector<f64>>], i: usize, t: isize| -> DVector<f64> {
            if t >= 0 {
                paths[i][t as usize].clone()
            } else {
                let h = &start.x[i];
                h[(h.len() as isize + t) as usize].clone()
            }
        };
        let star_base = |i: usize, t: isize| -> DVector<f64> {
            let lv: Vec<DVector<f64>> = (0..n).map(|j| level_at(&base.x, j, t)).collect();
            foreign_of(world, i, &lv)
        };
        let (ob_x, ob_h) = simulate_alone(world, o, start, &noise[o], &|t| star_base(o, t), None);
        let (oc_x, oc_h) = simulate_alone(world, o, start, &noise[o], &|t| star_base(o, t), Some(shock));
        out.add(o, &oc_x, &ob_x, &oc_h, &ob_h);
        for j in (0..n).filter(|&j| j != o) {
            let star_with = |origin: &[DVector<f64>], t: isize| -> DVector<f64> {
                let lv: Vec<DVector<f64>> = (0..n)
                    .map(|c| if c == o && t >= 0 { origin[t as usize].clone() } else { level_at(&base.x, c, t) })
                    .collect();
                foreign_of(world, j, &lv)
            };
            let (jb_x, jb_h) = simulate_alone(world, j, start, &noise[j], &|t| star_with(&ob_x, t), None);
            let (jc_x, jc_h) = simulate_alone(world, j, start, &noise[j], &|t| star_with(&oc_x, t), None);
            out.add(j, &jc_x, &jb_x, &jc_h, &jb_h);
        }
    }
    out.scale(1.0 / reps as f64);
    Ok(out)
}
