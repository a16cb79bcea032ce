use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::CountrySpec;
use crate::error::{Error, Result};
use crate::stack::{CountryBlock, GlobalModel};

/// Standard normal draws for one simulated path, indexed by period. Each
/// vector is laid out like the stacked `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    pub e: Vec<DVector<f64>>,
    pub eta: Vec<DVector<f64>>,
}

impl Noise {
    /// Consumes the stream period by period and, within a period, country by
    /// country: `k_i` level draws, then `k_i` volatility draws.
    pub fn draw<R: Rng + ?Sized>(sizes: &[usize], periods: usize, rng: &mut R) -> Self {
        let k: usize = sizes.iter().sum();
        let mut e = Vec::with_capacity(periods);
        let mut eta = Vec::with_capacity(periods);
        for _ in 0..periods {
            let mut et = DVector::zeros(k);
            let mut nt = DVector::zeros(k);
            let mut o = 0;
            for &ki in sizes {
                for r in 0..ki {
                    et[o + r] = rng.sample(StandardNormal);
                }
                for r in 0..ki {
                    nt[o + r] = rng.sample(StandardNormal);
                }
                o += ki;
            }
            e.push(et);
            eta.push(nt);
        }
        Self { e, eta }
    }

    pub fn periods(&self) -> usize {
        self.e.len()
    }

    /// The slice belonging to one country block.
    pub fn block(&self, offset: usize, k: usize) -> Noise {
        Noise {
            e: self.e.iter().map(|v| v.rows(offset, k).into_owned()).collect(),
            eta: self.eta.iter().map(|v| v.rows(offset, k).into_owned()).collect(),
        }
    }
}

/// Additions at `t = 0`: `eps[i]` to the structural shock and `eta_sd[i]`
/// (in units of `sqrt(Q_i)`) to the volatility innovation.
#[derive(Debug, Clone, PartialEq)]
pub struct Impulse {
    pub index: usize,
    pub eps: f64,
    pub eta_sd: f64,
}

/// Simulated levels and log volatilities for periods `0..periods`.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub x: Vec<DVector<f64>>,
    pub h: Vec<DVector<f64>>,
}

fn check(v: &DVector<f64>, ids: (usize, usize), period: usize) -> Result<()> {
    if v.iter().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteSimulation {
            draw: ids.0,
            rep: ids.1,
            period,
        })
    }
}

/// Runs the stacked recursion. `ids` = (draw, replication) for errors.
pub fn simulate_global(model: &GlobalModel, noise: &Noise, impulse: Option<&Impulse>, ids: (usize, usize)) -> Result<Paths> {
    let lx = model.start.x.len();
    let lh = model.start.h.len();
    let mut xs = model.start.x.clone();
    let mut hs = model.start.h.clone();
    let sq = model.q.map(f64::sqrt);
    for t in 0..noise.periods() {
        let mut eta = sq.component_mul(&noise.eta[t]);
        if let (0, Some(imp)) = (t, impulse) {
            if imp.eta_sd != 0.0 {
                eta[imp.index] += imp.eta_sd * sq[imp.index];
            }
        }
        let mut h = &model.vol_c + eta;
        for (l, u) in model.vol_ups.iter().enumerate() {
            h += u * &hs[hs.len() - 1 - l];
        }
        for (l, xi) in model.vol_xi.iter().enumerate() {
            h += xi * &xs[xs.len() - 1 - l];
        }
        check(&h, ids, t)?;
        let mut eps = h.map(|v| (0.5 * v).exp()).component_mul(&noise.e[t]);
        if let (0, Some(imp)) = (t, impulse) {
            if imp.eps != 0.0 {
                eps[imp.index] += imp.eps;
            }
        }
        hs.push(h);
        let mut x = model.c0.clone();
        for (l, b) in model.b.iter().enumerate() {
            x += b * &xs[xs.len() - 1 - l];
        }
        for (l, d) in model.d.iter().enumerate() {
            x += d * &hs[hs.len() - 1 - l];
        }
        x += &model.impact * eps;
        check(&x, ids, t)?;
        xs.push(x);
    }
    Ok(Paths {
        x: xs.split_off(lx),
        h: hs.split_off(lh),
    })
}

/// Runs one country with its foreign variables given. `xstar` covers the
/// `q` presample periods followed by the simulated ones; `x0` and `h0` are
/// the country's own histories, oldest first.
#[allow(clippy::too_many_arguments)]
pub fn simulate_country(
    block: &CountryBlock,
    x0: &[DVector<f64>],
    h0: &[DVector<f64>],
    xstar: &[DVector<f64>],
    noise: &Noise,
    impulse: Option<&Impulse>,
    ids: (usize, usize),
) -> Result<Paths> {
    let spec: &CountrySpec = &block.spec;
    let (p, vp) = (&block.params, &block.vol);
    let lags = spec.lags();
    let periods = noise.periods();
    let pre = xstar.len() - periods;
    if x0.len() < lags.max_x_lag() || h0.len() < lags.max_h_lag() || pre < lags.q {
        return Err(Error::invariant(format!("{}: histories too short for its lags", spec.id())));
    }
    let mut xs = x0.to_vec();
    let mut hs = h0.to_vec();
    let sq = vp.innovation_var.map(f64::sqrt);
    let a_tilde = p.ident.a_tilde();
    for t in 0..periods {
        let mut eta = sq.component_mul(&noise.eta[t]);
        if let (0, Some(imp)) = (t, impulse) {
            if imp.eta_sd != 0.0 {
                eta[imp.index] += imp.eta_sd * sq[imp.index];
            }
        }
        let mut h = &vp.intercept + eta;
        for (l, u) in vp.vol_lags.iter().enumerate() {
            h += u * &hs[hs.len() - 1 - l];
        }
        for (l, xi) in vp.macro_feedback.iter().enumerate() {
            h += xi * &xs[xs.len() - 1 - l];
        }
        check(&h, ids, t)?;
        let mut eps = h.map(|v| (0.5 * v).exp()).component_mul(&noise.e[t]);
        if let (0, Some(imp)) = (t, impulse) {
            if imp.eps != 0.0 {
                eps[imp.index] += imp.eps;
            }
        }
        hs.push(h);
        let mut x = p.intercept.clone();
        for (l, phi) in p.domestic.iter().enumerate() {
            x += phi * &xs[xs.len() - 1 - l];
        }
        for (l, lam) in p.foreign.iter().enumerate() {
            x += lam * &xstar[pre + t - l];
        }
        for (l, psi) in p.vol_in_mean.iter().enumerate() {
            x += psi * &hs[hs.len() - 1 - l];
        }
        x += a_tilde * eps;
        check(&x, ids, t)?;
        xs.push(x);
    }
    Ok(Paths {
        x: xs.split_off(x0.len()),
        h: hs.split_off(h0.len()),
    })
}
