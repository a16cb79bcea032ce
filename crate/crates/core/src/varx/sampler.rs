use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::{CountrySample, RegressorLayout, VolLayout};
use super::priors::{ols, Priors};
use crate::domain::{
    CountryParameters, CountrySpec, IdentificationMatrix, LatentVolPath, VolatilityParameters,
};
use crate::error::{Error, Result};
use crate::linalg::{draw_from_precision, ldl, spd_inverse};
use crate::rng::{chain_rng, StreamRng};

/// Innovation variance used for `Q` when volatility is pinned.
pub const FIXED_Q: f64 = 1e-12;

const TARGET_ACCEPT: f64 = 0.44;

/// Observations kept for starting simulations; covers the longest lag of
/// any partner in a stacked world.
pub const X_TAIL: usize = 8;

/// Pins log volatility and `Ã`, which shuts every volatility channel: the
/// level equation loses its `Ψ` terms and `h` stays at `log_var`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedVolatility {
    pub log_var: DVector<f64>,
    pub a_tilde: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    /// Total sweeps, burn-in included.
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub sign_retry_cap: usize,
    pub keep_paths: bool,
    /// Reserved for a particle update of the volatility path; only the
    /// single-site update is implemented.
    pub particles: Option<usize>,
    pub initial_step: f64,
    pub fixed_volatility: Option<FixedVolatility>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            draws: 10_000,
            burn_in: 2_000,
            thin: 1,
            seed: 0,
            sign_retry_cap: 1000,
            keep_paths: true,
            particles: None,
            initial_step: 0.3,
            fixed_volatility: None,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws <= self.burn_in {
            return Err(Error::Config(format!(
                "draws ({}) must exceed burn_in ({}); no draws would be retained",
                self.draws, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.particles.is_some() {
            return Err(Error::Config(
                "particle updates are not implemented; leave `particles` unset".into(),
            ));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::Config("initial_step must be positive".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.draws - self.burn_in).div_ceil(self.thin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub params: CountryParameters,
    pub vol: VolatilityParameters,
    pub path: Option<LatentVolPath>,
    /// Last `max(s, m)` columns of the path, oldest first.
    pub h_tail: DMatrix<f64>,
    /// Time average of `exp(h / 2)` over the sample.
    pub mean_sd: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Post-burn-in acceptance rate of the volatility update, per variable.
    pub h_acceptance: DVector<f64>,
    pub h_step: DVector<f64>,
    pub sign_redraws_total: usize,
    pub sign_redraws_max: usize,
    /// Per retained draw.
    pub loglik_trace: Vec<f64>,
    pub mean_h_trace: Vec<f64>,
    pub q_trace: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub spec: CountrySpec,
    pub vol_in_mean: bool,
    pub seed: u64,
    /// Last [`X_TAIL`] observations, oldest first.
    pub x_tail: Vec<DVector<f64>>,
    pub draws: Vec<PosteriorDraw>,
    pub diagnostics: Diagnostics,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Draws `Ã` row by row from heteroskedastic regressions of each residual on
/// the negated earlier residuals, redrawing until the sign restrictions hold.
/// Returns the draw and the number of redraws it took.
#[allow(clippy::too_many_arguments)]
pub fn draw_identification<R: Rng + ?Sized>(
    u: &DMatrix<f64>,
    h: &DMatrix<f64>,
    priors: &Priors,
    ordering: &[crate::domain::VariableKind],
    signs: &[(usize, usize)],
    cap: usize,
    sweep: usize,
    rng: &mut R,
) -> Result<(IdentificationMatrix, usize)> {
    let k = u.nrows();
    let n = u.ncols();
    if h.shape() != (k, n) {
        return Err(Error::invariant("residuals and log volatilities are not conformable"));
    }
    if k == 1 {
        return Ok((IdentificationMatrix::identity(ordering.to_vec()), 0));
    }
    let mut chols = Vec::with_capacity(k - 1);
    for j in 1..k {
        let p0 = spd_inverse(&priors.a_cov[j - 1])
            .ok_or_else(|| Error::invariant("identification prior covariance not positive definite"))?;
        let mut prec = p0.clone();
        let mut r = &p0 * &priors.a_mean[j - 1];
        for t in 0..n {
            let w = (-h[(j, t)]).exp();
            for a in 0..j {
                r[a] -= w * u[(a, t)] * u[(j, t)];
                for b in 0..j {
                    prec[(a, b)] += w * u[(a, t)] * u[(b, t)];
                }
            }
        }
        let chol = prec
            .cholesky()
            .ok_or_else(|| Error::NonFiniteDraw { what: format!("identification row {j}"), draw: sweep })?;
        let mean = chol.solve(&r);
        let lt = chol.l().transpose();
        chols.push((mean, lt));
    }
    for attempt in 0..=cap {
        let mut a = DMatrix::identity(k, k);
        for (j, (mean, lt)) in chols.iter().enumerate() {
            let z = DVector::from_fn(j + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let dev = lt.solve_upper_triangular(&z).expect("nonsingular factor");
            for c in 0..=j {
                a[(j + 1, c)] = mean[c] + dev[c];
            }
        }
        let ident = IdentificationMatrix::from_structural(&a, ordering.to_vec())
            .map_err(|_| Error::NonFiniteDraw { what: "identification matrix".into(), draw: sweep })?;
        if ident.satisfies_signs(signs) {
            return Ok((ident, attempt));
        }
    }
    Err(Error::SignRestrictionCap { cap, sweep })
}

struct Chain<'a> {
    sample: &'a CountrySample,
    priors: &'a Priors,
    lay: RegressorLayout,
    vl: VolLayout,
    n: usize,
    lh: usize,
    xrows: DMatrix<f64>,
    beta: DVector<f64>,
    b: DMatrix<f64>,
    a: DMatrix<f64>,
    ident: IdentificationMatrix,
    h: DMatrix<f64>,
    c: DVector<f64>,
    ups: Vec<DMatrix<f64>>,
    xi: Vec<DMatrix<f64>>,
    q: DVector<f64>,
    u: DMatrix<f64>,
    eta: DMatrix<f64>,
    step: DVector<f64>,
    beta_p0: DMatrix<f64>,
    beta_r0: DVector<f64>,
}

impl<'a> Chain<'a> {
    fn t(&self, i: usize) -> usize {
        self.sample.t_of(i)
    }

    fn psi(&self, l: usize, row: usize, j: usize) -> f64 {
        self.b[(row, self.lay.psi_col(l) + j)]
    }

    fn recompute_u(&mut self) {
        let nx = self.lay.n_x();
        let bx = self.b.columns(0, nx);
        for i in 0..self.n {
            let x = &self.sample.x[self.t(i)];
            let fit = &bx * self.xrows.row(i).transpose();
            for r in 0..self.lay.k {
                let mut v = x[r] - fit[r];
                if self.lay.vol_in_mean {
                    for l in 0..=self.lay.s {
                        for j in 0..self.lay.k {
                            v -= self.psi(l, r, j) * self.h[(j, self.lh + i - l)];
                        }
                    }
                }
                self.u[(r, i)] = v;
            }
        }
    }

    fn vol_row(&self, i: usize) -> DVector<f64> {
        let (k, m, q) = (self.vl.k, self.vl.m, self.vl.q);
        let tau = self.lh + i;
        let t = self.t(i);
        let mut w = DVector::zeros(self.vl.n_w());
        w[0] = 1.0;
        for l in 1..=m {
            for j in 0..k {
                w[1 + (l - 1) * k + j] = self.h[(j, tau - l)];
            }
        }
        for l in 1..=q {
            for j in 0..k {
                w[1 + m * k + (l - 1) * k + j] = self.sample.x[t - l][j];
            }
        }
        w
    }

    fn recompute_eta(&mut self) {
        for i in 0..self.n {
            let w = self.vol_row(i);
            for j in 0..self.vl.k {
                let mut v = self.h[(j, self.lh + i)] - self.c[j];
                for l in 1..=self.vl.m {
                    for jj in 0..self.vl.k {
                        v -= self.ups[l - 1][(j, jj)] * w[1 + (l - 1) * self.vl.k + jj];
                    }
                }
                for l in 1..=self.vl.q {
                    for jj in 0..self.vl.k {
                        v -= self.xi[l - 1][(j, jj)] * w[1 + self.vl.m * self.vl.k + (l - 1) * self.vl.k + jj];
                    }
                }
                self.eta[(j, i)] = v;
            }
        }
    }

    fn z_row(&self, i: usize) -> DVector<f64> {
        let nz = self.lay.n_z();
        let nx = self.lay.n_x();
        let mut z = DVector::zeros(nz);
        z.rows_mut(0, nx).copy_from(&self.xrows.row(i).transpose());
        if self.lay.vol_in_mean {
            for l in 0..=self.lay.s {
                for j in 0..self.lay.k {
                    z[self.lay.psi_col(l) + j] = self.h[(j, self.lh + i - l)];
                }
            }
        }
        z
    }

    fn draw_beta(&mut self, rng: &mut StreamRng, sweep: usize) -> Result<()> {
        let k = self.lay.k;
        let nz = self.lay.n_z();
        let mut prec = self.beta_p0.clone();
        let mut r = self.beta_r0.clone();
        let mut zz = DMatrix::zeros(nz, nz);
        for i in 0..self.n {
            let z = self.z_row(i);
            zz.fill(0.0);
            zz.ger(1.0, &z, &z, 0.0);
            let hi = DVector::from_fn(k, |j, _| (-self.h[(j, self.lh + i)]).exp());
            // Ω⁻¹ = A' H⁻¹ A
            let ha = DMatrix::from_fn(k, k, |a, b| hi[a] * self.a[(a, b)]);
            let oinv = self.a.transpose() * ha;
            let ox = &oinv * &self.sample.x[self.t(i)];
            for a in 0..k {
                r.rows_mut(a * nz, nz).axpy(ox[a], &z, 1.0);
                for b in 0..k {
                    let w = oinv[(a, b)];
                    if w != 0.0 {
                        let mut blk = prec.view_mut((a * nz, b * nz), (nz, nz));
                        blk += &zz * w;
                    }
                }
            }
        }
        self.beta = draw_from_precision(prec, &r, rng).ok_or_else(|| Error::NonFiniteDraw {
            what: "level coefficient precision".into(),
            draw: sweep,
        })?;
        self.b = self.lay.b_matrix(&self.beta);
        self.recompute_u();
        Ok(())
    }

    /// Log density of observation `i` given its residual and log volatility.
    fn obs_logpdf(&self, u: &[f64], h: &[f64]) -> f64 {
        let k = self.lay.k;
        let mut s = 0.0;
        for r in 0..k {
            let mut e = u[r];
            for c in 0..r {
                e += self.a[(r, c)] * u[c];
            }
            s += -0.5 * h[r] - 0.5 * e * e * (-h[r]).exp();
        }
        s
    }

    fn trans_logpdf(&self, eta: &[f64]) -> f64 {
        eta.iter().zip(self.q.iter()).map(|(e, q)| -0.5 * e * e / q).sum()
    }

    fn update_h(&mut self, rng: &mut StreamRng, acc: &mut [usize]) {
        let k = self.lay.k;
        let len = self.lh + self.n;
        let s_eff = if self.lay.vol_in_mean { self.lay.s } else { 0 };
        let mut u_old = vec![0.0; k];
        let mut u_new = vec![0.0; k];
        let mut h_col = vec![0.0; k];
        let mut e_old = vec![0.0; k];
        let mut e_new = vec![0.0; k];
        for tau in 0..len {
            for j in 0..k {
                let cur = self.h[(j, tau)];
                let z: f64 = rng.sample(StandardNormal);
                let delta = self.step[j] * z;
                let prop = cur + delta;
                let mut diff = 0.0;
                if tau < self.lh {
                    let m0 = self.priors.h0_mean[j];
                    diff += -0.5 * ((prop - m0).powi(2) - (cur - m0).powi(2)) / self.priors.h0_var;
                }
                for l in 0..=s_eff {
                    let Some(i) = (tau + l).checked_sub(self.lh) else { continue };
                    if i >= self.n {
                        continue;
                    }
                    for r in 0..k {
                        u_old[r] = self.u[(r, i)];
                        u_new[r] = u_old[r];
                        if self.lay.vol_in_mean {
                            u_new[r] -= self.psi(l, r, j) * delta;
                        }
                        h_col[r] = self.h[(r, self.lh + i)];
                    }
                    let old = self.obs_logpdf(&u_old, &h_col);
                    if l == 0 {
                        h_col[j] = prop;
                    }
                    diff += self.obs_logpdf(&u_new, &h_col) - old;
                }
                for l in 0..=self.vl.m {
                    let Some(i) = (tau + l).checked_sub(self.lh) else { continue };
                    if i >= self.n {
                        continue;
                    }
                    for r in 0..k {
                        e_old[r] = self.eta[(r, i)];
                        e_new[r] = e_old[r]
                            - if l == 0 {
                                if r == j { -delta } else { 0.0 }
                            } else {
                                self.ups[l - 1][(r, j)] * delta
                            };
                    }
                    diff += self.trans_logpdf(&e_new) - self.trans_logpdf(&e_old);
                }
                let lu: f64 = rng.random::<f64>().ln();
                if lu < diff {
                    acc[j] += 1;
                    self.h[(j, tau)] = prop;
                    for l in 0..=s_eff {
                        let Some(i) = (tau + l).checked_sub(self.lh) else { continue };
                        if i >= self.n || !self.lay.vol_in_mean {
                            continue;
                        }
                        for r in 0..k {
                            self.u[(r, i)] -= self.psi(l, r, j) * delta;
                        }
                    }
                    for l in 0..=self.vl.m {
                        let Some(i) = (tau + l).checked_sub(self.lh) else { continue };
                        if i >= self.n {
                            continue;
                        }
                        if l == 0 {
                            self.eta[(j, i)] += delta;
                        } else {
                            for r in 0..k {
                                self.eta[(r, i)] -= self.ups[l - 1][(r, j)] * delta;
                            }
                        }
                    }
                }
            }
        }
    }

    fn draw_vol(&mut self, rng: &mut StreamRng, sweep: usize) -> Result<()> {
        let (k, m) = (self.vl.k, self.vl.m);
        let nw = self.vl.n_w();
        let mut ww = DMatrix::zeros(nw, nw);
        let rows: Vec<DVector<f64>> = (0..self.n).map(|i| self.vol_row(i)).collect();
        for w in &rows {
            ww.ger(1.0, w, w, 1.0);
        }
        for j in 0..k {
            let p0 = spd_inverse(&self.priors.vol_cov[j])
                .ok_or_else(|| Error::invariant("volatility prior covariance not positive definite"))?;
            let mut r = &p0 * &self.priors.vol_mean[j];
            let mut wy = DVector::zeros(nw);
            for (i, w) in rows.iter().enumerate() {
                wy.axpy(self.h[(j, self.lh + i)], w, 1.0);
            }
            let prec = p0 + &ww / self.q[j];
            r += wy / self.q[j];
            let g = draw_from_precision(prec, &r, rng).ok_or_else(|| Error::NonFiniteDraw {
                what: format!("volatility equation {j}"),
                draw: sweep,
            })?;
            let mut ssr = 0.0;
            for (i, w) in rows.iter().enumerate() {
                let e = self.h[(j, self.lh + i)] - g.dot(w);
                ssr += e * e;
            }
            let shape = self.priors.q_shape + self.n as f64 / 2.0;
            let rate = self.priors.q_scale[j] + ssr / 2.0;
            let gamma = Gamma::new(shape, 1.0 / rate).map_err(|_| Error::NonFiniteDraw {
                what: format!("Q[{j}]"),
                draw: sweep,
            })?;
            self.q[j] = 1.0 / gamma.sample(rng);
            self.c[j] = g[0];
            for l in 0..m {
                for jj in 0..k {
                    self.ups[l][(j, jj)] = g[1 + l * k + jj];
                }
            }
            for l in 0..self.vl.q {
                for jj in 0..k {
                    self.xi[l][(j, jj)] = g[1 + m * k + l * k + jj];
                }
            }
        }
        self.recompute_eta();
        Ok(())
    }

    fn level_loglik(&self) -> f64 {
        let k = self.lay.k;
        let mut u = vec![0.0; k];
        let mut h = vec![0.0; k];
        let mut s = 0.0;
        for i in 0..self.n {
            for r in 0..k {
                u[r] = self.u[(r, i)];
                h[r] = self.h[(r, self.lh + i)];
            }
            s += self.obs_logpdf(&u, &h);
        }
        s - 0.5 * (self.n * k) as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn snapshot(&self, keep_path: bool) -> Result<PosteriorDraw> {
        let k = self.lay.k;
        let params = self.lay.to_params(&self.beta, self.ident.clone());
        let vol = VolatilityParameters {
            intercept: self.c.clone(),
            vol_lags: self.ups.clone(),
            macro_feedback: self.xi.clone(),
            innovation_var: self.q.clone(),
        };
        let len = self.h.ncols();
        let h_tail = self.h.columns(len - self.lh, self.lh).into_owned();
        let mean_sd = DVector::from_fn(k, |j, _| {
            (0..self.n).map(|i| (0.5 * self.h[(j, self.lh + i)]).exp()).sum::<f64>() / self.n as f64
        });
        let path = if keep_path { Some(LatentVolPath::new(self.lh, self.h.clone())?) } else { None };
        Ok(PosteriorDraw {
            params,
            vol,
            path,
            h_tail,
            mean_sd,
        })
    }

    fn check_finite(&self, sweep: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::NonFiniteDraw { what: what.into(), draw: sweep });
        if self.beta.iter().any(|v| !v.is_finite()) {
            return bad("level coefficients");
        }
        if self.h.iter().any(|v| !v.is_finite()) {
            return bad("log volatility path");
        }
        if self.q.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || self.c.iter().any(|v| !v.is_finite())
            || self.ups.iter().chain(&self.xi).any(|m| m.iter().any(|v| !v.is_finite()))
        {
            return bad("volatility parameters");
        }
        if !self.level_loglik().is_finite() {
            return bad("likelihood");
        }
        Ok(())
    }
}

/// Runs one country's chain on an already assembled sample.
pub fn sample_country(sample: &CountrySample, priors: &Priors, cfg: &McmcConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let spec = &sample.spec;
    let fixed = cfg.fixed_volatility.as_ref();
    let lay = RegressorLayout::new(spec, fixed.is_none());
    if lay != priors.layout {
        return Err(Error::Config(format!(
            "{}: priors were built for a different regressor layout (volatility-in-mean {})",
            spec.id(),
            priors.layout.vol_in_mean
        )));
    }
    let vl = VolLayout::new(spec);
    let k = lay.k;
    let n = sample.n_obs();
    let lh = spec.lags().max_h_lag();
    let ordering = spec.domestic().to_vec();
    let signs = spec.sign_restricted_entries();
    let mut rng = chain_rng(cfg.seed, spec.id());

    let beta_p0 = spd_inverse(&priors.beta_cov)
        .ok_or_else(|| Error::invariant("level coefficient prior covariance not positive definite"))?;
    let beta_r0 = &beta_p0 * &priors.beta_mean;

    let fit = ols(sample, &lay);
    let mut beta = priors.beta_mean.clone();
    let mut h0 = priors.h0_mean.clone();
    let mut a = match ldl(&priors.sigma_hat) {
        Some((l, _)) => l.try_inverse().expect("unit lower triangular"),
        None => DMatrix::identity(k, k),
    };
    if let Ok(fit) = &fit {
        let nz = lay.n_z();
        for r in 0..k {
            for c in 0..lay.n_x() {
                beta[r * nz + c] = fit.coef[(c, r)];
            }
        }
        if let Some((l, d)) = ldl(&fit.sigma) {
            a = l.try_inverse().expect("unit lower triangular");
            h0 = d.map(f64::ln);
        }
    }
    let (q_init, c_init, ups_init) = match fixed {
        Some(f) => {
            if f.log_var.len() != k || f.a_tilde.shape() != (k, k) {
                return Err(Error::Config(format!("{}: fixed volatility has the wrong dimension", spec.id())));
            }
            let id = IdentificationMatrix::new(f.a_tilde.clone(), ordering.clone())?;
            if !id.satisfies_signs(&signs) {
                return Err(Error::Config(format!("{}: fixed Ã violates the sign restrictions", spec.id())));
            }
            a = id.structural();
            h0 = f.log_var.clone();
            (
                DVector::from_element(k, FIXED_Q),
                f.log_var.clone(),
                vec![DMatrix::zeros(k, k); vl.m],
            )
        }
        None => {
            let q = DVector::from_fn(k, |j, _| priors.q_scale[j] / (priors.q_shape - 1.0));
            let mut ups = vec![DMatrix::zeros(k, k); vl.m];
            let mut c = DVector::zeros(k);
            for j in 0..k {
                c[j] = priors.vol_mean[j][0];
                for l in 0..vl.m {
                    for jj in 0..k {
                        ups[l][(j, jj)] = priors.vol_mean[j][1 + l * k + jj];
                    }
                }
            }
            (q, c, ups)
        }
    };
    let ident = IdentificationMatrix::from_structural(&a, ordering.clone())?;
    let h = DMatrix::from_fn(k, lh + n, |j, _| h0[j]);
    let mut ch = Chain {
        sample,
        priors,
        lay,
        vl,
        n,
        lh,
        xrows: lay.x_design(sample),
        b: lay.b_matrix(&beta),
        beta,
        a,
        ident,
        h,
        c: c_init,
        ups: ups_init,
        xi: vec![DMatrix::zeros(k, k); vl.q],
        q: q_init,
        u: DMatrix::zeros(k, n),
        eta: DMatrix::zeros(k, n),
        step: DVector::from_element(k, cfg.initial_step),
        beta_p0,
        beta_r0,
    };
    ch.recompute_u();
    ch.recompute_eta();

    let mut draws = Vec::with_capacity(cfg.retained());
    let mut acc_total = vec![0usize; k];
    let mut tried_total = 0usize;
    let mut diag = Diagnostics {
        h_acceptance: DVector::zeros(k),
        h_step: DVector::zeros(k),
        sign_redraws_total: 0,
        sign_redraws_max: 0,
        loglik_trace: Vec::new(),
        mean_h_trace: Vec::new(),
        q_trace: Vec::new(),
    };
    for sweep in 0..cfg.draws {
        ch.draw_beta(&mut rng, sweep)?;
        if fixed.is_none() {
            let hs = ch.h.columns(lh, n).into_owned();
            let (id, redraws) = draw_identification(
                &ch.u,
                &hs,
                priors,
                &ordering,
                &signs,
                cfg.sign_retry_cap,
                sweep,
                &mut rng,
            )?;
            ch.a = id.structural();
            ch.ident = id;
            diag.sign_redraws_total += redraws;
            diag.sign_redraws_max = diag.sign_redraws_max.max(redraws);

            let mut acc = vec![0usize; k];
            ch.update_h(&mut rng, &mut acc);
            let sites = lh + n;
            if sweep < cfg.burn_in {
                let gain = (1.0 / ((sweep + 1) as f64).sqrt()).min(0.1);
                for j in 0..k {
                    let rate = acc[j] as f64 / sites as f64;
                    ch.step[j] *= (gain * (rate - TARGET_ACCEPT)).exp();
                }
            } else {
                for j in 0..k {
                    acc_total[j] += acc[j];
                }
                tried_total += sites;
            }
            ch.draw_vol(&mut rng, sweep)?;
        }
        ch.check_finite(sweep)?;
        if sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0 {
            diag.loglik_trace.push(ch.level_loglik());
            diag.mean_h_trace.push(ch.h.columns(lh, n).mean());
            diag.q_trace.push(ch.q.clone());
            draws.push(ch.snapshot(cfg.keep_paths)?);
        }
    }
    if tried_total > 0 {
        diag.h_acceptance = DVector::from_fn(k, |j, _| acc_total[j] as f64 / tried_total as f64);
    }
    diag.h_step = ch.step.clone();
    let x_tail = sample.x[sample.len() - X_TAIL.min(sample.len())..].to_vec();
    Ok(PosteriorDraws {
        spec: spec.clone(),
        vol_in_mean: lay.vol_in_mean,
        seed: cfg.seed,
        x_tail,
        draws,
        diagnostics: diag,
    })
}
