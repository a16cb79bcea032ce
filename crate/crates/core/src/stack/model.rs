use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::links::LinkMatrices;
use crate::domain::{CountryParameters, CountrySet, CountrySpec, VolatilityParameters};
use crate::error::{Error, Result};
use crate::linalg::condition_number;
use crate::rng::{derive_seed, StreamRng};
use crate::varx::PosteriorDraws;

/// Condition number above which `G0` counts as singular.
pub const COND_THRESHOLD: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryBlock {
    pub spec: CountrySpec,
    pub params: CountryParameters,
    pub vol: VolatilityParameters,
}

/// Initial histories for simulation, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartState {
    pub x: Vec<DVector<f64>>,
    pub h: Vec<DVector<f64>>,
}

/// One posterior draw of the whole world, solved into
///
/// ```text
/// x_t = c0 + Σ_l B_l x_{t-l} + Σ_l D_l h_{t-l} + C ε_t
/// h_t = c + Σ_l Υ_l h_{t-l} + Σ_l Ξ_l x_{t-l} + η_t
/// ```
///
/// with `B_l = G0⁻¹ F_l`, `D_l = G0⁻¹ P_l`, `C = G0⁻¹ Ã` and block-diagonal
/// volatility matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub set: CountrySet,
    pub offsets: Vec<usize>,
    pub k: usize,
    pub countries: Vec<CountryBlock>,
    pub g0: DMatrix<f64>,
    pub g0_inv: DMatrix<f64>,
    pub condition: f64,
    pub intercept: DVector<f64>,
    pub f: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub a_tilde: DMatrix<f64>,
    pub c0: DVector<f64>,
    pub b: Vec<DMatrix<f64>>,
    pub d: Vec<DMatrix<f64>>,
    pub impact: DMatrix<f64>,
    pub vol_c: DVector<f64>,
    pub vol_ups: Vec<DMatrix<f64>>,
    pub vol_xi: Vec<DMatrix<f64>>,
    pub q: DVector<f64>,
    pub start: StartState,
}

impl GlobalModel {
    pub fn x_lags(&self) -> usize {
        self.b.len()
    }

    pub fn h_lags(&self) -> usize {
        self.start.h.len()
    }

    pub fn origin(&self) -> usize {
        self.set.origin_index()
    }

    /// Global index of a country's variable.
    pub fn index(&self, country: usize, pos: usize) -> usize {
        self.offsets[country] + pos
    }

    /// Fixed point of the deterministic recursion, when it exists.
    pub fn unconditional_mean(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let k = self.k;
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        let mut rhs = DVector::zeros(2 * k);
        let mut xx = self.g0.clone();
        for f in &self.f {
            xx -= f;
        }
        m.view_mut((0, 0), (k, k)).copy_from(&xx);
        let mut xh = DMatrix::zeros(k, k);
        for p in &self.p {
            xh -= p;
        }
        m.view_mut((0, k), (k, k)).copy_from(&xh);
        let mut hx = DMatrix::zeros(k, k);
        for xi in &self.vol_xi {
            hx -= xi;
        }
        m.view_mut((k, 0), (k, k)).copy_from(&hx);
        let mut hh = DMatrix::identity(k, k);
        for u in &self.vol_ups {
            hh -= u;
        }
        m.view_mut((k, k), (k, k)).copy_from(&hh);
        rhs.rows_mut(0, k).copy_from(&self.intercept);
        rhs.rows_mut(k, k).copy_from(&self.vol_c);
        let sol = m.lu().solve(&rhs)?;
        Some((sol.rows(0, k).into_owned(), sol.rows(k, k).into_owned()))
    }

    /// Replaces the start histories by the unconditional mean.
    pub fn with_mean_start(mut self) -> Result<Self> {
        let (x, h) = self
            .unconditional_mean()
            .ok_or_else(|| Error::invariant("unconditional mean does not exist"))?;
        let (lx, lh) = (self.start.x.len(), self.start.h.len());
        self.start = StartState {
            x: vec![x; lx],
            h: vec![h; lh],
        };
        Ok(self)
    }
}

fn block_diag(blocks: &[&DMatrix<f64>], offsets: &[usize], k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(k, k);
    for (b, &o) in blocks.iter().zip(offsets) {
        out.view_mut((o, o), b.shape()).copy_from(b);
    }
    out
}

/// Solves the contemporaneous links of one draw per country.
pub fn stack_global(
    set: &CountrySet,
    links: &LinkMatrices,
    blocks: Vec<CountryBlock>,
    start: StartState,
) -> Result<GlobalModel> {
    let specs = set.specs();
    if links.order != set.ids() || blocks.len() != specs.len() {
        return Err(Error::invariant("links, country set and draws are not conformable"));
    }
    for (b, s) in blocks.iter().zip(specs) {
        if &b.spec != s {
            return Err(Error::invariant(format!("draw for {} does not match its spec", s.id())));
        }
        b.params.validate(s)?;
        b.vol.validate(s)?;
    }
    let k = links.k;
    let off = &links.offsets;
    let lx = specs.iter().map(|s| s.lags().max_x_lag()).max().unwrap_or(1);
    let lh = specs.iter().map(|s| s.lags().max_h_lag()).max().unwrap_or(1);
    let ps = specs.iter().map(|s| s.lags().s).max().unwrap_or(0);
    let lm = specs.iter().map(|s| s.lags().m).max().unwrap_or(1);
    let lq = specs.iter().map(|s| s.lags().q).max().unwrap_or(0);
    if start.x.len() != lx || start.h.len() != lh || start.x.iter().chain(&start.h).any(|v| v.len() != k) {
        return Err(Error::invariant(format!(
            "start state needs {lx} x and {lh} h vectors of length {k}"
        )));
    }

    let mut g0 = DMatrix::zeros(k, k);
    let mut intercept = DVector::zeros(k);
    let mut f = vec![DMatrix::zeros(k, k); lx];
    for (i, b) in blocks.iter().enumerate() {
        let ki = b.spec.k();
        let e = &links.select[i];
        let wt = &links.foreign[i];
        let rows = off[i];
        let g = e - &b.params.foreign[0] * wt;
        g0.view_mut((rows, 0), (ki, k)).copy_from(&g);
        intercept.rows_mut(rows, ki).copy_from(&b.params.intercept);
        for l in 1..=lx {
            let mut fl = DMatrix::zeros(ki, k);
            if let Some(phi) = b.params.domestic.get(l - 1) {
                fl += phi * e;
            }
            if let Some(lam) = b.params.foreign.get(l) {
                fl += lam * wt;
            }
            f[l - 1].view_mut((rows, 0), (ki, k)).copy_from(&fl);
        }
    }
    let condition = condition_number(&g0);
    if !(condition < COND_THRESHOLD) {
        return Err(Error::Singular {
            cond: condition,
            threshold: COND_THRESHOLD,
        });
    }
    let g0_inv = g0
        .clone()
        .try_inverse()
        .ok_or(Error::Singular { cond: condition, threshold: COND_THRESHOLD })?;

    // Lags a country does not have stay zero in the global block.
    let pick = |get: &dyn Fn(&CountryBlock) -> Option<&DMatrix<f64>>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(k, k);
        for (i, b) in blocks.iter().enumerate() {
            if let Some(m) = get(b) {
                out.view_mut((off[i], off[i]), m.shape()).copy_from(m);
            }
        }
        out
    };
    let p: Vec<_> = (0..=ps).map(|l| pick(&|b| b.params.vol_in_mean.get(l))).collect();
    let vol_ups: Vec<_> = (0..lm).map(|l| pick(&|b| b.vol.vol_lags.get(l))).collect();
    let vol_xi: Vec<_> = (0..lq).map(|l| pick(&|b| b.vol.macro_feedback.get(l))).collect();
    let at: Vec<&DMatrix<f64>> = blocks.iter().map(|b| b.params.ident.a_tilde()).collect();
    let a_tilde = block_diag(&at, off, k);
    let mut vol_c = DVector::zeros(k);
    let mut q = DVector::zeros(k);
    for (i, b) in blocks.iter().enumerate() {
        vol_c.rows_mut(off[i], b.spec.k()).copy_from(&b.vol.intercept);
        q.rows_mut(off[i], b.spec.k()).copy_from(&b.vol.innovation_var);
    }

    let c0 = &g0_inv * &intercept;
    let bl = f.iter().map(|m| &g0_inv * m).collect();
    let d = p.iter().map(|m| &g0_inv * m).collect();
    let impact = &g0_inv * &a_tilde;
    Ok(GlobalModel {
        set: set.clone(),
        offsets: off.clone(),
        k,
        countries: blocks,
        g0,
        g0_inv,
        condition,
        intercept,
        f,
        p,
        a_tilde,
        c0,
        b: bl,
        d,
        impact,
        vol_c,
        vol_ups,
        vol_xi,
        q,
        start,
    })
}

/// How posterior draws of different countries are matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DrawSelection {
    /// Draw `d` of every country forms world draw `d`.
    #[default]
    ByIndex,
    /// Independent uniform picks per country.
    Random { seed: u64 },
}

/// Country draw indices for each of `n_models` world draws.
pub fn draw_indices(counts: &[usize], n_models: usize, sel: DrawSelection) -> Vec<Vec<usize>> {
    match sel {
        DrawSelection::ByIndex => (0..n_models)
            .map(|d| counts.iter().map(|&c| d % c).collect())
            .collect(),
        DrawSelection::Random { seed } => (0..n_models)
            .map(|d| {
                let mut rng = StreamRng::seed_from_u64(derive_seed(seed, &[d as u64]));
                counts.iter().map(|&c| rng.random_range(0..c)).collect()
            })
            .collect(),
    }
}

/// Final-state histories of one world draw built from each country's
/// estimation tail.
pub fn final_state(draws: &[&PosteriorDraws], idx: &[usize], lx: usize, lh: usize) -> Result<StartState> {
    let mut x = Vec::with_capacity(lx);
    let mut h = Vec::with_capacity(lh);
    for back in (0..lx).rev() {
        let mut v = Vec::new();
        for d in draws {
            let tail = &d.x_tail;
            if back >= tail.len() {
                return Err(Error::invariant(format!(
                    "{}: {} stored observations, {lx} lags needed",
                    d.spec.id(),
                    tail.len()
                )));
            }
            v.extend(tail[tail.len() - 1 - back].iter());
        }
        x.push(DVector::from_vec(v));
    }
    for back in (0..lh).rev() {
        let mut v = Vec::new();
        for (d, &i) in draws.iter().zip(idx) {
            let tail = &d.draws[i].h_tail;
            // Shorter tails only feed zero coefficients; repeat the oldest.
            let col = tail.ncols().saturating_sub(1 + back);
            v.extend(tail.column(col).iter());
        }
        h.push(DVector::from_vec(v));
    }
    Ok(StartState { x, h })
}

/// Stacks `n_models` world draws in parallel; output order is by draw.
pub fn stack_draws(
    set: &CountrySet,
    links: &LinkMatrices,
    draws: &[PosteriorDraws],
    n_models: usize,
    sel: DrawSelection,
) -> Result<Vec<GlobalModel>> {
    let specs = set.specs();
    if draws.len() != specs.len() || draws.iter().zip(specs).any(|(d, s)| &d.spec != s) {
        return Err(Error::invariant("posterior draws do not follow the country set"));
    }
    if let Some(d) = draws.iter().find(|d| d.is_empty()) {
        return Err(Error::Config(format!("{}: no retained draws", d.spec.id())));
    }
    let counts: Vec<usize> = draws.iter().map(|d| d.len()).collect();
    let lx = specs.iter().map(|s| s.lags().max_x_lag()).max().unwrap_or(1);
    let lh = specs.iter().map(|s| s.lags().max_h_lag()).max().unwrap_or(1);
    let refs: Vec<&PosteriorDraws> = draws.iter().collect();
    draw_indices(&counts, n_models, sel)
        .par_iter()
        .map(|idx| {
            let blocks = draws
                .iter()
                .zip(idx)
                .map(|(d, &i)| CountryBlock {
                    spec: d.spec.clone(),
                    params: d.draws[i].params.clone(),
                    vol: d.draws[i].vol.clone(),
                })
                .collect();
            let start = final_state(&refs, idx, lx, lh)?;
            stack_global(set, links, blocks, start)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
