use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_BAND_DRAWS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: Vec<f64>,
    pub median: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Linear interpolation between order statistics (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise median and central `coverage` band over draws
/// (`per_draw[d][h]`).
pub fn bands(per_draw: &[Vec<f64>], coverage: f64) -> Result<Band> {
    if per_draw.len() < MIN_BAND_DRAWS {
        return Err(Error::TooFewDraws {
            got: per_draw.len(),
            need: MIN_BAND_DRAWS,
        });
    }
    if !(0.0..1.0).contains(&coverage) {
        return Err(Error::Config(format!("band coverage {coverage} must lie in [0, 1)")));
    }
    let len = per_draw[0].len();
    if per_draw.iter().any(|d| d.len() != len) {
        return Err(Error::invariant("draws have different horizons"));
    }
    let (plo, phi) = ((1.0 - coverage) / 2.0, (1.0 + coverage) / 2.0);
    let mut out = Band {
        lo: Vec::with_capacity(len),
        median: Vec::with_capacity(len),
        hi: Vec::with_capacity(len),
    };
    let mut col = vec![0.0; per_draw.len()];
    for h in 0..len {
        for (c, d) in col.iter_mut().zip(per_draw) {
            *c = d[h];
        }
        col.sort_by(f64::total_cmp);
        let med = quantile_sorted(&col, 0.5);
        if coverage == 0.0 {
            out.lo.push(med);
            out.hi.push(med);
        } else {
            out.lo.push(quantile_sorted(&col, plo).min(med));
            out.hi.push(quantile_sorted(&col, phi).max(med));
        }
        out.median.push(med);
    }
    Ok(out)
}
