use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{CountrySet, WeightMatrix};
use crate::error::{Error, Result};

/// Per-country maps from the stacked vector `x_t` to `x_it` (selection)
/// and `x*_it` (weights against partner variables of the same kind).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMatrices {
    pub order: Vec<String>,
    pub offsets: Vec<usize>,
    pub k: usize,
    /// `E_i`, k_i × k.
    pub select: Vec<DMatrix<f64>>,
    /// `W̃_i`, k*_i × k.
    pub foreign: Vec<DMatrix<f64>>,
}

impl LinkMatrices {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn domestic(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.select[i] * x
    }

    pub fn foreign_of(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.foreign[i] * x
    }
}

pub fn build_links(w: &WeightMatrix, set: &CountrySet) -> Result<LinkMatrices> {
    let ids = set.ids();
    let w = if w.order() == ids.as_slice() { w.clone() } else { w.reordered(&ids)? };
    let offsets = set.offsets();
    let k = set.total_k();
    let specs = set.specs();
    let mut select = Vec::with_capacity(specs.len());
    let mut foreign = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let mut e = DMatrix::zeros(spec.k(), k);
        for r in 0..spec.k() {
            e[(r, offsets[i] + r)] = 1.0;
        }
        select.push(e);
        let mut wt = DMatrix::zeros(spec.k_star(), k);
        for (r, &v) in spec.foreign().iter().enumerate() {
            for (j, other) in specs.iter().enumerate() {
                let wij = w.get(i, j);
                if j == i || wij == 0.0 {
                    continue;
                }
                let pos = other.position(v).ok_or_else(|| Error::MissingPartnerVariable {
                    country: spec.id().to_string(),
                    partner: other.id().to_string(),
                    variable: v.to_string(),
                    weight: wij,
                })?;
                wt[(r, offsets[j] + pos)] = wij;
            }
        }
        foreign.push(wt);
    }
    Ok(LinkMatrices {
        order: ids,
        offsets,
        k,
        select,
        foreign,
    })
}
