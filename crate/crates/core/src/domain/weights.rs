use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row tolerance for the "rows sum to one" condition.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic, zero-diagonal country linkage matrix. Row `i` holds the
/// weights country `i` puts on each partner when building its foreign
/// variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightMatrixRaw", into = "WeightMatrixRaw")]
pub struct WeightMatrix {
    order: Vec<String>,
    w: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightMatrixRaw {
    order: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<WeightMatrixRaw> for WeightMatrix {
    type Error = Error;
    fn try_from(r: WeightMatrixRaw) -> Result<Self> {
        let n = r.order.len();
        if r.rows.len() != n || r.rows.iter().any(|row| row.len() != n) {
            return Err(Error::invariant("weight matrix is not square in its country order"));
        }
        let w = DMatrix::from_fn(n, n, |i, j| r.rows[i][j]);
        WeightMatrix::new(r.order, w)
    }
}

impl From<WeightMatrix> for WeightMatrixRaw {
    fn from(m: WeightMatrix) -> Self {
        let rows = (0..m.w.nrows())
            .map(|i| m.w.row(i).iter().copied().collect())
            .collect();
        WeightMatrixRaw {
            order: m.order,
            rows,
        }
    }
}

impl WeightMatrix {
    pub fn new(order: Vec<String>, w: DMatrix<f64>) -> Result<Self> {
        let n = order.len();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::invariant(format!(
                "weight matrix is {}x{} for {n} countries",
                w.nrows(),
                w.ncols()
            )));
        }
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::invariant(format!(
                    "w[{i}][{i}] = {} for {}; diagonal must be zero",
                    w[(i, i)],
                    order[i]
                )));
            }
            for j in 0..n {
                let x = w[(i, j)];
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::invariant(format!(
                        "w[{i}][{j}] = {x} outside [0, 1]"
                    )));
                }
            }
            // A single-country world has no partners; its empty row is allowed.
            if n > 1 {
                let sum: f64 = w.row(i).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::invariant(format!(
                        "row {} of the weight matrix sums to {sum}",
                        order[i]
                    )));
                }
            }
        }
        Ok(Self { order, w })
    }

    /// Weight matrix for a world with one country and no partners.
    pub fn single(code: impl Into<String>) -> Self {
        Self {
            order: vec![code.into()],
            w: DMatrix::zeros(1, 1),
        }
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.order.iter().position(|c| c == code)
    }

    /// Reorders rows and columns to follow `order`.
    pub fn reordered(&self, order: &[String]) -> Result<Self> {
        let idx: Vec<usize> = order
            .iter()
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| Error::invariant(format!("{c} not in weight matrix")))
            })
            .collect::<Result<_>>()?;
        if idx.len() != self.n() {
            return Err(Error::invariant("reordering must keep every country"));
        }
        let w = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.w[(idx[i], idx[j])]);
        WeightMatrix::new(order.to_vec(), w)
    }
}
