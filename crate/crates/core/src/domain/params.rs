use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spec::{CountrySpec, VariableKind};
use crate::error::{Error, Result};

/// Unit-lower-triangular impact matrix `Ã = A⁻¹` mapping structural shocks
/// into reduced-form residuals, `u = Ã ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IdentRaw", into = "IdentRaw")]
pub struct IdentificationMatrix {
    a_tilde: DMatrix<f64>,
    ordering: Vec<VariableKind>,
}

#[derive(Serialize, Deserialize)]
struct IdentRaw {
    a_tilde: DMatrix<f64>,
    ordering: Vec<VariableKind>,
}

impl TryFrom<IdentRaw> for IdentificationMatrix {
    type Error = Error;
    fn try_from(r: IdentRaw) -> Result<Self> {
        IdentificationMatrix::new(r.a_tilde, r.ordering)
    }
}

impl From<IdentificationMatrix> for IdentRaw {
    fn from(m: IdentificationMatrix) -> Self {
        IdentRaw {
            a_tilde: m.a_tilde,
            ordering: m.ordering,
        }
    }
}

impl IdentificationMatrix {
    pub fn new(a_tilde: DMatrix<f64>, ordering: Vec<VariableKind>) -> Result<Self> {
        let k = ordering.len();
        if a_tilde.nrows() != k || a_tilde.ncols() != k {
            return Err(Error::invariant(format!(
                "identification matrix is {}x{} for {k} variables",
                a_tilde.nrows(),
                a_tilde.ncols()
            )));
        }
        for i in 0..k {
            if a_tilde[(i, i)] != 1.0 {
                return Err(Error::invariant(format!(
                    "identification matrix diagonal ({i},{i}) = {}, must be 1",
                    a_tilde[(i, i)]
                )));
            }
            for j in i + 1..k {
                if a_tilde[(i, j)] != 0.0 {
                    return Err(Error::invariant(format!(
                        "identification matrix entry ({i},{j}) above the diagonal is nonzero"
                    )));
                }
            }
        }
        if a_tilde.iter().any(|x| !x.is_finite()) {
            return Err(Error::invariant("identification matrix has non-finite entries"));
        }
        Ok(Self { a_tilde, ordering })
    }

    pub fn identity(ordering: Vec<VariableKind>) -> Self {
        let k = ordering.len();
        Self {
            a_tilde: DMatrix::identity(k, k),
            ordering,
        }
    }

    /// Builds `Ã` from the structural matrix `A` (unit lower triangular).
    pub fn from_structural(a: &DMatrix<f64>, ordering: Vec<VariableKind>) -> Result<Self> {
        let k = a.nrows();
        let mut inv = DMatrix::identity(k, k);
        // Forward substitution, column by column.
        for col in 0..k {
            for i in col + 1..k {
                let mut s = 0.0;
                for j in col..i {
                    s += a[(i, j)] * inv[(j, col)];
                }
                inv[(i, col)] = -s;
            }
        }
        IdentificationMatrix::new(inv, ordering)
    }

    pub fn a_tilde(&self) -> &DMatrix<f64> {
        &self.a_tilde
    }

    pub fn ordering(&self) -> &[VariableKind] {
        &self.ordering
    }

    pub fn k(&self) -> usize {
        self.ordering.len()
    }

    /// Structural matrix `A = Ã⁻¹`.
    pub fn structural(&self) -> DMatrix<f64> {
        IdentificationMatrix::from_structural(&self.a_tilde, self.ordering.clone())
            .expect("inverse of a unit lower triangular matrix is unit lower triangular")
            .a_tilde
    }

    /// Solves `Ã ε = u` for the structural shocks.
    pub fn structural_shocks(&self, u: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut eps = vec![0.0; k];
        for i in 0..k {
            let mut s = u[i];
            for j in 0..i {
                s -= self.a_tilde[(i, j)] * eps[j];
            }
            eps[i] = s;
        }
        eps
    }

    /// `Ω = Ã diag(exp h) Ã'`.
    pub fn omega(&self, h: &[f64]) -> DMatrix<f64> {
        let k = self.k();
        let scaled = DMatrix::from_fn(k, k, |i, j| self.a_tilde[(i, j)] * h[j].exp());
        &scaled * self.a_tilde.transpose()
    }

    /// True when every listed (row, col) entry of `Ã` is non-positive.
    pub fn satisfies_signs(&self, entries: &[(usize, usize)]) -> bool {
        entries.iter().all(|&(r, c)| self.a_tilde[(r, c)] <= 0.0)
    }
}

/// Level-equation coefficients of one country (one posterior draw).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryParameters {
    /// `a`
    pub intercept: DVector<f64>,
    /// `Φ_1..Φ_p`, each k × k.
    pub domestic: Vec<DMatrix<f64>>,
    /// `Λ_0..Λ_q`, each k × k*.
    pub foreign: Vec<DMatrix<f64>>,
    /// `Ψ_0..Ψ_s`, each k × k.
    pub vol_in_mean: Vec<DMatrix<f64>>,
    pub ident: IdentificationMatrix,
}

impl CountryParameters {
    /// All-zero coefficients with `Ã = I`.
    pub fn zeros(spec: &CountrySpec) -> Self {
        let (k, ks, l) = (spec.k(), spec.k_star(), spec.lags());
        Self {
            intercept: DVector::zeros(k),
            domestic: vec![DMatrix::zeros(k, k); l.p],
            foreign: vec![DMatrix::zeros(k, ks); l.q + 1],
            vol_in_mean: vec![DMatrix::zeros(k, k); l.s + 1],
            ident: IdentificationMatrix::identity(spec.domestic().to_vec()),
        }
    }

    pub fn validate(&self, spec: &CountrySpec) -> Result<()> {
        let (k, ks, l) = (spec.k(), spec.k_star(), spec.lags());
        let id = spec.id();
        let check = |name: &str, mats: &[DMatrix<f64>], n: usize, r: usize, c: usize| {
            if mats.len() != n {
                return Err(Error::invariant(format!(
                    "{id}: {name} has {} lag matrices, expected {n}",
                    mats.len()
                )));
            }
            for (i, m) in mats.iter().enumerate() {
                if m.shape() != (r, c) {
                    return Err(Error::invariant(format!(
                        "{id}: {name}[{i}] is {:?}, expected ({r}, {c})",
                        m.shape()
                    )));
                }
            }
            Ok(())
        };
        if self.intercept.len() != k {
            return Err(Error::invariant(format!("{id}: intercept length {} != {k}", self.intercept.len())));
        }
        check("domestic", &self.domestic, l.p, k, k)?;
        check("foreign", &self.foreign, l.q + 1, k, ks)?;
        check("vol_in_mean", &self.vol_in_mean, l.s + 1, k, k)?;
        if self.ident.ordering() != spec.domestic() {
            return Err(Error::invariant(format!(
                "{id}: identification ordering does not match the domestic variables"
            )));
        }
        Ok(())
    }
}

/// Log-volatility transition coefficients of one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityParameters {
    /// `c`
    pub intercept: DVector<f64>,
    /// `Υ_1..Υ_m`, each k × k.
    pub vol_lags: Vec<DMatrix<f64>>,
    /// `Ξ_1..Ξ_q`, each k × k.
    pub macro_feedback: Vec<DMatrix<f64>>,
    /// Diagonal of `Q`.
    pub innovation_var: DVector<f64>,
}

impl VolatilityParameters {
    pub fn validate(&self, spec: &CountrySpec) -> Result<()> {
        let (k, l, id) = (spec.k(), spec.lags(), spec.id());
        if self.intercept.len() != k || self.innovation_var.len() != k {
            return Err(Error::invariant(format!("{id}: volatility vectors must have length {k}")));
        }
        if self.vol_lags.len() != l.m || self.vol_lags.iter().any(|m| m.shape() != (k, k)) {
            return Err(Error::invariant(format!("{id}: expected {} k x k volatility lag matrices", l.m)));
        }
        if self.macro_feedback.len() != l.q || self.macro_feedback.iter().any(|m| m.shape() != (k, k)) {
            return Err(Error::invariant(format!("{id}: expected {} k x k macro feedback matrices", l.q)));
        }
        if let Some(j) = self.innovation_var.iter().position(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(Error::invariant(format!(
                "{id}: Q[{j}] = {} must be strictly positive",
                self.innovation_var[j]
            )));
        }
        Ok(())
    }

    /// Unconditional mean of `h` given a level mean `x̄`, when `I - ΣΥ` is
    /// invertible.
    pub fn mean_log_vol(&self, x_mean: &DVector<f64>) -> Option<DVector<f64>> {
        let k = self.intercept.len();
        let mut lhs = DMatrix::<f64>::identity(k, k);
        for u in &self.vol_lags {
            lhs -= u;
        }
        let mut rhs = self.intercept.clone();
        for xi in &self.macro_feedback {
            rhs += xi * x_mean;
        }
        lhs.lu().solve(&rhs)
    }
}

/// Path of log structural-shock volatilities. Column `τ` is `h` at path
/// position `τ`; the first `presample` columns precede the estimation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVolPath {
    pub presample: usize,
    pub h: DMatrix<f64>,
}

impl LatentVolPath {
    pub fn new(presample: usize, h: DMatrix<f64>) -> Result<Self> {
        if h.ncols() < presample {
            return Err(Error::invariant("volatility path shorter than its presample"));
        }
        if let Some(i) = h.iter().position(|x| !x.is_finite()) {
            return Err(Error::invariant(format!(
                "non-finite log volatility at column {}",
                i / h.nrows().max(1)
            )));
        }
        Ok(Self { presample, h })
    }

    pub fn k(&self) -> usize {
        self.h.nrows()
    }

    /// Number of in-sample periods.
    pub fn sample_len(&self) -> usize {
        self.h.ncols() - self.presample
    }

    /// In-sample log volatility at period `t` (0-based within the sample).
    pub fn at(&self, t: usize) -> Vec<f64> {
        self.h.column(self.presample + t).iter().copied().collect()
    }

    /// `Ω_t = Ã H_t Ã'` for in-sample period `t`.
    pub fn omega(&self, ident: &IdentificationMatrix, t: usize) -> DMatrix<f64> {
        ident.omega(&self.at(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VariableKind::*;

    fn ordering() -> Vec<VariableKind> {
        vec![ShortRate, OutputGrowth, Inflation]
    }

    #[test]
    fn ident_rejects_non_triangular() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 2)] = 0.1;
        assert!(IdentificationMatrix::new(m, ordering()).is_err());
        let mut d = DMatrix::identity(3, 3);
        d[(1, 1)] = 2.0;
        assert!(IdentificationMatrix::new(d, ordering()).is_err());
    }

    #[test]
    fn structural_round_trip() {
        let at = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, -0.3, 1.0, 0.0, -0.2, 0.4, 1.0]);
        let id = IdentificationMatrix::new(at.clone(), ordering()).unwrap();
        let a = id.structural();
        let prod = &a * &at;
        assert!((prod - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-14);
        let u = [0.5, -1.0, 2.0];
        let eps = id.structural_shocks(&u);
        let back = &at * DVector::from_column_slice(&eps);
        for i in 0..3 {
            assert!((back[i] - u[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn omega_is_spd() {
        let at = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, -0.3, 1.0, 0.0, -0.2, 0.4, 1.0]);
        let id = IdentificationMatrix::new(at, ordering()).unwrap();
        let om = id.omega(&[-1.0, 0.5, 2.0]);
        assert!((om.clone() - om.transpose()).abs().max() < 1e-14);
        assert!(om.cholesky().is_some());
    }

    #[test]
    fn sign_check() {
        let at = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, -0.3, 1.0, 0.0, 0.2, 0.4, 1.0]);
        let id = IdentificationMatrix::new(at, ordering()).unwrap();
        assert!(id.satisfies_signs(&[(1, 0)]));
        assert!(!id.satisfies_signs(&[(1, 0), (2, 0)]));
    }

    #[test]
    fn q_must_be_positive() {
        let spec = CountrySpec::origin("USA", Default::default(), false).unwrap();
        let vp = VolatilityParameters {
            intercept: DVector::zeros(3),
            vol_lags: vec![DMatrix::zeros(3, 3)],
            macro_feedback: vec![DMatrix::zeros(3, 3)],
            innovation_var: DVector::from_vec(vec![0.1, 0.0, 0.1]),
        };
        assert!(vp.validate(&spec).unwrap_err().to_string().contains("Q[1]"));
    }
}
