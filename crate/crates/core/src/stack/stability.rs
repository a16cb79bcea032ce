use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::GlobalModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub spectral_radius: f64,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub flagged: bool,
}

/// Companion matrix of the level recursion `x_t = Σ_l B_l x_{t-l}`.
/// Volatility terms enter only the intercept once `h` is held at its mean,
/// so they do not affect the spectrum.
pub fn companion(b: &[DMatrix<f64>]) -> DMatrix<f64> {
    let k = b.first().map_or(0, |m| m.nrows());
    let l = b.len();
    let mut c = DMatrix::zeros(k * l, k * l);
    for (i, m) in b.iter().enumerate() {
        c.view_mut((0, i * k), (k, k)).copy_from(m);
    }
    for i in 1..l {
        c.view_mut((i * k, (i - 1) * k), (k, k)).fill_with_identity();
    }
    c
}

pub fn check_stability(model: &GlobalModel) -> StabilityReport {
    spectrum(&companion(&model.b))
}

pub fn spectrum(c: &DMatrix<f64>) -> StabilityReport {
    let ev = c.complex_eigenvalues();
    let eigenvalues: Vec<(f64, f64)> = ev.iter().map(|z| (z.re, z.im)).collect();
    let spectral_radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    StabilityReport {
        spectral_radius,
        eigenvalues,
        flagged: !(spectral_radius < 1.0),
    }
}

/// One row per world draw.
pub fn stability_csv(reports: &[StabilityReport]) -> String {
    let mut s = String::from("draw,spectral_radius,flagged\n");
    for (d, r) in reports.iter().enumerate() {
        s.push_str(&format!("{d},{:.12},{}\n", r.spectral_radius, r.flagged));
    }
    s
}
