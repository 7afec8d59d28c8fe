//! Sample-distortion curves: state evolution, lower bounds, convexification
//! and distortion-reduction functions.

mod convex;
mod report;
mod se;
mod spline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{Prior, VarianceMixture, GAUSSIAN_ENTROPY_BITS};

pub use convex::{convexify, lower_hull};
pub use report::{sd_table, write_sd_csv, SdRow, SD_CSV_SCHEMA};
pub use se::{
    delta_grid, sd_curve, sd_curve_with, state_evolution_fixed_point, state_evolution_trace, MmseTable, ScalarMmse,
    SE_MAX_ITER, SE_TOL, TABLE_MAX, TABLE_MIN, TABLE_PER_DECADE,
};

/// Default δ grid step.
pub const GRID_STEP: f64 = 0.005;

/// A sampled map `δ ↦ D(δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdCurve {
    pub deltas: Vec<f64>,
    pub distortions: Vec<f64>,
    pub source_variance: f64,
    pub convexified: bool,
    pub delta_c: Option<f64>,
}

impl SdCurve {
    /// Checks the grid (strictly increasing from 0 to 1), the endpoint values
    /// and monotonicity (up to `1e-7 · variance` of numerical noise).
    pub fn new(deltas: Vec<f64>, distortions: Vec<f64>, source_variance: f64) -> Result<Self> {
        if deltas.len() != distortions.len() || deltas.len() < 2 {
            return Err(Error::Dimension(format!(
                "curve needs matching grids of at least 2 points ({} deltas, {} values)",
                deltas.len(),
                distortions.len()
            )));
        }
        if deltas[0] != 0.0 || deltas[deltas.len() - 1] != 1.0 || deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("curve grid must increase strictly from 0 to 1"));
        }
        if !(source_variance >= 0.0 && source_variance.is_finite()) {
            return Err(Error::invalid("source variance must be finite and nonnegative"));
        }
        if distortions.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid("distortions must be finite and nonnegative"));
        }
        if (distortions[0] - source_variance).abs() > 1e-12 * source_variance.max(1.0) {
            return Err(Error::invalid("distortion at delta = 0 must equal the source variance"));
        }
        if distortions[distortions.len() - 1] > 1e-6 * source_variance {
            return Err(Error::invalid("distortion at delta = 1 must vanish"));
        }
        if distortions.windows(2).any(|w| w[1] > w[0] + 1e-7 * source_variance) {
            return Err(Error::invalid("distortions must be nonincreasing in delta"));
        }
        Ok(SdCurve { deltas, distortions, source_variance, convexified: false, delta_c: None })
    }

    /// The linear-decoder curve `σ² (1 − δ)` on a uniform grid.
    pub fn linear(variance: f64, grid_step: f64) -> Result<Self> {
        let deltas = delta_grid(grid_step)?;
        let distortions = deltas.iter().map(|&d| variance * linear_sd(d)).collect();
        let mut c = SdCurve::new(deltas, distortions, variance)?;
        c.convexified = true;
        Ok(c)
    }

    /// `D(δ)` by linear interpolation on the grid.
    pub fn at(&self, delta: f64) -> f64 {
        let d = delta.clamp(0.0, 1.0);
        let i = self.deltas.partition_point(|&x| x <= d);
        if i == 0 {
            return self.distortions[0];
        }
        if i >= self.deltas.len() {
            return self.distortions[self.deltas.len() - 1];
        }
        let (x0, x1) = (self.deltas[i - 1], self.deltas[i]);
        let (y0, y1) = (self.distortions[i - 1], self.distortions[i]);
        y0 + (y1 - y0) * (d - x0) / (x1 - x0)
    }

    /// `D(δ) / σ²`, or 0 for a zero-variance source.
    pub fn normalized_at(&self, delta: f64) -> f64 {
        if self.source_variance > 0.0 {
            self.at(delta) / self.source_variance
        } else {
            0.0
        }
    }
}

/// Linear (pseudo-inverse) decoder, per unit variance.
pub fn linear_sd(delta: f64) -> f64 {
    1.0 - delta.clamp(0.0, 1.0)
}

/// Entropy-based lower bound from a unit-variance entropy `h_unit` (bits).
pub fn ebb_from_entropy(h_unit: f64, variance: f64, delta: f64) -> f64 {
    if delta >= 1.0 {
        return 0.0;
    }
    let gap = 1.0 - delta;
    variance * gap * (2.0 * (h_unit - GAUSSIAN_ENTROPY_BITS) / gap).exp2()
}

/// Entropy-based lower bound for any Lipschitz decoder.
pub fn ebb(prior: &Prior, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("sampling ratio must lie in [0, 1] (got {delta})")));
    }
    let var = prior.variance();
    let h = match prior.differential_entropy() {
        Ok(h) => h,
        // a point-mass component has entropy -inf and the bound is trivial
        Err(Error::Degenerate(_)) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    Ok(ebb_from_entropy(h - 0.5 * var.log2(), var, delta))
}

/// Model-based bound: the budget `δ` removes the highest-variance mass first
/// and the rest of the mixture contributes its variance.
pub fn mbb(mixture: &VarianceMixture, delta: f64) -> f64 {
    let mut budget = delta.clamp(0.0, 1.0);
    let mut remaining = 0.0;
    for &(tau, w) in &mixture.atoms {
        let spent = budget.min(w);
        budget -= spent;
        remaining += tau * (w - spent);
    }
    if delta >= 1.0 {
        0.0
    } else {
        remaining
    }
}

/// Discretized distortion reduction `η(m) = σ² [D(m/n) − D((m+1)/n)]` for
/// `m = 0..n`, with `D` the curve normalized to unit variance.
pub fn dr_function(curve: &SdCurve, sigma2: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("band size must be at least 1"));
    }
    let inv = 1.0 / n as f64;
    Ok((0..n)
        .map(|m| sigma2 * (curve.normalized_at(m as f64 * inv) - curve.normalized_at((m + 1) as f64 * inv)))
        .collect())
}

/// Bound on the number of partially sampled bands, `β log₂(η(0)/η(1))`.
pub fn partial_band_bound(beta: f64, eta_at_0: f64, eta_at_1: f64) -> Result<f64> {
    if !(eta_at_1 > 0.0 && eta_at_0 >= eta_at_1) || !beta.is_finite() {
        return Err(Error::invalid("partial band bound needs eta(0) >= eta(1) > 0 and a finite decay exponent"));
    }
    Ok(beta * (eta_at_0 / eta_at_1).log2())
}

#[cfg(test)]
mod tests;
