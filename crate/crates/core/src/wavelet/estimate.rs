use log::warn;

use crate::error::{Error, Result};
use crate::priors::{GgdPrior, GmdPrior};

pub const EM_MAX_ITER: usize = 500;
/// Per-sample log-likelihood change that ends EM.
pub const EM_TOL: f64 = 1e-6;
pub const EM_VARIANCE_FLOOR: f64 = 1e-12;

pub const MIN_SAMPLES: usize = 16;

/// A fitted mixture with its log-likelihood after every EM step.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub prior: GmdPrior,
    pub loglik: Vec<f64>,
    pub converged: bool,
}

fn check_band(coeffs: &[f64]) -> Result<f64> {
    if coeffs.len() < MIN_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_SAMPLES} coefficients (got {})", coeffs.len())));
    }
    if coeffs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("coefficients must be finite"));
    }
    let m2 = coeffs.iter().map(|x| x * x).sum::<f64>() / coeffs.len() as f64;
    if m2 == 0.0 {
        return Err(Error::Degenerate("band is identically zero".into()));
    }
    Ok(m2)
}

fn log_normal(x2: f64, var: f64) -> f64 {
    -0.5 * (x2 / var + (2.0 * std::f64::consts::PI * var).ln())
}

/// Zero-mean two-state mixture by EM, started from a split at the median
/// magnitude with `λ = ½`.
pub fn estimate_gmd_trace(coeffs: &[f64], max_iter: usize, tol: f64) -> Result<EmFit> {
    check_band(coeffs)?;
    let x2: Vec<f64> = coeffs.iter().map(|x| x * x).collect();
    let mut sorted = x2.clone();
    sorted.sort_by(f64::total_cmp);
    let half = sorted.len() / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let mut large = mean(&sorted[half..]).max(EM_VARIANCE_FLOOR);
    let mut small = mean(&sorted[..half]).max(EM_VARIANCE_FLOOR);
    let mut lambda: f64 = 0.5;
    let n = x2.len() as f64;
    let mut loglik: Vec<f64> = Vec::new();
    let mut resp = vec![0.0; x2.len()];
    let mut converged = false;
    for _ in 0..max_iter {
        let mut ll = 0.0;
        for (r, &v) in resp.iter_mut().zip(&x2) {
            let a = lambda.ln() + log_normal(v, large);
            let b = (1.0 - lambda).ln() + log_normal(v, small);
            let top = a.max(b);
            let lse = top + ((a - top).exp() + (b - top).exp()).ln();
            *r = (a - lse).exp();
            ll += lse;
        }
        let prev = loglik.last().copied();
        loglik.push(ll);
        if let Some(p) = prev {
            // per sample, so the rule does not depend on the data scale
            if (ll - p).abs() <= tol * n {
                converged = true;
                break;
            }
        }
        let w: f64 = resp.iter().sum();
        let wl: f64 = resp.iter().zip(&x2).map(|(r, v)| r * v).sum();
        let ws: f64 = x2.iter().sum::<f64>() - wl;
        lambda = (w / n).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        large = (wl / w.max(f64::MIN_POSITIVE)).max(EM_VARIANCE_FLOOR);
        small = (ws / (n - w).max(f64::MIN_POSITIVE)).max(EM_VARIANCE_FLOOR);
    }
    if large < small {
        std::mem::swap(&mut large, &mut small);
        lambda = 1.0 - lambda;
    }
    Ok(EmFit { prior: GmdPrior::new(lambda, large, small)?, loglik, converged })
}

/// [`estimate_gmd_trace`] without the trace.
pub fn estimate_gmd(coeffs: &[f64], max_iter: usize, tol: f64) -> Result<GmdPrior> {
    estimate_gmd_trace(coeffs, max_iter, tol).map(|f| f.prior)
}

/// Generalized Gaussian by moment matching: `σ²` is the second moment and
/// `α` solves `Γ(5/α)Γ(1/α)/Γ(3/α)² = m₄/m₂²` on `[0.05, 2]`.
pub fn estimate_ggd(coeffs: &[f64]) -> Result<GgdPrior> {
    let m2 = check_band(coeffs)?;
    let m4 = coeffs.iter().map(|x| x.powi(4)).sum::<f64>() / coeffs.len() as f64;
    let kurt = m4 / (m2 * m2);
    let (lo, hi) = (0.05, 2.0);
    let alpha = if kurt <= GgdPrior::kurtosis(hi) {
        if kurt < 1.8 {
            warn!("sample kurtosis {kurt:.3} is below the feasible range; using alpha = 2");
        }
        hi
    } else if kurt >= GgdPrior::kurtosis(lo) {
        warn!("sample kurtosis {kurt:.3e} exceeds the alpha = {lo} limit; clamping");
        lo
    } else {
        let (mut a, mut b) = (lo, hi);
        let target = kurt.ln();
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            // kurtosis falls as alpha grows
            if GgdPrior::kurtosis(mid).ln() > target {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-13 {
                break;
            }
        }
        0.5 * (a + b)
    };
    GgdPrior::new(alpha, m2)
}
