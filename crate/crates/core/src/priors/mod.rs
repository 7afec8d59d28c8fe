//! Scalar compressive priors: two-state Gaussian mixtures and generalized
//! Gaussians, with MMSE denoisers, entropies and variance-mixture forms.

pub(crate) mod ggd;
mod gmd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ggd::{positive_stable_pdf, stehfest_weights, GgdPrior, MIXTURE_GRID, MIXTURE_TAU_MAX, MIXTURE_TAU_MIN, STEHFEST_ORDER};
pub use gmd::GmdPrior;

/// `½ log₂(2πe)`: entropy in bits of a unit-variance Gaussian.
pub const GAUSSIAN_ENTROPY_BITS: f64 = 2.047_095_585_180_641_5;

pub fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Posterior summary for a scalar observation in Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
    /// Posterior probability of the large state (mixture priors only).
    pub p_large: Option<f64>,
}

/// A compressive scalar prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Prior {
    Gmd(GmdPrior),
    Ggd(GgdPrior),
}

impl From<GmdPrior> for Prior {
    fn from(p: GmdPrior) -> Self {
        Prior::Gmd(p)
    }
}

impl From<GgdPrior> for Prior {
    fn from(p: GgdPrior) -> Self {
        Prior::Ggd(p)
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var.is_finite() && noise_var > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise variance must be positive and finite (got {noise_var})")))
    }
}

impl Prior {
    /// Gaussian of the given variance, as a degenerate GMD.
    pub fn gaussian(variance: f64) -> Result<Self> {
        Ok(Prior::Gmd(GmdPrior::gaussian(variance)?))
    }

    pub fn variance(&self) -> f64 {
        match self {
            Prior::Gmd(p) => p.variance(),
            Prior::Ggd(p) => p.variance(),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        match self {
            Prior::Gmd(p) => p.is_gaussian(),
            Prior::Ggd(p) => p.alpha == 2.0,
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::invalid(format!("density evaluated at non-finite point {x}")));
        }
        Ok(match self {
            Prior::Gmd(p) => p.pdf(x),
            Prior::Ggd(p) => p.pdf(x),
        })
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        Ok(match self {
            Prior::Gmd(p) => p.sample(n, seed),
            Prior::Ggd(p) => p.sample(n, seed),
        })
    }

    /// Full posterior of `x` given `y = x + N(0, noise_var)`.
    pub fn posterior(&self, y: f64, noise_var: f64) -> Result<Posterior> {
        check_noise(noise_var)?;
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite observation {y}")));
        }
        Ok(match self {
            Prior::Gmd(p) => p.posterior(y, noise_var),
            Prior::Ggd(p) => p.posterior(y, noise_var),
        })
    }

    /// Posterior mean and (for mixtures) the posterior large-state probability.
    pub fn mmse_denoise(&self, y: f64, noise_var: f64) -> Result<(f64, Option<f64>)> {
        let post = self.posterior(y, noise_var)?;
        Ok((post.mean, post.p_large))
    }

    /// `E[(E[x | y] - x)²]` for `y = x + N(0, noise_var)`.
    pub fn scalar_mmse(&self, noise_var: f64) -> Result<f64> {
        check_noise(noise_var)?;
        match self {
            Prior::Gmd(p) => p.scalar_mmse(noise_var),
            Prior::Ggd(p) => p.scalar_mmse(noise_var),
        }
    }

    /// Differential entropy in bits.
    pub fn differential_entropy(&self) -> Result<f64> {
        match self {
            Prior::Gmd(p) => p.differential_entropy(),
            Prior::Ggd(p) => Ok(p.differential_entropy()),
        }
    }

    /// Variance-mixture representation; `grid_size` only matters for GGD.
    pub fn variance_mixture(&self, grid_size: usize) -> Result<VarianceMixture> {
        match self {
            Prior::Gmd(p) => Ok(p.variance_mixture()),
            Prior::Ggd(p) => p.variance_mixture(grid_size),
        }
    }

    /// The same prior with every variance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self {
            Prior::Gmd(p) => Ok(Prior::Gmd(GmdPrior::new(p.lambda, p.sigma_l2 * factor, p.sigma_s2 * factor)?)),
            Prior::Ggd(p) => Ok(Prior::Ggd(GgdPrior::new(p.alpha, p.sigma2 * factor)?)),
        }
    }
}

/// A discrete scale mixture of zero-mean Gaussians, `Σ w N(0, τ)`, atoms
/// sorted by `τ` descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceMixture {
    pub atoms: Vec<(f64, f64)>,
}

impl VarianceMixture {
    /// Validates weights (sum to one within 1e-8) and ordering. A zero-variance
    /// atom is allowed in last position (point mass at the origin).
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("variance mixture needs at least one atom"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-8 || atoms.iter().any(|a| !(a.1 >= 0.0)) {
            return Err(Error::invalid(format!("mixture weights must be nonnegative and sum to 1 (sum {total})")));
        }
        if atoms.iter().any(|a| !(a.0 >= 0.0 && a.0.is_finite())) || atoms.windows(2).any(|w| w[1].0 >= w[0].0) {
            return Err(Error::invalid("mixture variances must be finite, nonnegative and strictly decreasing"));
        }
        Ok(VarianceMixture { atoms })
    }

    pub fn variance(&self) -> f64 {
        self.atoms.iter().map(|&(t, w)| t * w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Density of the mixture; a zero-variance atom contributes nothing off
    /// the origin.
    pub fn pdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.0 > 0.0)
            .map(|&(t, w)| w * normal_pdf(x, t))
            .sum()
    }
}
