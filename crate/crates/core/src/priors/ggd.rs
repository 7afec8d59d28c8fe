use std::f64::consts::{LN_2, PI};

use rand::RngExt;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::stream_rng;

use super::{Posterior, VarianceMixture};

/// Generalized Gaussian distribution with shape `alpha` and variance `sigma2`:
/// `p(x) ∝ exp(-|x / (√β σ)|^α)`, `β = Γ(1/α) / Γ(3/α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGgd")]
pub struct GgdPrior {
    pub alpha: f64,
    pub sigma2: f64,
}

#[derive(Deserialize)]
struct RawGgd {
    alpha: f64,
    sigma2: f64,
}

impl TryFrom<RawGgd> for GgdPrior {
    type Error = Error;
    fn try_from(raw: RawGgd) -> Result<Self> {
        GgdPrior::new(raw.alpha, raw.sigma2)
    }
}

/// Quadrature mesh controls. `Mesh::STANDARD` is what the public API uses;
/// `Mesh::REFINED` halves every panel width and serves as the convergence
/// check.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Mesh {
    /// half-width of the likelihood window, in noise standard deviations
    window: f64,
    /// inner panel width cap, in noise standard deviations
    inner_width: f64,
    /// outer panel width cap near the origin, in noise standard deviations
    outer_width: f64,
    /// geometric growth of panel widths away from the origin
    ratio: f64,
}

impl Mesh {
    pub(crate) const STANDARD: Mesh = Mesh { window: 12.0, inner_width: 2.0, outer_width: 0.5, ratio: 1.5 };
    pub(crate) const REFINED: Mesh = Mesh { window: 14.0, inner_width: 1.0, outer_width: 0.25, ratio: 1.22 };
}

impl GgdPrior {
    pub fn new(alpha: f64, sigma2: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("GGD shape must be positive (got {alpha})")));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid(format!("GGD variance must be positive (got {sigma2})")));
        }
        Ok(GgdPrior { alpha, sigma2 })
    }

    pub fn variance(&self) -> f64 {
        self.sigma2
    }

    /// `β = Γ(1/α) / Γ(3/α)`.
    pub fn beta(&self) -> f64 {
        (ln_gamma(1.0 / self.alpha) - ln_gamma(3.0 / self.alpha)).exp()
    }

    /// Scale `√β σ`.
    pub fn scale(&self) -> f64 {
        (self.beta() * self.sigma2).sqrt()
    }

    /// Normalizing constant `α / (2 √β σ Γ(1/α))`.
    fn norm(&self) -> f64 {
        let ln = self.alpha.ln() - (2.0 * self.scale()).ln() - ln_gamma(1.0 / self.alpha);
        ln.exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.norm() * (-(x.abs() / self.scale()).powf(self.alpha)).exp()
    }

    /// Excess-free kurtosis `Γ(5/α) Γ(1/α) / Γ(3/α)²`.
    pub fn kurtosis(alpha: f64) -> f64 {
        (ln_gamma(5.0 / alpha) + ln_gamma(1.0 / alpha) - 2.0 * ln_gamma(3.0 / alpha)).exp()
    }

    /// Magnitude beyond which the remaining probability mass is negligible
    /// (below ~1e-17).
    pub(crate) fn support_limit(&self) -> f64 {
        let shape = 1.0 / self.alpha;
        let g = shape + 12.0 * shape.sqrt() + 45.0;
        self.scale() * g.powf(1.0 / self.alpha)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        let gamma = Gamma::new(1.0 / self.alpha, 1.0).expect("shape checked at construction");
        let (s, inv) = (self.scale(), 1.0 / self.alpha);
        (0..n)
            .map(|_| {
                let mag = s * gamma.sample(&mut rng).powf(inv);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect()
    }

    /// Closed-form differential entropy in bits.
    pub fn differential_entropy(&self) -> f64 {
        let nats = 1.0 / self.alpha + (2.0 * self.scale() / self.alpha).ln() + ln_gamma(1.0 / self.alpha);
        nats / LN_2
    }

    /// `∫ x^k p(x) N(y; x, v) dx` for k = 0, 1, 2.
    pub(crate) fn posterior_integrals(&self, y: f64, noise_var: f64, mesh: Mesh, nodes: &mut Vec<(f64, f64)>) -> [f64; 3] {
        let sd = noise_var.sqrt();
        let limit = self.support_limit();
        let lo = (y - mesh.window * sd).max(-limit);
        let hi = (y + mesh.window * sd).min(limit);
        if hi <= lo {
            return [0.0; 3];
        }
        let first = 1e-10 * self.scale().min(sd);
        let breaks = quad::graded_breaks(lo, hi, 0.0, first, mesh.ratio, mesh.inner_width * sd);
        quad::panel_nodes(&breaks, nodes);

        let (c, s, a) = (self.norm(), self.scale(), self.alpha);
        let gauss = 1.0 / (2.0 * PI * noise_var).sqrt();
        let mut out = [0.0; 3];
        for &(x, w) in nodes.iter() {
            let d = y - x;
            let f = w * c * (-(x.abs() / s).powf(a) - 0.5 * d * d / noise_var).exp() * gauss;
            out[0] += f;
            out[1] += f * x;
            out[2] += f * x * x;
        }
        out
    }

    pub(crate) fn posterior_on(&self, y: f64, noise_var: f64, mesh: Mesh) -> Posterior {
        let mut nodes = Vec::new();
        let [i0, i1, i2] = self.posterior_integrals(y, noise_var, mesh, &mut nodes);
        if i0 <= 0.0 {
            // far outside the prior's support: the likelihood dominates
            return Posterior { mean: y, variance: noise_var, p_large: None };
        }
        let mean = i1 / i0;
        Posterior { mean, variance: (i2 / i0 - mean * mean).max(0.0), p_large: None }
    }

    /// Posterior of `x` given `y = x + N(0, noise_var)`, computed at `|y|`
    /// so the mean is exactly odd in `y`.
    pub fn posterior(&self, y: f64, noise_var: f64) -> Posterior {
        if y == 0.0 {
            let mut nodes = Vec::new();
            let [i0, _, i2] = self.posterior_integrals(0.0, noise_var, Mesh::STANDARD, &mut nodes);
            let variance = if i0 > 0.0 { i2 / i0 } else { noise_var };
            return Posterior { mean: 0.0, variance, p_large: None };
        }
        let post = self.posterior_on(y.abs(), noise_var, Mesh::STANDARD);
        Posterior { mean: post.mean.copysign(y), ..post }
    }

    /// `E_y[Var(x | y)] = ∫ (I₂ - I₁²/I₀) dy`, integrated over `y ≥ 0` and
    /// doubled by symmetry.
    pub(crate) fn mmse_on(&self, noise_var: f64, mesh: Mesh) -> f64 {
        let sd = noise_var.sqrt();
        let y_max = self.support_limit() + mesh.window * sd;
        let near = (2.0 * mesh.window * sd).min(y_max);
        let first = 1e-3 * self.scale().min(sd);
        let mut breaks = quad::graded_breaks(0.0, near, 0.0, first, mesh.ratio.min(1.3), mesh.outer_width * sd);
        if near < y_max {
            let far = quad::graded_breaks(near, y_max, 0.0, first, mesh.ratio.min(1.25), f64::INFINITY);
            breaks.extend_from_slice(&far[1..]);
        }
        let mut outer = Vec::new();
        quad::panel_nodes(&breaks, &mut outer);
        let mut inner = Vec::new();
        let mut total = 0.0;
        for &(y, w) in &outer {
            let [i0, i1, i2] = self.posterior_integrals(y, noise_var, mesh, &mut inner);
            if i0 > 0.0 {
                total += w * (i2 - i1 * i1 / i0).max(0.0);
            }
        }
        2.0 * total
    }

    /// Scalar MMSE checked against a refined mesh.
    pub fn scalar_mmse(&self, noise_var: f64) -> Result<f64> {
        let coarse = self.mmse_on(noise_var, Mesh::STANDARD);
        let fine = self.mmse_on(noise_var, Mesh::REFINED);
        let change = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
        if change > 1e-6 {
            return Err(Error::Quadrature { relative_change: change });
        }
        Ok(fine)
    }

    /// Scale-mixture-of-Gaussians representation on a log-spaced variance
    /// grid.
    ///
    /// With `u = 1/(2τ)` the density, as a function of `s = x²`, is the
    /// Laplace transform `c₁ exp(-s^{α/2} / c₂)` of `h(u) = p(τ) / (2u²) ·
    /// sqrt(u/π)`. `h` is recovered by Gaver–Stehfest for `α ≤ 1`; for
    /// `1 < α < 2` Stehfest breaks down and `h` is evaluated as a scaled
    /// positive `α/2`-stable density through Zolotarev's integral.
    ///
    /// The mixing density concentrates around `σ²` as `α → 2`; beyond
    /// `α ≈ 1.8` a finer grid than [`MIXTURE_GRID`] is needed (about 2300
    /// points at 1.95).
    pub fn variance_mixture(&self, grid_size: usize) -> Result<VarianceMixture> {
        if self.alpha == 2.0 {
            return Ok(VarianceMixture { atoms: vec![(self.sigma2, 1.0)] });
        }
        if self.alpha > 2.0 {
            return Err(Error::invalid(format!(
                "GGD with shape {} > 2 is not a Gaussian scale mixture",
                self.alpha
            )));
        }
        if grid_size < 2 {
            return Err(Error::invalid("variance mixture needs at least two grid points"));
        }
        let (c1, c2) = (self.norm(), self.scale().powf(self.alpha));
        let rho = 0.5 * self.alpha;
        let laplace = |s: f64| c1 * (-s.powf(rho) / c2).exp();
        let weights_v = stehfest_weights(STEHFEST_ORDER);
        // LT exp(-(k s)^ρ) with k = c₂^{-1/ρ} is the law of k·U, U standard stable
        let k = c2.powf(-1.0 / rho);
        let h = |u: f64| -> f64 {
            if self.alpha <= 1.0 {
                let sum: f64 = weights_v
                    .iter()
                    .enumerate()
                    .map(|(i, vk)| vk * laplace((i + 1) as f64 * LN_2 / u))
                    .sum();
                sum * LN_2 / u
            } else {
                c1 * positive_stable_pdf(u / k, rho) / k
            }
        };

        let (lo, hi) = (MIXTURE_TAU_MIN.ln(), MIXTURE_TAU_MAX.ln());
        let step = (hi - lo) / (grid_size - 1) as f64;
        let mut atoms = Vec::with_capacity(grid_size);
        for i in 0..grid_size {
            let tau = (lo + step * i as f64).exp() * self.sigma2;
            let u = 0.5 / tau;
            // p(τ) = h(u) · 2u² / sqrt(u/π); mass on the log grid ≈ p(τ) τ Δln τ
            let density = h(u) * 2.0 * u * u / (u / PI).sqrt();
            let w = (density * tau * step).max(0.0);
            atoms.push((tau, if w.is_finite() { w } else { 0.0 }));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("inverse Laplace produced no positive mass".into()));
        }
        atoms.retain(|a| a.1 > 0.0);
        atoms.iter_mut().for_each(|a| a.1 /= total);
        atoms.reverse();
        Ok(VarianceMixture { atoms })
    }
}

/// Density of the positive stable law with Laplace transform `exp(-s^ρ)`,
/// `0 < ρ < 1`, by Zolotarev's integral representation.
pub fn positive_stable_pdf(x: f64, rho: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let e = 1.0 / (1.0 - rho);
    let a = |phi: f64| ((rho * phi).sin().powf(rho) * ((1.0 - rho) * phi).sin().powf(1.0 - rho) / phi.sin()).powf(e);
    let scale = x.powf(-rho * e);
    let breaks: Vec<f64> = (0..=64).map(|i| PI * i as f64 / 64.0).collect();
    let integral = quad::integrate_panels(&breaks, |phi| {
        let v = a(phi);
        v * (-scale * v).exp()
    });
    let out = rho * e / PI * x.powf(-e) * integral;
    if out.is_finite() {
        out
    } else {
        0.0
    }
}

/// Gaver–Stehfest order.
pub const STEHFEST_ORDER: usize = 14;
/// Variance grid for the GGD mixture, relative to `sigma2`.
pub const MIXTURE_TAU_MIN: f64 = 1e-20;
pub const MIXTURE_TAU_MAX: f64 = 1e4;
/// Default number of grid points (24 per decade).
pub const MIXTURE_GRID: usize = 577;

/// Stehfest coefficients `V_k`, k = 1..=n (n even).
pub fn stehfest_weights(n: usize) -> Vec<f64> {
    assert!(n.is_multiple_of(2) && n > 0, "Stehfest order must be even");
    let half = n / 2;
    let fact = |k: usize| gamma(k as f64 + 1.0);
    (1..=n)
        .map(|k| {
            let mut s = 0.0;
            for j in k.div_ceil(2)..=k.min(half) {
                s += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half).is_multiple_of(2) {
                s
            } else {
                -s
            }
        })
        .collect()
}
