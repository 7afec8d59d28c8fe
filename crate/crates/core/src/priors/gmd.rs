use rand::RngExt;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::stream_rng;

use super::{normal_pdf, Posterior, VarianceMixture};

/// Two-state zero-mean Gaussian mixture.
///
/// With probability `lambda` a coefficient is in the large state
/// `N(0, sigma_l2)`, otherwise in the small state `N(0, sigma_s2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGmd")]
pub struct GmdPrior {
    pub lambda: f64,
    pub sigma_l2: f64,
    pub sigma_s2: f64,
}

#[derive(Deserialize)]
struct RawGmd {
    lambda: f64,
    sigma_l2: f64,
    sigma_s2: f64,
}

impl TryFrom<RawGmd> for GmdPrior {
    type Error = Error;
    fn try_from(raw: RawGmd) -> Result<Self> {
        GmdPrior::new(raw.lambda, raw.sigma_l2, raw.sigma_s2)
    }
}

impl GmdPrior {
    pub fn new(lambda: f64, sigma_l2: f64, sigma_s2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("activity rate {lambda} outside [0, 1]")));
        }
        if !(sigma_s2.is_finite() && sigma_l2.is_finite()) || sigma_s2 < 0.0 || sigma_l2 < sigma_s2 {
            return Err(Error::invalid(format!(
                "GMD variances must satisfy sigma_l2 >= sigma_s2 >= 0 (got {sigma_l2}, {sigma_s2})"
            )));
        }
        if lambda * sigma_l2 + (1.0 - lambda) * sigma_s2 <= 0.0 {
            return Err(Error::invalid("GMD prior has zero variance"));
        }
        Ok(GmdPrior { lambda, sigma_l2, sigma_s2 })
    }

    /// A single Gaussian expressed as a degenerate mixture.
    pub fn gaussian(variance: f64) -> Result<Self> {
        GmdPrior::new(1.0, variance, variance)
    }

    pub fn variance(&self) -> f64 {
        self.lambda * self.sigma_l2 + (1.0 - self.lambda) * self.sigma_s2
    }

    pub fn is_gaussian(&self) -> bool {
        self.lambda == 1.0 || self.lambda == 0.0 || self.sigma_l2 == self.sigma_s2
    }

    /// `(variance, probability)` of the two states, large first.
    pub(crate) fn states(&self) -> [(f64, f64); 2] {
        [(self.sigma_l2, self.lambda), (self.sigma_s2, 1.0 - self.lambda)]
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.states()
            .iter()
            .filter(|&&(_, p)| p > 0.0)
            .map(|&(s2, p)| p * normal_pdf(x, s2))
            .sum()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        let (sl, ss) = (self.sigma_l2.sqrt(), self.sigma_s2.sqrt());
        (0..n)
            .map(|_| {
                let large = rng.random::<f64>() < self.lambda;
                let z: f64 = rng.sample(StandardNormal);
                if large {
                    sl * z
                } else {
                    ss * z
                }
            })
            .collect()
    }

    /// Posterior of `x` given `y = x + N(0, noise_var)` under this mixture.
    pub fn posterior(&self, y: f64, noise_var: f64) -> Posterior {
        self.posterior_with_activity(y, noise_var, self.lambda)
    }

    /// Posterior using a coefficient-specific activity rate in place of
    /// `self.lambda`.
    pub fn posterior_with_activity(&self, y: f64, noise_var: f64, activity: f64) -> Posterior {
        let tl = self.sigma_l2 + noise_var;
        let ts = self.sigma_s2 + noise_var;
        // log p(y, s) up to a shared constant
        let ll = if activity > 0.0 { activity.ln() - 0.5 * tl.ln() - 0.5 * y * y / tl } else { f64::NEG_INFINITY };
        let ls = if activity < 1.0 { (1.0 - activity).ln() - 0.5 * ts.ln() - 0.5 * y * y / ts } else { f64::NEG_INFINITY };
        let top = ll.max(ls);
        let (el, es) = ((ll - top).exp(), (ls - top).exp());
        let p_large = el / (el + es);
        let p_small = 1.0 - p_large;

        let (gl, gs) = (self.sigma_l2 / tl, self.sigma_s2 / ts);
        let (ml, ms) = (gl * y, gs * y);
        let (vl, vs) = (gl * noise_var, gs * noise_var);
        let mean = p_large * ml + p_small * ms;
        let second = p_large * (vl + ml * ml) + p_small * (vs + ms * ms);
        Posterior { mean, variance: (second - mean * mean).max(0.0), p_large: Some(p_large) }
    }

    /// `E_y[Var(x | y)]` with the `nodes`-point Gauss–Hermite rule per state.
    fn mmse_with(&self, noise_var: f64, nodes: usize) -> f64 {
        let rule = quad::normal_rule(nodes);
        let mut total = 0.0;
        for (s2, p) in self.states() {
            if p == 0.0 {
                continue;
            }
            let scale = (s2 + noise_var).sqrt();
            let e: f64 = rule
                .iter()
                .map(|&(z, w)| w * self.posterior(scale * z, noise_var).variance)
                .sum();
            total += p * e;
        }
        total
    }

    /// `E_y[Var(x | y)]` by composite Gauss–Legendre in `y` on a mesh graded
    /// from the origin, resolving both state scales. `refine` halves widths.
    fn mmse_panels(&self, noise_var: f64, refine: bool) -> f64 {
        let narrow = (if self.lambda < 1.0 { self.sigma_s2 } else { self.sigma_l2 } + noise_var).sqrt();
        let wide = (if self.lambda > 0.0 { self.sigma_l2 } else { self.sigma_s2 } + noise_var).sqrt();
        let (first, ratio, cap) = if refine { (0.01 * narrow, 1.1, 0.125 * wide) } else { (0.02 * narrow, 1.2, 0.25 * wide) };
        let breaks = quad::graded_breaks(0.0, 40.0 * wide, 0.0, first, ratio, cap);
        let density = |y: f64| -> f64 {
            self.states()
                .iter()
                .filter(|s| s.1 > 0.0)
                .map(|&(s2, p)| p * normal_pdf(y, s2 + noise_var))
                .sum()
        };
        2.0 * quad::integrate_panels(&breaks, |y| density(y) * self.posterior(y, noise_var).variance)
    }

    /// Scalar MMSE at noise variance `noise_var`.
    ///
    /// Gauss–Hermite per state (61 nodes, doubled up to 244) while the
    /// relative change stays above 1e-6; widely separated state scales fall
    /// back to a graded Gauss–Legendre mesh in `y` checked the same way.
    pub fn scalar_mmse(&self, noise_var: f64) -> Result<f64> {
        let mut prev = self.mmse_with(noise_var, quad::HERMITE_NODES);
        for k in 1..=2 {
            let next = self.mmse_with(noise_var, quad::HERMITE_NODES * (1 << k));
            let change = (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE);
            if change <= 1e-6 {
                return Ok(next);
            }
            prev = next;
        }
        let coarse = self.mmse_panels(noise_var, false);
        let fine = self.mmse_panels(noise_var, true);
        let change = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
        if change <= 1e-6 {
            Ok(fine)
        } else {
            Err(Error::Quadrature { relative_change: change })
        }
    }

    /// Differential entropy in bits, by adaptive quadrature of `-p log2 p`.
    pub fn differential_entropy(&self) -> Result<f64> {
        if self.sigma_s2 == 0.0 && self.lambda < 1.0 {
            return Err(Error::Degenerate("GMD with a point-mass state has no differential entropy".into()));
        }
        let f = |x: f64| {
            let p = self.pdf(x);
            if p > 0.0 {
                -p * p.log2()
            } else {
                0.0
            }
        };
        let narrow = if self.lambda < 1.0 { self.sigma_s2 } else { self.sigma_l2 }.sqrt();
        let wide = if self.lambda > 0.0 { self.sigma_l2 } else { self.sigma_s2 }.sqrt();
        let breaks = quad::graded_breaks(0.0, 40.0 * wide, 0.0, 0.05 * narrow, 1.5, 0.25 * wide);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            total += quad::adaptive(&f, w[0], w[1], 1e-9)?;
        }
        Ok(2.0 * total)
    }

    /// The two-atom variance mixture; atoms with zero weight are dropped and
    /// coincident variances merged.
    pub fn variance_mixture(&self) -> VarianceMixture {
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(2);
        for (tau, w) in self.states() {
            if w <= 0.0 {
                continue;
            }
            match atoms.last_mut() {
                Some(last) if last.0 == tau => last.1 += w,
                _ => atoms.push((tau, w)),
            }
        }
        VarianceMixture { atoms }
    }
}
