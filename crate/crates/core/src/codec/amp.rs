use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{GmdPrior, Posterior, Prior};

use super::{Block, Encoder, Matrix};

pub const AMP_MAX_ITER: usize = 500;
/// Relative change of the estimate that ends a BAMP run.
pub const AMP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Weight of the new estimate in `(0, 1]`; 1 means no damping.
    pub damping: f64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig { max_iter: AMP_MAX_ITER, tol: AMP_TOL, damping: 1.0 }
    }
}

impl AmpConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || !(self.tol > 0.0) || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("AMP needs max_iter >= 1, tol > 0 and damping in (0, 1]"));
        }
        Ok(())
    }
}

/// Trace of one Gaussian-block BAMP run.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRun {
    pub iterations: usize,
    /// Mean posterior variance of the sensed coefficients after each
    /// iteration: the decoder's own MSE prediction.
    pub mse_track: Vec<f64>,
    /// Effective noise variance `‖r‖²/m` used in the last iteration.
    pub noise_var: f64,
    /// Pseudo-data `x + Aᵀr` fed to the last denoising step.
    pub pseudo: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BampOutput {
    pub theta: Vec<Vec<f64>>,
    /// `None` for identity and zero blocks.
    pub runs: Vec<Option<BandRun>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftOutput {
    pub output: BampOutput,
    /// Per coefficient `[p(obs | s = 1), p(obs | s = 0)]`, normalized to sum
    /// to one; `[½, ½]` where nothing was observed.
    pub likelihoods: Vec<Vec<[f64; 2]>>,
}

fn log_normal(x: f64, var: f64) -> f64 {
    let var = var.max(f64::MIN_POSITIVE);
    -0.5 * (x * x / var + (2.0 * std::f64::consts::PI * var).ln())
}

/// `[N(w; 0, σ_L² + v), N(w; 0, σ_S² + v)]` scaled to sum to one.
pub(crate) fn state_likelihoods(w: f64, sigma_l2: f64, sigma_s2: f64, noise_var: f64) -> [f64; 2] {
    let (l1, l0) = (log_normal(w, sigma_l2 + noise_var), log_normal(w, sigma_s2 + noise_var));
    let p1 = 1.0 / (1.0 + (l0 - l1).exp());
    [p1, 1.0 - p1]
}

fn amp_band<F>(a: &Matrix, y: &[f64], energy: f64, cfg: &AmpConfig, denoise: F) -> Result<(Vec<f64>, BandRun)>
where
    F: Fn(usize, f64, f64) -> Posterior + Sync,
{
    let (m, s) = (a.rows(), a.cols());
    let delta = m as f64 / s as f64;
    let mut x = vec![0.0; s];
    let mut r = y.to_vec();
    let mut run = BandRun { iterations: 0, mse_track: Vec::new(), noise_var: 0.0, pseudo: vec![0.0; s] };
    let mut atr = a.apply_t(&r);
    for t in 0..cfg.max_iter {
        let v = r.iter().map(|e| e * e).sum::<f64>() / m as f64;
        if !v.is_finite() || v * delta > 10.0 * energy {
            return Err(Error::Divergence { iteration: t, mse: v * delta, energy });
        }
        if v <= 1e-30 * energy.max(f64::MIN_POSITIVE) {
            break;
        }
        let pseudo: Vec<f64> = x.iter().zip(&atr).map(|(a, b)| a + b).collect();
        let post: Vec<Posterior> = pseudo.par_iter().enumerate().map(|(i, &p)| denoise(i, p, v)).collect();
        let avg_var = post.iter().map(|p| p.variance).sum::<f64>() / s as f64;
        if !avg_var.is_finite() || avg_var > 10.0 * energy {
            return Err(Error::Divergence { iteration: t, mse: avg_var, energy });
        }
        let beta = cfg.damping;
        let next: Vec<f64> = post.iter().zip(&x).map(|(p, &old)| beta * p.mean + (1.0 - beta) * old).collect();
        let onsager = avg_var / v / delta;
        atr = a.residual_and_back(&next, y, onsager, &mut r);
        let diff = next.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        x = next;
        run.iterations = t + 1;
        run.mse_track.push(avg_var);
        run.noise_var = v;
        run.pseudo = pseudo;
        if diff <= cfg.tol * norm {
            break;
        }
    }
    Ok((x, run))
}

fn denoise_with(prior: &Prior, y: f64, v: f64) -> Posterior {
    match prior {
        Prior::Gmd(p) => p.posterior(y, v),
        Prior::Ggd(p) => p.posterior(y, v),
    }
}

/// Bandwise Bayesian AMP with the scalar MMSE denoiser of each band's prior.
/// Identity blocks return their measurements; zero blocks and zeroed
/// columns return the prior mean 0.
pub fn bamp_decode(encoder: &Encoder, y: &[Vec<f64>], priors: &[Prior], cfg: &AmpConfig) -> Result<BampOutput> {
    cfg.validate()?;
    encoder.check_measurements(y)?;
    if priors.len() != encoder.blocks.len() {
        return Err(Error::Dimension(format!("{} priors for {} bands", priors.len(), encoder.blocks.len())));
    }
    let bands = encoder
        .blocks
        .par_iter()
        .zip(y)
        .zip(priors)
        .map(|((block, yb), prior)| match block {
            Block::Identity(_) => Ok((yb.clone(), None)),
            Block::Zero(n) => Ok((vec![0.0; *n], None)),
            Block::Gaussian { n, matrix } => {
                let (mut x, run) = amp_band(matrix, yb, prior.variance(), cfg, |_, p, v| denoise_with(prior, p, v))?;
                x.resize(*n, 0.0);
                Ok((x, Some(run)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (theta, runs) = bands.into_iter().unzip();
    Ok(BampOutput { theta, runs })
}

/// BAMP with a per-coefficient activity rate in each band's GMD denoiser.
/// Also returns state likelihoods of every coefficient: at the final
/// effective noise level for Gaussian blocks and noise-free for identity
/// blocks.
pub fn bamp_decode_soft(
    encoder: &Encoder,
    y: &[Vec<f64>],
    priors: &[GmdPrior],
    activity: &[Vec<f64>],
    cfg: &AmpConfig,
) -> Result<SoftOutput> {
    cfg.validate()?;
    encoder.check_measurements(y)?;
    if priors.len() != encoder.blocks.len() || activity.len() != encoder.blocks.len() {
        return Err(Error::Dimension("priors and activity rates must cover every band".into()));
    }
    for (a, b) in activity.iter().zip(&encoder.blocks) {
        if a.len() != b.n() {
            return Err(Error::Dimension(format!("{} activity rates for a {}-coefficient band", a.len(), b.n())));
        }
        if a.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::invalid("activity rates must lie in [0, 1]"));
        }
    }
    let bands = encoder
        .blocks
        .par_iter()
        .zip(y)
        .zip(priors)
        .zip(activity)
        .map(|(((block, yb), prior), lam)| {
            let lik = |w: f64, v: f64| state_likelihoods(w, prior.sigma_l2, prior.sigma_s2, v);
            match block {
                Block::Identity(_) => Ok((yb.clone(), None, yb.iter().map(|&w| lik(w, 0.0)).collect())),
                Block::Zero(n) => Ok((vec![0.0; *n], None, vec![[0.5, 0.5]; *n])),
                Block::Gaussian { n, matrix } => {
                    let (mut x, run) =
                        amp_band(matrix, yb, prior.variance(), cfg, |i, p, v| prior.posterior_with_activity(p, v, lam[i]))?;
                    x.resize(*n, 0.0);
                    let mut l: Vec<[f64; 2]> = run.pseudo.iter().map(|&w| lik(w, run.noise_var)).collect();
                    l.resize(*n, [0.5, 0.5]);
                    Ok((x, Some(run), l))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut theta = Vec::new();
    let mut runs = Vec::new();
    let mut likelihoods = Vec::new();
    for (t, r, l) in bands {
        theta.push(t);
        runs.push(r);
        likelihoods.push(l);
    }
    Ok(SoftOutput { output: BampOutput { theta, runs }, likelihoods })
}
