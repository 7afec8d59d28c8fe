//! Monte Carlo harness: empirical sample-distortion points, synthetic images
//! drawn from band models, the end-to-end image pipeline and the empirical
//! reallocation search.

mod pipeline;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocate::BandModel;
use crate::codec::{bamp_decode, bamp_decode_soft, l2_decode, AmpConfig, BlockSpec, Encoder, EncoderSpec};
use crate::error::{Error, Result};
use crate::priors::Prior;
use crate::rng::child_seed;
use crate::turbo::{hmt_sample, soft_information, HmtParams};
use crate::wavelet::{band_devectorize, band_sizes, idwt2, quad_tree_index};

pub use pipeline::{
    band_curves, esa_search, estimate_band_model, image_pipeline, image_pipeline_with, pipeline_model, run_allocator, Allocator, Decoder, EsaResult, HmtSettings, ModelSource,
    PipelineConfig, PipelineReport, PipelineRun, PriorFamily, TraceRow, TRACE_CSV_SCHEMA,
};

/// Minimum source length for a Monte Carlo point.
pub const MIN_MC_LENGTH: usize = 1000;

/// Schema line heading every simulation CSV.
pub const SIMULATION_CSV_SCHEMA: &str = "# schema: sdcs.simulation/1 delta,empirical,theoretical,stderr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdDecoder {
    Bamp,
    /// BAMP fed per-coefficient activity rates computed from the true
    /// coefficients.
    BampSoftOracle,
    L2,
}

/// Mean per-component squared error over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: Vec<f64>,
}

impl McEstimate {
    pub fn from_trials(trials: Vec<f64>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::invalid("need at least one trial"));
        }
        let k = trials.len() as f64;
        let mean = trials.iter().sum::<f64>() / k;
        let std_error = if trials.len() > 1 {
            (trials.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        Ok(McEstimate { mean, std_error, trials })
    }
}

/// Per-component squared error `‖a − b‖² / n` over band vectors.
pub fn mse(estimate: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let n: usize = truth.iter().map(Vec::len).sum();
    let sq: f64 = estimate.iter().zip(truth).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2))).sum();
    sq / n as f64
}

/// `10 log₁₀(N / ‖x̂ − x‖²)` for unit-peak images, capped at `cap`.
pub fn psnr(estimate: &[f64], truth: &[f64], cap: f64) -> Result<f64> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(Error::Dimension(format!("{} pixels against {}", estimate.len(), truth.len())));
    }
    let sq: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(if sq <= 0.0 { cap } else { (10.0 * (truth.len() as f64 / sq).log10()).min(cap) })
}

fn one_trial(prior: &Prior, delta: f64, n: usize, decoder: SdDecoder, seed: u64) -> Result<f64> {
    let m = (delta * n as f64).round() as usize;
    let x = prior.sample(n, child_seed(seed, 0))?;
    let enc = Encoder::new(EncoderSpec::new(vec![BlockSpec::Gaussian { n, m, sensed: n, seed: child_seed(seed, 1) }])?)?;
    let y = enc.encode(std::slice::from_ref(&x))?;
    let cfg = AmpConfig::default();
    let est = match decoder {
        SdDecoder::L2 => l2_decode(&enc, &y)?,
        SdDecoder::Bamp => bamp_decode(&enc, &y, &[*prior], &cfg)?.theta,
        SdDecoder::BampSoftOracle => {
            let Prior::Gmd(g) = prior else {
                return Err(Error::invalid("the soft-information oracle needs a GMD prior"));
            };
            let lam = x.iter().map(|&w| soft_information(w, g.sigma_l2, g.sigma_s2)).collect::<Result<Vec<_>>>()?;
            bamp_decode_soft(&enc, &y, &[*g], &[lam], &cfg)?.output.theta
        }
    };
    Ok(mse(&est, std::slice::from_ref(&x)))
}

/// Empirical sample distortion at ratio `delta`: each trial draws a fresh
/// source and a fresh `round(δn) × n` Gaussian matrix. Trial `t` uses seed
/// `child_seed(seed, t)`, so the result is independent of scheduling.
pub fn monte_carlo_sd(prior: &Prior, delta: f64, n: usize, trials: usize, decoder: SdDecoder, seed: u64) -> Result<McEstimate> {
    if n < MIN_MC_LENGTH {
        return Err(Error::invalid(format!("source length must be at least {MIN_MC_LENGTH} (got {n})")));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if !(delta > 0.0 && delta <= 1.0) || (delta * n as f64).round() < 1.0 {
        return Err(Error::invalid(format!("sampling ratio {delta} must lie in (0, 1] and give at least one sample")));
    }
    let mses = (0..trials as u64)
        .into_par_iter()
        .map(|t| one_trial(prior, delta, n, decoder, child_seed(seed, t)))
        .collect::<Result<Vec<_>>>()?;
    McEstimate::from_trials(mses)
}

/// Image whose band `i` is drawn i.i.d. from the prior of band `i`.
pub fn synthetic_image(model: &BandModel, width: usize, height: usize, levels: usize, seed: u64) -> Result<Vec<f64>> {
    let sizes = band_sizes(width, height, levels);
    let model = model.resized(&sizes)?;
    let bands = model
        .bands
        .iter()
        .enumerate()
        .map(|(i, b)| b.prior.sample(b.n, child_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    idwt2(&band_devectorize(&bands, width, height, levels)?)
}

/// Image whose detail states follow a hidden Markov tree; state variances
/// of each scale come from that band's GMD prior and the scaling band from
/// its own prior. Root activity is band 1's `λ`.
pub fn hmt_image(model: &BandModel, p11: f64, p10: f64, width: usize, height: usize, levels: usize, seed: u64) -> Result<Vec<f64>> {
    let sizes = band_sizes(width, height, levels);
    let model = model.resized(&sizes)?;
    let tree = quad_tree_index(width, height, levels)?;
    let gmd = |b: &crate::allocate::Band| match b.prior {
        Prior::Gmd(g) => Ok(g),
        Prior::Ggd(_) => Err(Error::invalid("tree-structured images need GMD band priors")),
    };
    let details = model.bands[1..].iter().map(gmd).collect::<Result<Vec<_>>>()?;
    let params = HmtParams::new(details[0].lambda, p11, p10)?;
    let variances: Vec<(f64, f64)> = details.iter().map(|g| (g.sigma_l2, g.sigma_s2)).collect();
    let (_, coeffs) = hmt_sample(&params, &tree, &variances, child_seed(seed, 1))?;
    let mut bands = vec![model.bands[0].prior.sample(sizes[0], child_seed(seed, 0))?];
    for w in tree.offsets.windows(2) {
        bands.push(coeffs[w[0]..w[1]].to_vec());
    }
    idwt2(&band_devectorize(&bands, width, height, levels)?)
}
