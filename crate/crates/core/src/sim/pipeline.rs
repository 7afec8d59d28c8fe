use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::allocate::{
    greedy_allocate, predicted_distortion, two_gender_allocate, uniform_allocate, Allocation, Band, BandModel, Prediction,
    PSNR_CAP,
};
use crate::codec::{bamp_decode, build_block_encoder, l2_decode, AmpConfig, Encoder, EncoderSpec};
use crate::error::{Error, Result};
use crate::priors::{GmdPrior, Prior};
use crate::sd::{convexify, sd_curve, SdCurve};
use crate::turbo::{turbo_decode_with, HmtParams, TURBO_ITERS};
use crate::wavelet::{
    band_devectorize, band_sizes, band_vectorize, dwt2, estimate_ggd, estimate_gmd, idwt2, quad_tree_index, Image, EM_MAX_ITER,
    EM_TOL, MIN_SAMPLES,
};

use super::{mse, psnr};

/// Schema line heading every turbo trace CSV.
pub const TRACE_CSV_SCHEMA: &str = "# schema: sdcs.turbo_trace/1 iteration,mse,psnr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    Gmd,
    Ggd,
}

/// Where the band statistics come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSource {
    /// Fitted to the image's own coefficients.
    Estimated { family: PriorFamily },
    /// Given priors, resized to the image's band sizes.
    Fixed { model: BandModel },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Allocator {
    Greedy,
    Uniform,
    TwoGender,
    Explicit { m: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    L2,
    Bamp,
    Turbo,
}

/// Tree parameters of the turbo decoder; the root activity is band 1's `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmtSettings {
    pub p11: f64,
    pub p10: f64,
    pub iterations: usize,
}

impl Default for HmtSettings {
    fn default() -> Self {
        HmtSettings { p11: 0.9, p10: 0.1, iterations: TURBO_ITERS }
    }
}

fn default_levels() -> usize {
    5
}

fn default_grid_step() -> f64 {
    0.01
}

/// Everything that determines a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub delta: f64,
    pub model_source: ModelSource,
    pub allocator: Allocator,
    pub decoder: Decoder,
    pub seed: u64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default)]
    pub amp: AmpConfig,
    #[serde(default)]
    pub hmt: HmtSettings,
}

impl PipelineConfig {
    pub fn new(delta: f64, model_source: ModelSource, allocator: Allocator, decoder: Decoder, seed: u64) -> Self {
        PipelineConfig {
            delta,
            model_source,
            allocator,
            decoder,
            seed,
            levels: default_levels(),
            grid_step: default_grid_step(),
            amp: AmpConfig::default(),
            hmt: HmtSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub mse: f64,
    pub psnr: f64,
}

/// Run record: the configuration plus every derived quantity needed to
/// rebuild the measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub width: usize,
    pub height: usize,
    pub budget: usize,
    pub measurements_used: usize,
    pub model: BandModel,
    pub allocation: Allocation,
    pub delta_c: Vec<Option<f64>>,
    pub encoder: EncoderSpec,
    pub predicted: Prediction,
    pub mse: f64,
    pub psnr: f64,
    /// Intensity convention of the PSNR values.
    pub peak: String,
    pub turbo_trace: Vec<TraceRow>,
}

impl PipelineReport {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_CSV_SCHEMA}")?;
        writeln!(out, "iteration,mse,psnr")?;
        for r in &self.turbo_trace {
            writeln!(out, "{},{},{}", r.iteration, r.mse, r.psnr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub reconstruction: Vec<f64>,
    pub report: PipelineReport,
}

/// Convexified per-band curves: linear for the pseudo-inverse decoder, state
/// evolution otherwise. Bands with identical priors share one computation.
pub fn band_curves(model: &BandModel, decoder: Decoder, grid_step: f64) -> Result<Vec<SdCurve>> {
    let mut done: Vec<(Prior, SdCurve)> = Vec::new();
    model
        .bands
        .iter()
        .map(|b| {
            if decoder == Decoder::L2 || b.prior.is_gaussian() {
                return SdCurve::linear(b.prior.variance(), grid_step);
            }
            if let Some((_, c)) = done.iter().find(|(p, _)| *p == b.prior) {
                return Ok(c.clone());
            }
            let (c, _) = convexify(&sd_curve(&b.prior, grid_step)?);
            done.push((b.prior, c.clone()));
            Ok(c)
        })
        .collect()
}

fn estimate_model(bands: &[Vec<f64>], family: PriorFamily) -> Result<BandModel> {
    let model = bands
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let m2 = c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64;
            if m2 == 0.0 {
                return Err(Error::Degenerate(format!("band {i} is identically zero")));
            }
            let prior = match family {
                _ if i == 0 || c.len() < MIN_SAMPLES => Prior::gaussian(m2)?,
                PriorFamily::Gmd => Prior::Gmd(estimate_gmd(c, EM_MAX_ITER, EM_TOL)?),
                PriorFamily::Ggd => Prior::Ggd(estimate_ggd(c)?),
            };
            Band::new(c.len(), prior)
        })
        .collect::<Result<_>>()?;
    BandModel::new(model)
}

/// Runs the chosen allocator; an explicit allocation must spend exactly `budget`.
pub fn run_allocator(model: &BandModel, allocator: &Allocator, budget: usize, curves: &[SdCurve]) -> Result<Allocation> {
    match allocator {
        Allocator::Greedy => greedy_allocate(model, budget, curves),
        Allocator::Uniform => uniform_allocate(model, budget),
        Allocator::TwoGender => two_gender_allocate(model, budget),
        Allocator::Explicit { m } => {
            let a = Allocation::new(model.sizes(), m.clone())?;
            if a.budget != budget {
                return Err(Error::invalid(format!("explicit allocation spends {} samples, budget is {budget}", a.budget)));
            }
            Ok(a)
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sampling ratio {delta} outside (0, 1]")))
    }
}

/// Band model fitted to the image's own `levels`-deep pyramid.
pub fn estimate_band_model(image: &Image, levels: usize, family: PriorFamily) -> Result<BandModel> {
    let p = dwt2(&image.pixels, image.width, image.height, levels)?;
    estimate_model(&band_vectorize(&p), family)
}

/// The band model a configuration uses for `image`.
pub fn pipeline_model(image: &Image, cfg: &PipelineConfig) -> Result<BandModel> {
    match &cfg.model_source {
        ModelSource::Fixed { model } => model.resized(&band_sizes(image.width, image.height, cfg.levels)),
        ModelSource::Estimated { family } => estimate_band_model(image, cfg.levels, *family),
    }
}

/// Transform, model, allocate, encode, decode, invert and score.
pub fn image_pipeline(image: &Image, cfg: &PipelineConfig) -> Result<PipelineRun> {
    check_delta(cfg.delta)?;
    let model = pipeline_model(image, cfg)?;
    let curves = band_curves(&model, cfg.decoder, cfg.grid_step)?;
    image_pipeline_with(image, cfg, &model, &curves)
}

/// [`image_pipeline`] with the band model and its curves supplied, so
/// repeated runs on one model skip the curve computation.
pub fn image_pipeline_with(image: &Image, cfg: &PipelineConfig, model: &BandModel, curves: &[SdCurve]) -> Result<PipelineRun> {
    check_delta(cfg.delta)?;
    let (w, h, levels) = (image.width, image.height, cfg.levels);
    let pyramid = dwt2(&image.pixels, w, h, levels)?;
    let theta = band_vectorize(&pyramid);
    if model.sizes() != pyramid.band_sizes() || curves.len() != model.bands.len() {
        return Err(Error::Dimension("band model does not match the image geometry".into()));
    }
    let total = model.total_size();
    let budget = (cfg.delta * total as f64).round() as usize;
    let allocation = run_allocator(model, &cfg.allocator, budget, curves)?;
    let delta_c: Vec<Option<f64>> = curves.iter().map(|c| c.delta_c).collect();
    let spec = build_block_encoder(&allocation, model, &delta_c, cfg.seed)?;
    let encoder = Encoder::new(spec.clone())?;
    let y = encoder.encode(&theta)?;
    let mut trace = Vec::new();
    let estimate = match cfg.decoder {
        Decoder::L2 => l2_decode(&encoder, &y)?,
        Decoder::Bamp => {
            let priors: Vec<Prior> = model.bands.iter().map(|b| b.prior).collect();
            bamp_decode(&encoder, &y, &priors, &cfg.amp)?.theta
        }
        Decoder::Turbo => {
            let priors = model
                .bands
                .iter()
                .map(|b| match b.prior {
                    Prior::Gmd(g) => Ok(g),
                    Prior::Ggd(_) => Err(Error::invalid("turbo decoding needs GMD band priors")),
                })
                .collect::<Result<Vec<GmdPrior>>>()?;
            let tree = quad_tree_index(w, h, levels)?;
            let params = HmtParams::new(priors[1].lambda, cfg.hmt.p11, cfg.hmt.p10)?;
            turbo_decode_with(&encoder, &y, &priors, &params, &tree, cfg.hmt.iterations, &cfg.amp, |it, est| {
                let e = mse(est, &theta);
                trace.push(TraceRow { iteration: it + 1, mse: e, psnr: crate::allocate::psnr_from_mse(e, PSNR_CAP) });
            })?
        }
    };
    let reconstruction = idwt2(&band_devectorize(&estimate, w, h, levels)?)?;
    let err = mse(std::slice::from_ref(&reconstruction), std::slice::from_ref(&image.pixels));
    let report = PipelineReport {
        config: cfg.clone(),
        width: w,
        height: h,
        budget,
        measurements_used: spec.total_rows(),
        model: model.clone(),
        predicted: predicted_distortion(model, &allocation, curves)?,
        allocation,
        delta_c,
        encoder: spec,
        mse: err,
        psnr: psnr(&reconstruction, &image.pixels, PSNR_CAP)?,
        peak: "unit".into(),
        turbo_trace: trace,
    };
    Ok(PipelineRun { reconstruction, report })
}

/// Outcome of [`esa_search`]: the best allocation found and the PSNR of
/// every accepted step, starting with the base allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsaResult {
    pub allocation: Allocation,
    pub psnr: f64,
    pub trace: Vec<f64>,
}

/// Moves `step` samples at a time from band `from` to band `to` while the
/// reconstruction PSNR keeps increasing.
#[allow(clippy::too_many_arguments)]
pub fn esa_search(
    image: &Image,
    cfg: &PipelineConfig,
    model: &BandModel,
    curves: &[SdCurve],
    base: &Allocation,
    from: usize,
    to: usize,
    step: usize,
) -> Result<EsaResult> {
    base.validate_for(model)?;
    let bands = base.m.len();
    if from == to || from >= bands || to >= bands || step == 0 {
        return Err(Error::invalid(format!("need distinct bands below {bands} and a positive step")));
    }
    let run = |m: &[usize]| -> Result<f64> {
        let mut c = cfg.clone();
        c.allocator = Allocator::Explicit { m: m.to_vec() };
        c.delta = m.iter().sum::<usize>() as f64 / model.total_size() as f64;
        Ok(image_pipeline_with(image, &c, model, curves)?.report.psnr)
    };
    let mut best = base.clone();
    let mut best_psnr = run(&best.m)?;
    let mut trace = vec![best_psnr];
    while best.m[from] >= step && best.m[to] + step <= best.band_sizes[to] {
        let mut m = best.m.clone();
        m[from] -= step;
        m[to] += step;
        let p = run(&m)?;
        if p <= best_psnr {
            break;
        }
        best = Allocation::new(best.band_sizes.clone(), m)?;
        best_psnr = p;
        trace.push(p);
    }
    Ok(EsaResult { allocation: best, psnr: best_psnr, trace })
}
