use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use sdcs::allocate::{predicted_distortion, water_level, Allocation, BandModel, Prediction};
use sdcs::sd::{ebb, mbb, sd_table, state_evolution_fixed_point, write_sd_csv, MmseTable, SE_MAX_ITER, SE_TOL};
use sdcs::sim::{
    band_curves, estimate_band_model, image_pipeline_with, monte_carlo_sd, pipeline_model, run_allocator, McEstimate,
    ModelSource, PipelineConfig, PipelineReport, SdDecoder, SIMULATION_CSV_SCHEMA,
};
use sdcs::wavelet::{band_sizes, read_pgm, write_pgm, Image};
use sdcs::priors::MIXTURE_GRID;
use sdcs::Prior;

use crate::config::{merge_preset, AllocateConfig, ImageConfig, ModelSpec, PriorSpec, SdCurveConfig, SimulateConfig};
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

/// Flags shared by every subcommand.
pub struct Common<'a> {
    pub preset: Option<&'a str>,
    pub seed: Option<u64>,
    pub out: &'a OutDir,
}

fn require<T>(slot: Option<T>, what: &str) -> CliResult<T> {
    slot.ok_or_else(|| CliError::input(format!("no {what} given (use --preset or the config)")))
}

fn read_image(path: &Path) -> CliResult<Image> {
    let file = File::open(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    Ok(read_pgm(BufReader::new(file))?)
}

#[derive(Serialize)]
struct SdCurveRecord<'a> {
    config: &'a SdCurveConfig,
    prior: Prior,
    delta_c: Option<f64>,
}

pub fn sd_curve(mut cfg: SdCurveConfig, common: &Common) -> CliResult<()> {
    merge_preset(&mut cfg.prior, common.preset, PriorSpec::Preset, "prior")?;
    cfg.seed = common.seed.unwrap_or(cfg.seed);
    let prior = require(cfg.prior.as_ref(), "prior")?.resolve()?;
    let (rows, _, hull) = sd_table(&prior, cfg.grid_step)?;
    common.out.write_with("sd_curve.csv", |buf| write_sd_csv(buf, &rows))?;
    common.out.write_json("sd_curve.json", &SdCurveRecord { config: &cfg, prior, delta_c: hull.delta_c })?;
    match hull.delta_c {
        Some(d) => println!("delta_c = {d}"),
        None => println!("delta_c = none (convex curve)"),
    }
    Ok(())
}

#[derive(Serialize)]
struct AllocateRecord<'a> {
    config: &'a AllocateConfig,
    model: &'a BandModel,
    allocation: &'a Allocation,
    prediction: Prediction,
    water_level: Option<f64>,
    delta_c: Vec<Option<f64>>,
}

fn allocate_model(cfg: &AllocateConfig) -> CliResult<BandModel> {
    let model = match (&cfg.model, &cfg.pgm) {
        (Some(_), Some(_)) => return Err(CliError::input("give either a model or a pgm, not both")),
        (Some(spec), None) => spec.resolve()?,
        (None, Some(path)) => estimate_band_model(&read_image(path)?, cfg.levels, cfg.family)?,
        (None, None) => return Err(CliError::input("no band model given (use --preset, model or pgm)")),
    };
    match (cfg.width, cfg.height) {
        (None, None) => Ok(model),
        (Some(w), Some(h)) => Ok(model.resized(&band_sizes(w, h, cfg.levels))?),
        _ => Err(CliError::input("width and height must be given together")),
    }
}

pub fn allocate(mut cfg: AllocateConfig, common: &Common) -> CliResult<()> {
    merge_preset(&mut cfg.model, common.preset, ModelSpec::Preset, "model")?;
    cfg.seed = common.seed.unwrap_or(cfg.seed);
    let model = allocate_model(&cfg)?;
    let total = model.total_size();
    let budget = match (cfg.budget, cfg.delta) {
        (Some(_), Some(_)) => return Err(CliError::input("give either budget or delta, not both")),
        (Some(b), None) => b,
        (None, Some(d)) if d > 0.0 && d <= 1.0 => (d * total as f64).round() as usize,
        (None, Some(d)) => return Err(CliError::input(format!("delta {d} outside (0, 1]"))),
        (None, None) => return Err(CliError::input("no budget or delta given")),
    };
    let curves = band_curves(&model, cfg.decoder, cfg.grid_step)?;
    let allocation = run_allocator(&model, &cfg.allocator, budget, &curves)?;
    let prediction = predicted_distortion(&model, &allocation, &curves)?;
    let water = water_level(&model, &allocation, &curves)?;
    common.out.write_with("allocation.csv", |buf| allocation.write_csv(buf))?;
    common.out.write_json(
        "allocation.json",
        &AllocateRecord {
            config: &cfg,
            model: &model,
            allocation: &allocation,
            prediction,
            water_level: water,
            delta_c: curves.iter().map(|c| c.delta_c).collect(),
        },
    )?;
    println!("budget {budget} of {total}; predicted psnr {:.3} dB", prediction.psnr);
    Ok(())
}

/// Reference value for the simulated decoder: linear for the pseudo-inverse,
/// the state-evolution fixed point for BAMP, and the larger of the two lower
/// bounds for the oracle decoder.
fn theoretical(prior: &Prior, table: Option<&MmseTable>, delta: f64, decoder: SdDecoder) -> sdcs::Result<f64> {
    match decoder {
        SdDecoder::L2 => Ok(prior.variance() * (1.0 - delta)),
        SdDecoder::Bamp => match table {
            Some(t) => state_evolution_fixed_point(t, delta, SE_TOL, SE_MAX_ITER),
            None => state_evolution_fixed_point(prior, delta, SE_TOL, SE_MAX_ITER),
        },
        SdDecoder::BampSoftOracle => {
            let mixture = prior.variance_mixture(MIXTURE_GRID)?;
            Ok(ebb(prior, delta)?.max(mbb(&mixture, delta)))
        }
    }
}

#[derive(Serialize)]
struct SimulationRow {
    delta: f64,
    empirical: McEstimate,
    theoretical: f64,
}

#[derive(Serialize)]
struct SimulateRecord<'a> {
    config: &'a SimulateConfig,
    prior: Prior,
    rows: &'a [SimulationRow],
}

pub fn simulate(mut cfg: SimulateConfig, common: &Common) -> CliResult<()> {
    merge_preset(&mut cfg.prior, common.preset, PriorSpec::Preset, "prior")?;
    cfg.seed = common.seed.unwrap_or(cfg.seed);
    let prior = require(cfg.prior.as_ref(), "prior")?.resolve()?;
    if cfg.deltas.is_empty() {
        return Err(CliError::input("deltas is empty"));
    }
    let table = match (prior, cfg.decoder) {
        (Prior::Ggd(_), SdDecoder::Bamp) => Some(MmseTable::new(prior)?),
        _ => None,
    };
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for (i, &delta) in cfg.deltas.iter().enumerate() {
        let empirical = monte_carlo_sd(&prior, delta, cfg.n, cfg.trials, cfg.decoder, sdcs::rng::child_seed(cfg.seed, i as u64))?;
        let theoretical = theoretical(&prior, table.as_ref(), delta, cfg.decoder)?;
        log::info!("delta {delta}: empirical {:e} ± {:e}, theoretical {theoretical:e}", empirical.mean, empirical.std_error);
        rows.push(SimulationRow { delta, empirical, theoretical });
    }
    common.out.write_with("simulation.csv", |buf| {
        writeln!(buf, "{SIMULATION_CSV_SCHEMA}")?;
        writeln!(buf, "delta,empirical,theoretical,stderr")?;
        for r in &rows {
            writeln!(buf, "{},{:e},{:e},{:e}", r.delta, r.empirical.mean, r.theoretical, r.empirical.std_error)?;
        }
        Ok(())
    })?;
    common.out.write_json("simulate.json", &SimulateRecord { config: &cfg, prior, rows: &rows })?;
    for r in &rows {
        println!("{:.3}  {:.6e}  {:.6e}", r.delta, r.empirical.mean, r.theoretical);
    }
    Ok(())
}

#[derive(Serialize)]
struct ImageRecord<'a> {
    input: &'a Path,
    report: &'a PipelineReport,
}

pub fn image(mut cfg: ImageConfig, input: Option<PathBuf>, common: &Common) -> CliResult<()> {
    if let Some(name) = common.preset {
        if cfg.model_source.is_some() {
            return Err(CliError::input("both --preset and the config give a model"));
        }
        let model = ModelSpec::Preset(name.to_string()).resolve()?;
        cfg.model_source = Some(ModelSource::Fixed { model });
    }
    if input.is_some() {
        cfg.input = input;
    }
    let input = require(cfg.input.clone(), "input image")?;
    let img = read_image(&input)?;
    let pipeline = PipelineConfig {
        delta: cfg.delta,
        model_source: cfg.model_source.clone().unwrap_or(ModelSource::Estimated { family: cfg.family }),
        allocator: cfg.allocator.clone(),
        decoder: cfg.decoder,
        seed: common.seed.unwrap_or(cfg.seed),
        levels: cfg.levels,
        grid_step: cfg.grid_step,
        amp: cfg.amp,
        hmt: cfg.hmt,
    };
    if !(pipeline.delta > 0.0 && pipeline.delta <= 1.0) {
        return Err(CliError::input(format!("delta {} outside (0, 1]", pipeline.delta)));
    }
    let model = pipeline_model(&img, &pipeline)?;
    let curves = band_curves(&model, pipeline.decoder, pipeline.grid_step)?;
    let run = image_pipeline_with(&img, &pipeline, &model, &curves)?;
    let recon = Image::new(img.width, img.height, run.reconstruction)?;
    common.out.write_with("reconstruction.pgm", |buf| write_pgm(buf, &recon))?;
    common.out.write_json("report.json", &ImageRecord { input: &input, report: &run.report })?;
    if !run.report.turbo_trace.is_empty() {
        common.out.write_with("turbo_trace.csv", |buf| run.report.write_trace_csv(buf))?;
    }
    println!("psnr {:.3} dB (predicted {:.3} dB)", run.report.psnr, run.report.predicted.psnr);
    Ok(())
}
