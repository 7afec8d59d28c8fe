use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sdcs::allocate::BandModel;
use sdcs::codec::AmpConfig;
use sdcs::presets;
use sdcs::sim::{Allocator, Decoder, HmtSettings, ModelSource, PriorFamily, SdDecoder};
use sdcs::Prior;

use crate::error::{CliError, CliResult};

/// A prior given inline or by preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Preset(String),
    Inline(Prior),
}

impl PriorSpec {
    pub fn resolve(&self) -> CliResult<Prior> {
        match self {
            PriorSpec::Inline(p) => Ok(*p),
            PriorSpec::Preset(name) => presets::prior(name).map_err(|_| {
                CliError::input(format!("unknown prior preset {name:?} (known: {})", presets::PRIOR_NAMES.join(", ")))
            }),
        }
    }
}

/// A band model given inline or by preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset(String),
    Inline(BandModel),
}

impl ModelSpec {
    pub fn resolve(&self) -> CliResult<BandModel> {
        match self {
            ModelSpec::Inline(m) => Ok(m.clone()),
            ModelSpec::Preset(name) => presets::band_model(name).map_err(|_| {
                CliError::input(format!("unknown model preset {name:?} (known: {})", presets::MODEL_NAMES.join(", ")))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdCurveConfig {
    pub prior: Option<PriorSpec>,
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for SdCurveConfig {
    fn default() -> Self {
        SdCurveConfig { prior: None, grid_step: sdcs::sd::GRID_STEP, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocateConfig {
    pub model: Option<ModelSpec>,
    /// Estimate the band model from this image instead.
    pub pgm: Option<PathBuf>,
    pub family: PriorFamily,
    /// Resize the model to the bands of a `width × height` image.
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub levels: usize,
    pub budget: Option<usize>,
    pub delta: Option<f64>,
    pub allocator: Allocator,
    pub decoder: Decoder,
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for AllocateConfig {
    fn default() -> Self {
        AllocateConfig {
            model: None,
            pgm: None,
            family: PriorFamily::Gmd,
            width: None,
            height: None,
            levels: 5,
            budget: None,
            delta: None,
            allocator: Allocator::Greedy,
            decoder: Decoder::Bamp,
            grid_step: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub prior: Option<PriorSpec>,
    pub deltas: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub decoder: SdDecoder,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            prior: None,
            deltas: (1..=9).map(|i| i as f64 / 10.0).collect(),
            n: 10_000,
            trials: 20,
            decoder: SdDecoder::Bamp,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    pub input: Option<PathBuf>,
    pub delta: f64,
    /// Estimated from the image when absent.
    pub model_source: Option<ModelSource>,
    pub family: PriorFamily,
    pub allocator: Allocator,
    pub decoder: Decoder,
    pub levels: usize,
    pub grid_step: f64,
    pub amp: AmpConfig,
    pub hmt: HmtSettings,
    pub seed: u64,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            input: None,
            delta: 0.15,
            model_source: None,
            family: PriorFamily::Gmd,
            allocator: Allocator::Greedy,
            decoder: Decoder::Bamp,
            levels: 5,
            grid_step: 0.01,
            amp: AmpConfig::default(),
            hmt: HmtSettings::default(),
            seed: 0,
        }
    }
}

/// The config file's contents, or the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Config { path: path.to_path_buf(), source })
}

/// Fills `slot` from `--preset` unless the config already set it.
pub fn merge_preset<T>(slot: &mut Option<T>, preset: Option<&str>, wrap: impl FnOnce(String) -> T, what: &str) -> CliResult<()> {
    match (slot.is_some(), preset) {
        (true, Some(_)) => Err(CliError::input(format!("both --preset and the config give a {what}"))),
        (false, Some(name)) => {
            *slot = Some(wrap(name.to_string()));
            Ok(())
        }
        _ => Ok(()),
    }
}
