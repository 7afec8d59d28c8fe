//! Block-diagonal bandwise encoder and the BAMP and pseudo-inverse decoders.

mod amp;
mod l2;
mod matrix;

use serde::{Deserialize, Serialize};

use crate::allocate::{Allocation, BandModel};
use crate::error::{Error, Result};
use crate::rng::child_seed;

pub(crate) use amp::state_likelihoods;
pub use amp::{bamp_decode, bamp_decode_soft, AmpConfig, BampOutput, BandRun, SoftOutput, AMP_MAX_ITER, AMP_TOL};
pub use l2::l2_decode;
pub use matrix::Matrix;

/// How one band is measured. Zeroed columns of a Gaussian block are the
/// trailing `n - sensed` coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlockSpec {
    Identity { n: usize },
    Gaussian { n: usize, m: usize, sensed: usize, seed: u64 },
    Zero { n: usize },
}

impl BlockSpec {
    pub fn n(&self) -> usize {
        match *self {
            BlockSpec::Identity { n } | BlockSpec::Gaussian { n, .. } | BlockSpec::Zero { n } => n,
        }
    }

    /// Number of measurements taken of the band.
    pub fn rows(&self) -> usize {
        match *self {
            BlockSpec::Identity { n } => n,
            BlockSpec::Gaussian { m, .. } => m,
            BlockSpec::Zero { .. } => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BlockSpec::Gaussian { n, m, sensed, .. } if !(1 <= m && m <= sensed && sensed <= n) => Err(Error::invalid(
                format!("gaussian block needs 1 <= m <= sensed <= n (got m {m}, sensed {sensed}, n {n})"),
            )),
            b if b.n() == 0 => Err(Error::invalid("blocks must cover at least one coefficient")),
            _ => Ok(()),
        }
    }
}

/// Per-band measurement plan; serializes to JSON so a run can be rebuilt
/// from its configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub blocks: Vec<BlockSpec>,
}

impl EncoderSpec {
    pub fn new(blocks: Vec<BlockSpec>) -> Result<Self> {
        for b in &blocks {
            b.validate()?;
        }
        Ok(EncoderSpec { blocks })
    }

    pub fn total_rows(&self) -> usize {
        self.blocks.iter().map(BlockSpec::rows).sum()
    }
}

/// Encoder for an allocation. A partially sampled band whose ratio is below
/// its critical ratio `δc` senses only `round(m/δc)` coefficients (so those
/// are sampled at `δc`) and zeroes the rest.
pub fn build_block_encoder(
    allocation: &Allocation,
    model: &BandModel,
    delta_c: &[Option<f64>],
    seed: u64,
) -> Result<EncoderSpec> {
    allocation.validate_for(model)?;
    if delta_c.len() != allocation.m.len() {
        return Err(Error::Dimension(format!("{} critical ratios for {} bands", delta_c.len(), allocation.m.len())));
    }
    let blocks = allocation
        .m
        .iter()
        .zip(&allocation.band_sizes)
        .zip(delta_c)
        .enumerate()
        .map(|(i, ((&m, &n), dc))| {
            if m == n {
                return Ok(BlockSpec::Identity { n });
            }
            if m == 0 {
                return Ok(BlockSpec::Zero { n });
            }
            let sensed = match *dc {
                Some(dc) if !(dc > 0.0 && dc <= 1.0) => {
                    return Err(Error::invalid(format!("critical ratio {dc} of band {i} outside (0, 1]")))
                }
                Some(dc) if (m as f64) < dc * n as f64 => ((m as f64 / dc).round() as usize).clamp(m, n),
                _ => n,
            };
            Ok(BlockSpec::Gaussian { n, m, sensed, seed: child_seed(seed, i as u64) })
        })
        .collect::<Result<_>>()?;
    EncoderSpec::new(blocks)
}

/// A band's measurement operator.
#[derive(Debug, Clone)]
pub enum Block {
    Identity(usize),
    Gaussian { n: usize, matrix: Matrix },
    Zero(usize),
}

impl Block {
    pub fn n(&self) -> usize {
        match self {
            Block::Identity(n) | Block::Zero(n) | Block::Gaussian { n, .. } => *n,
        }
    }
}

/// Materialized encoder: Gaussian entries i.i.d. `N(0, 1/m)`.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub blocks: Vec<Block>,
}

impl Encoder {
    pub fn new(spec: EncoderSpec) -> Result<Self> {
        let spec = EncoderSpec::new(spec.blocks)?;
        let blocks = spec
            .blocks
            .iter()
            .map(|b| match *b {
                BlockSpec::Identity { n } => Block::Identity(n),
                BlockSpec::Zero { n } => Block::Zero(n),
                BlockSpec::Gaussian { n, m, sensed, seed } => Block::Gaussian { n, matrix: Matrix::gaussian(m, sensed, seed) },
            })
            .collect();
        Ok(Encoder { spec, blocks })
    }

    fn check_bands(&self, theta: &[Vec<f64>]) -> Result<()> {
        if theta.len() != self.blocks.len() || theta.iter().zip(&self.blocks).any(|(t, b)| t.len() != b.n()) {
            return Err(Error::Dimension("band vectors do not match the encoder".into()));
        }
        Ok(())
    }

    /// `y = Φ θ`, band by band.
    pub fn encode(&self, theta: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_bands(theta)?;
        Ok(self
            .blocks
            .iter()
            .zip(theta)
            .map(|(b, t)| match b {
                Block::Identity(_) => t.clone(),
                Block::Zero(_) => Vec::new(),
                Block::Gaussian { matrix, .. } => matrix.apply(&t[..matrix.cols()]),
            })
            .collect())
    }

    pub(crate) fn check_measurements(&self, y: &[Vec<f64>]) -> Result<()> {
        if y.len() != self.blocks.len() || y.iter().zip(&self.spec.blocks).any(|(v, b)| v.len() != b.rows()) {
            return Err(Error::Dimension("measurements do not match the encoder".into()));
        }
        Ok(())
    }
}
