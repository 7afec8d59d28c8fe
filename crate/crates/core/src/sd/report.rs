use std::io::Write;

use crate::error::Result;
use crate::priors::{Prior, MIXTURE_GRID};

use super::{convexify, ebb, linear_sd, mbb, sd_curve, SdCurve};

/// Schema line heading every SD-curve CSV.
pub const SD_CSV_SCHEMA: &str = "# schema: sdcs.sd_curve/1 delta,sd_bamp,ebb,mbb,sd_convexified,linear";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdRow {
    pub delta: f64,
    pub sd_bamp: f64,
    pub ebb: f64,
    pub mbb: f64,
    pub sd_convexified: f64,
    pub linear: f64,
}

/// Curve, bounds and envelope of `prior` on one grid, plus `δc`.
pub fn sd_table(prior: &Prior, grid_step: f64) -> Result<(Vec<SdRow>, SdCurve, SdCurve)> {
    let raw = sd_curve(prior, grid_step)?;
    let (hull, _) = convexify(&raw);
    let mixture = prior.variance_mixture(MIXTURE_GRID)?;
    let var = prior.variance();
    // ebb(δ) / (1 − δ) at δ = 0 carries the entropy term once
    let base = ebb(prior, 0.0)? / var.max(f64::MIN_POSITIVE);
    let rows = raw
        .deltas
        .iter()
        .zip(&raw.distortions)
        .zip(&hull.distortions)
        .map(|((&delta, &sd), &env)| {
            Ok(SdRow {
                delta,
                sd_bamp: sd,
                ebb: if delta < 1.0 { var * (1.0 - delta) * base.powf(1.0 / (1.0 - delta)) } else { 0.0 },
                mbb: mbb(&mixture, delta),
                sd_convexified: env,
                linear: var * linear_sd(delta),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, raw, hull))
}

pub fn write_sd_csv<W: Write>(mut out: W, rows: &[SdRow]) -> Result<()> {
    writeln!(out, "{SD_CSV_SCHEMA}")?;
    writeln!(out, "delta,sd_bamp,ebb,mbb,sd_convexified,linear")?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.delta, r.sd_bamp, r.ebb, r.mbb, r.sd_convexified, r.linear
        )?;
    }
    Ok(())
}
