use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::priors::Prior;

use super::spline::NaturalSpline;
use super::SdCurve;

/// Anything that can report `mmse(v)` for the state-evolution recursion.
pub trait ScalarMmse: Sync {
    fn variance(&self) -> f64;
    fn mmse(&self, noise_var: f64) -> Result<f64>;
}

impl ScalarMmse for Prior {
    fn variance(&self) -> f64 {
        Prior::variance(self)
    }
    fn mmse(&self, noise_var: f64) -> Result<f64> {
        self.scalar_mmse(noise_var)
    }
}

/// Tabulated `mmse(v)` for priors whose exact evaluation is expensive.
///
/// Stores `ln(mmse(v)/v)` against `ln v` on a log grid and interpolates with
/// a natural cubic spline; values outside the grid fall back to the prior.
#[derive(Debug, Clone)]
pub struct MmseTable {
    prior: Prior,
    spline: NaturalSpline,
}

/// Grid of the table, relative to the prior variance.
pub const TABLE_MIN: f64 = 1e-9;
pub const TABLE_MAX: f64 = 1e7;
pub const TABLE_PER_DECADE: usize = 12;

impl MmseTable {
    pub fn new(prior: Prior) -> Result<Self> {
        let var = prior.variance();
        let (lo, hi) = (TABLE_MIN.log10(), TABLE_MAX.log10());
        let count = ((hi - lo) * TABLE_PER_DECADE as f64).round() as usize + 1;
        let xs: Vec<f64> = (0..count)
            .map(|i| ((lo + (hi - lo) * i as f64 / (count - 1) as f64) * std::f64::consts::LN_10).exp() * var)
            .map(f64::ln)
            .collect();
        let ys = xs
            .par_iter()
            .map(|&lv| {
                let v = lv.exp();
                let m = fast_mmse(&prior, v)?;
                Ok((m / v).ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(MmseTable { prior, spline: NaturalSpline::new(xs, ys) })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }
}

/// Unchecked single-mesh evaluation used to fill tables.
fn fast_mmse(prior: &Prior, v: f64) -> Result<f64> {
    match prior {
        Prior::Ggd(g) => Ok(g.mmse_on(v, crate::priors::ggd::Mesh::STANDARD)),
        other => other.scalar_mmse(v),
    }
}

impl ScalarMmse for MmseTable {
    fn variance(&self) -> f64 {
        self.prior.variance()
    }
    fn mmse(&self, noise_var: f64) -> Result<f64> {
        let lv = noise_var.ln();
        let (a, b) = self.spline.domain();
        if lv < a || lv > b {
            return self.prior.scalar_mmse(noise_var);
        }
        Ok(noise_var * self.spline.eval(lv).exp())
    }
}

/// Default state-evolution settings.
pub const SE_TOL: f64 = 1e-8;
pub const SE_MAX_ITER: usize = 5000;

/// Fixed point of `D ← mmse(D / δ)` iterated from `D₀ = variance`.
///
/// Stops once the step falls below `tol · variance` and the geometric tail
/// implied by the last two steps is below the same threshold; that tail is
/// then subtracted from the returned iterate (Aitken).
pub fn state_evolution_fixed_point<P: ScalarMmse + ?Sized>(prior: &P, delta: f64, tol: f64, max_iter: usize) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("sampling ratio must lie in (0, 1] (got {delta})")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("state evolution tolerance must be positive"));
    }
    if delta == 1.0 {
        // noiseless full sampling; D ← mmse(D) only creeps towards 0
        return Ok(0.0);
    }
    let var = prior.variance();
    let threshold = tol * var;
    let mut d = var;
    let mut prev_step = f64::INFINITY;
    for _ in 0..max_iter {
        if d <= 0.0 {
            return Ok(0.0);
        }
        let next = prior.mmse(d / delta)?;
        let signed = next - d;
        let step = signed.abs();
        d = next;
        if step < threshold {
            let rate = (step / prev_step).min(0.999);
            let tail = step * rate / (1.0 - rate);
            if tail < threshold {
                return Ok((d + signed.signum() * tail).max(0.0));
            }
        }
        prev_step = step;
    }
    Err(Error::StateEvolution { iterations: max_iter, last: d })
}

/// The first `iters` state-evolution iterates `D₀, D₁, …` at ratio `delta`.
pub fn state_evolution_trace<P: ScalarMmse + ?Sized>(prior: &P, delta: f64, iters: usize) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("sampling ratio must lie in (0, 1] (got {delta})")));
    }
    let mut out = Vec::with_capacity(iters + 1);
    let mut d = prior.variance();
    out.push(d);
    for _ in 0..iters {
        d = if d > 0.0 { prior.mmse(d / delta)? } else { 0.0 };
        out.push(d);
    }
    Ok(out)
}

/// Uniform grid `0, step, …, 1` (last point snapped to 1).
pub fn delta_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.05) {
        return Err(Error::invalid(format!("grid step must lie in (0, 0.05] (got {step})")));
    }
    let n = (1.0 / step).round() as usize;
    if ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {step} does not divide [0, 1]")));
    }
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// BAMP sample-distortion curve by state evolution on a uniform grid.
///
/// GMD priors use the exact mixture MMSE; GGD priors go through an
/// [`MmseTable`].
pub fn sd_curve(prior: &Prior, grid_step: f64) -> Result<SdCurve> {
    match prior {
        Prior::Ggd(_) => sd_curve_with(&MmseTable::new(*prior)?, grid_step),
        _ => sd_curve_with(prior, grid_step),
    }
}

pub fn sd_curve_with<P: ScalarMmse + ?Sized>(prior: &P, grid_step: f64) -> Result<SdCurve> {
    let deltas = delta_grid(grid_step)?;
    let var = prior.variance();
    let last = deltas.len() - 1;
    let distortions = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &d)| match i {
            0 => Ok(var),
            i if i == last => Ok(0.0),
            _ => state_evolution_fixed_point(prior, d, SE_TOL, SE_MAX_ITER),
        })
        .collect::<Result<Vec<f64>>>()?;
    SdCurve::new(deltas, distortions, var)
}
