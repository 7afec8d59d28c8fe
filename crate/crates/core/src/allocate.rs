//! Bandwise sample allocation: greedy reverse water-filling over
//! distortion-reduction functions, proportional baselines and an exhaustive
//! oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::Prior;
use crate::sd::SdCurve;

/// Largest number of candidate allocations the exhaustive search will visit.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// Default ceiling for predicted PSNR (dB), reached at zero distortion.
pub const PSNR_CAP: f64 = 100.0;

/// Schema line heading every allocation CSV.
pub const ALLOCATION_CSV_SCHEMA: &str = "# schema: sdcs.allocation/1 band,n,m,delta";

/// One wavelet band: coefficient count, prior and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub n: usize,
    pub prior: Prior,
    pub sigma2: f64,
}

impl Band {
    /// A band whose variance is that of its prior.
    pub fn new(n: usize, prior: Prior) -> Result<Self> {
        let b = Band { n, prior, sigma2: prior.variance() };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("band size must be at least 1"));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(format!("band variance must be finite and nonnegative (got {})", self.sigma2)));
        }
        Ok(())
    }
}

/// Ordered bands; band 0 is the scaling band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandModel {
    pub bands: Vec<Band>,
}

impl BandModel {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::invalid("band model needs at least one band"));
        }
        for b in &bands {
            b.validate()?;
        }
        Ok(BandModel { bands })
    }

    /// Same priors and variances over bands of different sizes.
    pub fn resized(&self, sizes: &[usize]) -> Result<BandModel> {
        if sizes.len() != self.bands.len() {
            return Err(Error::Dimension(format!("{} sizes for {} bands", sizes.len(), self.bands.len())));
        }
        BandModel::new(self.bands.iter().zip(sizes).map(|(b, &n)| Band { n, ..*b }).collect())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.bands.iter().map(|b| b.n).collect()
    }

    pub fn total_size(&self) -> usize {
        self.bands.iter().map(|b| b.n).sum()
    }

    fn check_budget(&self, budget: usize) -> Result<()> {
        let total = self.total_size();
        if budget > total {
            return Err(Error::invalid(format!("budget {budget} exceeds the {total} available coefficients")));
        }
        Ok(())
    }

    fn check_curves(&self, curves: &[SdCurve]) -> Result<()> {
        if curves.len() != self.bands.len() {
            return Err(Error::Dimension(format!("{} curves for {} bands", curves.len(), self.bands.len())));
        }
        Ok(())
    }
}

/// Per-band sample counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub band_sizes: Vec<usize>,
    pub m: Vec<usize>,
    pub budget: usize,
}

impl Allocation {
    /// Checks `0 ≤ mᵢ ≤ nᵢ` and records the budget as `Σ mᵢ`.
    pub fn new(band_sizes: Vec<usize>, m: Vec<usize>) -> Result<Self> {
        if band_sizes.len() != m.len() {
            return Err(Error::Dimension(format!("{} sample counts for {} bands", m.len(), band_sizes.len())));
        }
        if let Some(i) = (0..m.len()).find(|&i| m[i] > band_sizes[i]) {
            return Err(Error::invalid(format!("band {i} gets {} samples but has {} coefficients", m[i], band_sizes[i])));
        }
        let budget = m.iter().sum();
        Ok(Allocation { band_sizes, m, budget })
    }

    /// Checks that this allocation fits `model`.
    pub fn validate_for(&self, model: &BandModel) -> Result<()> {
        if self.band_sizes != model.sizes() {
            return Err(Error::Dimension("allocation band sizes differ from the model".into()));
        }
        let a = Allocation::new(self.band_sizes.clone(), self.m.clone())?;
        if a.budget != self.budget {
            return Err(Error::invalid(format!("allocation sums to {} but records budget {}", a.budget, self.budget)));
        }
        Ok(())
    }

    /// Per-band sampling ratios `mᵢ / nᵢ`.
    pub fn ratios(&self) -> Vec<f64> {
        self.m.iter().zip(&self.band_sizes).map(|(&m, &n)| m as f64 / n as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{ALLOCATION_CSV_SCHEMA}")?;
        writeln!(out, "band,n,m,delta")?;
        for (i, (&n, &m)) in self.band_sizes.iter().zip(&self.m).enumerate() {
            writeln!(out, "{i},{n},{m},{}", m as f64 / n as f64)?;
        }
        Ok(())
    }
}

/// `σ² n D(m/n)`: the band's contribution to the total squared error.
fn band_cost(band: &Band, curve: &SdCurve, m: usize) -> f64 {
    band.sigma2 * band.n as f64 * curve.normalized_at(m as f64 / band.n as f64)
}

/// Drop in total squared error from the `(m+1)`-th sample of a band, i.e.
/// `n · η(m)`.
fn band_gain(band: &Band, curve: &SdCurve, m: usize) -> f64 {
    band_cost(band, curve, m) - band_cost(band, curve, m + 1)
}

/// `Σ σᵢ² nᵢ Dᵢ(mᵢ/nᵢ)` for an allocation.
pub fn total_distortion(model: &BandModel, m: &[usize], curves: &[SdCurve]) -> Result<f64> {
    model.check_curves(curves)?;
    if m.len() != model.bands.len() {
        return Err(Error::Dimension(format!("{} sample counts for {} bands", m.len(), model.bands.len())));
    }
    Ok(model.bands.iter().zip(curves).zip(m).map(|((b, c), &mi)| band_cost(b, c, mi)).sum())
}

#[derive(PartialEq)]
struct Candidate {
    gain: f64,
    band: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then_with(|| other.band.cmp(&self.band))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reverse water-filling: each sample goes to the band whose next sample
/// removes the most squared error; ties go to the lowest band index.
pub fn greedy_allocate(model: &BandModel, budget: usize, curves: &[SdCurve]) -> Result<Allocation> {
    model.check_budget(budget)?;
    model.check_curves(curves)?;
    let mut m = vec![0usize; model.bands.len()];
    let mut heap: BinaryHeap<Candidate> = model
        .bands
        .iter()
        .zip(curves)
        .enumerate()
        .map(|(band, (b, c))| Candidate { gain: band_gain(b, c, 0), band })
        .collect();
    for _ in 0..budget {
        let Candidate { band, .. } = heap.pop().expect("budget bounded by total size");
        m[band] += 1;
        let b = &model.bands[band];
        if m[band] < b.n {
            heap.push(Candidate { gain: band_gain(b, &curves[band], m[band]), band });
        }
    }
    Allocation::new(model.sizes(), m)
}

/// Water level after a greedy allocation: the largest gain still on offer
/// from an unsaturated band (`None` when every band is full).
pub fn water_level(model: &BandModel, allocation: &Allocation, curves: &[SdCurve]) -> Result<Option<f64>> {
    allocation.validate_for(model)?;
    model.check_curves(curves)?;
    Ok(model
        .bands
        .iter()
        .zip(curves)
        .zip(&allocation.m)
        .filter(|((b, _), &m)| m < b.n)
        .map(|((b, c), &m)| band_gain(b, c, m))
        .reduce(f64::max))
}

/// Exhaustive minimisation of the total squared error over every split of
/// `budget`. Guarded by [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_allocate(model: &BandModel, budget: usize, curves: &[SdCurve]) -> Result<Allocation> {
    model.check_budget(budget)?;
    model.check_curves(curves)?;
    let count = model
        .bands
        .iter()
        .try_fold(1u64, |acc, b| acc.checked_mul(b.n as u64 + 1))
        .unwrap_or(u64::MAX);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let costs: Vec<Vec<f64>> = model
        .bands
        .iter()
        .zip(curves)
        .map(|(b, c)| (0..=b.n).map(|m| band_cost(b, c, m)).collect())
        .collect();
    let mut best = (f64::INFINITY, Vec::new());
    let mut m = vec![0usize; costs.len()];
    search(&costs, 0, budget, 0.0, &mut m, &mut best);
    Allocation::new(model.sizes(), best.1)
}

fn search(costs: &[Vec<f64>], band: usize, left: usize, acc: f64, m: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
    if band + 1 == costs.len() {
        if left < costs[band].len() {
            m[band] = left;
            let total = acc + costs[band][left];
            if total < best.0 {
                *best = (total, m.clone());
            }
        }
        return;
    }
    let rest: usize = costs[band + 1..].iter().map(|c| c.len() - 1).sum();
    let lo = left.saturating_sub(rest);
    let hi = left.min(costs[band].len() - 1);
    for mi in lo..=hi {
        m[band] = mi;
        search(costs, band + 1, left - mi, acc + costs[band][mi], m, best);
    }
}

/// Splits `budget` in proportion to `weights` with largest-remainder rounding,
/// never exceeding `caps`.
fn proportional(weights: &[usize], caps: &[usize], budget: usize) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut m: Vec<usize> = weights.iter().map(|&w| ((w as u128 * budget as u128) / total as u128) as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let rem = |i: usize| (weights[i] as u128 * budget as u128) % total as u128;
    order.sort_by(|&a, &b| rem(b).cmp(&rem(a)).then(a.cmp(&b)));
    let mut left = budget - m.iter().sum::<usize>();
    for &i in order.iter().cycle().take(order.len() * 2) {
        if left == 0 {
            break;
        }
        if m[i] < caps[i] {
            m[i] += 1;
            left -= 1;
        }
    }
    m
}

/// `mᵢ ∝ nᵢ` (one dense Gaussian matrix over all coefficients).
pub fn uniform_allocate(model: &BandModel, budget: usize) -> Result<Allocation> {
    model.check_budget(budget)?;
    let sizes = model.sizes();
    let m = proportional(&sizes, &sizes, budget);
    Allocation::new(sizes, m)
}

/// Scaling band fully sampled, the rest spread in proportion to band size.
pub fn two_gender_allocate(model: &BandModel, budget: usize) -> Result<Allocation> {
    model.check_budget(budget)?;
    let sizes = model.sizes();
    let n0 = sizes[0];
    if budget < n0 {
        return Err(Error::invalid(format!("budget {budget} cannot cover the {n0}-coefficient scaling band")));
    }
    let mut weights = sizes.clone();
    weights[0] = 0;
    let mut m = proportional(&weights, &sizes, budget - n0);
    m[0] = n0;
    Allocation::new(sizes, m)
}

/// Predicted per-coefficient error and PSNR (unit peak) of an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mse: f64,
    pub psnr: f64,
}

/// `10 log₁₀(1 / mse)`, capped at `cap`.
pub fn psnr_from_mse(mse: f64, cap: f64) -> f64 {
    if mse <= 0.0 {
        cap
    } else {
        (-10.0 * mse.log10()).min(cap)
    }
}

/// `Σ σᵢ² nᵢ Dᵢ(mᵢ/nᵢ) / Σ nᵢ` and the matching PSNR.
pub fn predicted_distortion(model: &BandModel, allocation: &Allocation, curves: &[SdCurve]) -> Result<Prediction> {
    allocation.validate_for(model)?;
    let mse = total_distortion(model, &allocation.m, curves)? / model.total_size() as f64;
    Ok(Prediction { mse, psnr: psnr_from_mse(mse, PSNR_CAP) })
}
