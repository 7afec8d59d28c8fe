//! Reference priors and band models: cameraman statistics, natural-image
//! averages and two single-band priors with a known critical ratio.

use crate::allocate::{Band, BandModel};
use crate::error::{Error, Result};
use crate::priors::{GgdPrior, GmdPrior, Prior};

/// Band sizes of a 5-level decomposition of a 256×256 image.
pub const CAMERAMAN_SIZES: [usize; 6] = [64, 192, 768, 3072, 12288, 49152];

/// Budgets for 10 %, 15.26 %, 25 % and 30 % of 65536 pixels.
pub const CAMERAMAN_BUDGETS: [usize; 4] = [6554, 10000, 16384, 19661];

/// Cameraman, two-state GMD per band `(λ, σ_L², σ_S²)`; band 0 is Gaussian.
pub const CAMERAMAN_GMD: [(f64, f64, f64); 6] = [
    (1.0, 261.4383, 0.0),
    (0.4155, 4.4215, 0.3331),
    (0.5309, 0.8542, 0.0038),
    (0.4842, 0.1856, 0.0004),
    (0.3664, 0.0453, 0.0002),
    (0.2792, 0.0115, 0.0001),
];

/// Cameraman, GGD per band `(α, σ²)`.
pub const CAMERAMAN_GGD: [(f64, f64); 6] = [
    (2.0, 261.4383),
    (0.7, 2.0822),
    (0.4, 0.4559),
    (0.3, 0.0902),
    (0.3, 0.0167),
    (0.4, 0.0033),
];

/// Average natural-image GMD statistics for wavelet bands 1–5.
pub const NATURAL_GMD: [(f64, f64, f64); 5] = [
    (0.5108, 3.6910, 0.4596),
    (0.4374, 0.7506, 0.0490),
    (0.4076, 0.1595, 0.0075),
    (0.3616, 0.0385, 0.0015),
    (0.3137, 0.0081, 0.0003),
];

fn gmd(&(lambda, l, s): &(f64, f64, f64)) -> Result<Prior> {
    if lambda == 1.0 {
        Prior::gaussian(l)
    } else {
        Ok(Prior::Gmd(GmdPrior::new(lambda, l, s)?))
    }
}

fn model(priors: Vec<Prior>, sizes: &[usize]) -> Result<BandModel> {
    BandModel::new(priors.into_iter().zip(sizes).map(|(p, &n)| Band::new(n, p)).collect::<Result<_>>()?)
}

pub fn cameraman_gmd() -> Result<BandModel> {
    model(CAMERAMAN_GMD.iter().map(gmd).collect::<Result<_>>()?, &CAMERAMAN_SIZES)
}

pub fn cameraman_ggd() -> Result<BandModel> {
    let priors = CAMERAMAN_GGD.iter().map(|&(a, v)| Ok(Prior::Ggd(GgdPrior::new(a, v)?))).collect::<Result<_>>()?;
    model(priors, &CAMERAMAN_SIZES)
}

/// Natural-image averages for the wavelet bands, with the scaling band
/// borrowed from the cameraman model (no average is tabulated for it).
pub fn natural_gmd() -> Result<BandModel> {
    let mut priors = vec![gmd(&CAMERAMAN_GMD[0])?];
    for row in &NATURAL_GMD {
        priors.push(gmd(row)?);
    }
    model(priors, &CAMERAMAN_SIZES)
}

/// The two-state GMD whose SD curve has `δc ≈ 0.61`.
pub fn fig1_prior() -> Prior {
    Prior::Gmd(GmdPrior::new(0.38, 1.198, 0.004).expect("valid constants"))
}

/// The GGD whose SD curve has `δc ≈ 0.15`.
pub fn fig2_prior() -> Prior {
    Prior::Ggd(GgdPrior::new(0.4, 1.0).expect("valid constants"))
}

/// Names accepted by [`band_model`] and [`prior`].
pub const MODEL_NAMES: [&str; 3] = ["cameraman-gmd", "cameraman-ggd", "natural-gmd"];
pub const PRIOR_NAMES: [&str; 3] = ["fig1", "fig2", "gaussian"];

pub fn band_model(name: &str) -> Result<BandModel> {
    match name {
        "cameraman-gmd" => cameraman_gmd(),
        "cameraman-ggd" => cameraman_ggd(),
        "natural-gmd" => natural_gmd(),
        _ => Err(Error::invalid(format!("unknown band model preset {name:?} (known: {})", MODEL_NAMES.join(", ")))),
    }
}

pub fn prior(name: &str) -> Result<Prior> {
    match name {
        "fig1" => Ok(fig1_prior()),
        "fig2" => Ok(fig2_prior()),
        "gaussian" => Prior::gaussian(1.0),
        _ => Err(Error::invalid(format!("unknown prior preset {name:?} (known: {})", PRIOR_NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_cover_the_image() {
        assert_eq!(CAMERAMAN_SIZES.iter().sum::<usize>(), 65536);
        for m in [cameraman_gmd().unwrap(), cameraman_ggd().unwrap(), natural_gmd().unwrap()] {
            assert_eq!(m.bands.len(), 6);
            assert_eq!(m.total_size(), 65536);
        }
    }

    #[test]
    fn band_variances_follow_the_tables() {
        let g = cameraman_gmd().unwrap();
        assert!(g.bands[0].prior.is_gaussian());
        assert!((g.bands[0].sigma2 - 261.4383).abs() < 1e-12);
        let expected = 0.5309 * 0.8542 + (1.0 - 0.5309) * 0.0038;
        assert!((g.bands[2].sigma2 - expected).abs() < 1e-12);
        let gg = cameraman_ggd().unwrap();
        assert!((gg.bands[3].sigma2 - 0.0902).abs() < 1e-12);
    }

    #[test]
    fn variances_decay_across_scales() {
        for m in [cameraman_gmd().unwrap(), cameraman_ggd().unwrap(), natural_gmd().unwrap()] {
            assert!(m.bands.windows(2).all(|w| w[1].sigma2 < w[0].sigma2));
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(band_model("lena").is_err());
        assert!(prior("cauchy").is_err());
        for n in MODEL_NAMES {
            band_model(n).unwrap();
        }
        for n in PRIOR_NAMES {
            prior(n).unwrap();
        }
    }
}
