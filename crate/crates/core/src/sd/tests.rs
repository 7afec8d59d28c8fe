use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::priors::{GgdPrior, GmdPrior, MIXTURE_GRID};

fn gaussian() -> Prior {
    Prior::gaussian(1.0).unwrap()
}

fn fig1() -> Prior {
    Prior::Gmd(GmdPrior::new(0.38, 1.198, 0.004).unwrap())
}

#[test]
fn gaussian_fixed_point_is_one_minus_delta() {
    for k in 1..=9 {
        let d = k as f64 / 10.0;
        let fp = state_evolution_fixed_point(&gaussian(), d, SE_TOL, SE_MAX_ITER).unwrap();
        assert!((fp - (1.0 - d)).abs() < 1e-6, "delta {d}: {fp}");
    }
}

#[test]
fn full_sampling_fixed_point_vanishes() {
    let fp = state_evolution_fixed_point(&fig1(), 1.0, 1e-10, SE_MAX_ITER).unwrap();
    assert!(fp < 1e-8);
}

#[test]
fn fixed_point_rejects_bad_ratio() {
    assert!(state_evolution_fixed_point(&gaussian(), 0.0, SE_TOL, 10).is_err());
    assert!(state_evolution_fixed_point(&gaussian(), 1.5, SE_TOL, 10).is_err());
}

#[test]
fn gaussian_curve_is_linear() {
    let c = sd_curve(&gaussian(), GRID_STEP).unwrap();
    for (d, v) in c.deltas.iter().zip(&c.distortions) {
        assert!((v - linear_sd(*d)).abs() < 1e-6, "{d}: {v}");
    }
    let (hull, dc) = convexify(&c);
    assert_eq!(dc, None);
    for (a, b) in hull.distortions.iter().zip(&c.distortions) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn linear_sd_values() {
    assert_eq!(linear_sd(0.0), 1.0);
    assert_relative_eq!(linear_sd(0.3), 0.7);
    assert_eq!(linear_sd(1.0), 0.0);
}

#[test]
fn ebb_gaussian_is_linear() {
    assert_relative_eq!(ebb(&gaussian(), 0.3).unwrap(), 0.7, max_relative = 1e-9);
    let g = Prior::Ggd(GgdPrior::new(2.0, 3.0).unwrap());
    assert_relative_eq!(ebb(&g, 0.25).unwrap(), 3.0 * 0.75, max_relative = 1e-9);
    assert_eq!(ebb(&fig1(), 1.0).unwrap(), 0.0);
}

#[test]
fn ebb_ggd_matches_numerical_entropy() {
    // closed-form entropy against -∫ p log2 p on a graded mesh
    let g = GgdPrior::new(0.4, 1.0).unwrap();
    let breaks = crate::quad::graded_breaks(0.0, 2000.0, 0.0, 1e-14, 1.3, 5.0);
    let h = 2.0 * crate::quad::integrate_panels(&breaks, |x| {
        let p = g.pdf(x);
        if p > 0.0 {
            -p * p.log2()
        } else {
            0.0
        }
    });
    assert_relative_eq!(h, g.differential_entropy(), epsilon = 1e-5);
    let expect = 0.8 * (2.0 * (h - crate::priors::GAUSSIAN_ENTROPY_BITS) / 0.8).exp2();
    assert_relative_eq!(ebb(&Prior::Ggd(g), 0.2).unwrap(), expect, max_relative = 1e-4);
    assert!(expect < 0.8);
}

#[test]
fn mbb_gmd_piecewise_values() {
    let mix = fig1().variance_mixture(0).unwrap();
    assert_relative_eq!(mbb(&mix, 0.0), 0.38 * 1.198 + 0.62 * 0.004, max_relative = 1e-12);
    assert_relative_eq!(mbb(&mix, 0.38), 0.62 * 0.004, max_relative = 1e-12);
    assert_eq!(mbb(&mix, 1.0), 0.0);
    // inside the first branch the bound is linear
    assert_relative_eq!(mbb(&mix, 0.19), 0.19 * 1.198 + 0.62 * 0.004, max_relative = 1e-12);
}

#[test]
fn fig1_critical_ratio() {
    let raw = sd_curve(&fig1(), GRID_STEP).unwrap();
    let (hull, dc) = convexify(&raw);
    let dc = dc.expect("concave region expected");
    assert!((dc - 0.61).abs() <= 0.03 + 1e-9, "delta_c = {dc}");
    assert!(hull.distortions.iter().zip(&raw.distortions).all(|(e, r)| e <= r));
    for w in hull.distortions.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9 * raw.source_variance);
    }
}

#[test]
fn dr_linear_curve_is_flat() {
    let c = SdCurve::linear(1.0, GRID_STEP).unwrap();
    let eta = dr_function(&c, 1.0, 4).unwrap();
    for e in eta {
        assert_relative_eq!(e, 0.25, max_relative = 1e-12);
    }
    assert!(dr_function(&c, 0.0, 5).unwrap().iter().all(|&e| e == 0.0));
}

#[test]
fn dr_gmd_band_is_decreasing() {
    // second wavelet band of the reference image (GMD row)
    let p = Prior::Gmd(GmdPrior::new(0.5309, 0.8542, 0.0038).unwrap());
    let (hull, _) = convexify(&sd_curve(&p, GRID_STEP).unwrap());
    let eta = dr_function(&hull, p.variance(), 768).unwrap();
    assert!(eta.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    assert!(eta[0] > eta[767]);
}

#[test]
fn partial_band_bound_values() {
    assert_eq!(partial_band_bound(1.0, 2.0, 2.0).unwrap(), 0.0);
    assert_relative_eq!(partial_band_bound(1.0, 8.0, 1.0).unwrap(), 3.0);
    assert!(partial_band_bound(1.0, 1.0, 2.0).is_err());
}

#[test]
fn curve_validation() {
    assert!(SdCurve::new(vec![0.0, 1.0], vec![1.0, 0.0], 1.0).is_ok());
    assert!(SdCurve::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.2, 0.0], 1.0).is_err());
    assert!(SdCurve::new(vec![0.1, 1.0], vec![1.0, 0.0], 1.0).is_err());
    assert!(SdCurve::new(vec![0.0, 1.0], vec![0.9, 0.0], 1.0).is_err());
}

#[test]
fn sd_csv_has_schema_line() {
    let (rows, _, _) = sd_table(&gaussian(), 0.05).unwrap();
    let mut buf = Vec::new();
    write_sd_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(SD_CSV_SCHEMA));
    assert_eq!(text.lines().count(), 2 + 21);
    let _ = MIXTURE_GRID;
}

proptest! {
    #[test]
    fn mbb_monotone_convex(lambda in 0.01f64..0.99, sl in 0.1f64..10.0, ratio in 1e-4f64..1.0) {
        let p = Prior::Gmd(GmdPrior::new(lambda, sl, sl * ratio).unwrap());
        let mix = p.variance_mixture(0).unwrap();
        let vals: Vec<f64> = (0..=50).map(|i| mbb(&mix, i as f64 / 50.0)).collect();
        prop_assert!((vals[0] - p.variance()).abs() < 1e-12);
        prop_assert_eq!(vals[50], 0.0);
        for w in vals.windows(3) {
            prop_assert!(w[1] <= w[0] + 1e-15);
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
        }
    }

    #[test]
    fn hull_lies_below_and_is_convex(ys in proptest::collection::vec(0.0f64..1.0, 3..40)) {
        let mut ys = ys;
        ys.sort_by(|a, b| b.total_cmp(a));
        let n = ys.len();
        ys[0] = 1.0;
        ys[n - 1] = 0.0;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let c = SdCurve::new(xs, ys, 1.0).unwrap();
        let (h, _) = convexify(&c);
        for (e, r) in h.distortions.iter().zip(&c.distortions) {
            prop_assert!(e <= r);
        }
        for w in h.distortions.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
        }
        let eta = dr_function(&h, 1.0, 37).unwrap();
        for w in eta.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn ebb_below_linear_for_gmd(lambda in 0.05f64..0.95, ratio in 1e-3f64..0.5, delta in 0.0f64..0.99) {
        let p = Prior::Gmd(GmdPrior::new(lambda, 1.0, ratio).unwrap());
        let var = p.variance();
        prop_assert!(ebb(&p, delta).unwrap() < var * linear_sd(delta));
    }
}
