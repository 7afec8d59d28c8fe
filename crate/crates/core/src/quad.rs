//! Quadrature helpers shared by the prior and bound computations.
//!
//! Node/weight generation is delegated to `gauss-quad`; this module adapts
//! the rules to the forms the toolkit needs: Gauss–Hermite against the
//! standard normal density, composite Gauss–Legendre over arbitrary
//! breakpoints, and a recursive adaptive Gauss–Legendre integrator.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Default Gauss–Hermite order.
pub const HERMITE_NODES: usize = 61;

/// Points per composite Gauss–Legendre panel.
pub const PANEL_NODES: usize = 10;

type Rule = &'static [(f64, f64)];

fn cache() -> &'static Mutex<HashMap<(char, usize), Rule>> {
    static CACHE: OnceLock<Mutex<HashMap<(char, usize), Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: char, n: usize, build: impl FnOnce() -> Vec<(f64, f64)>) -> Rule {
    let mut map = cache().lock().expect("quadrature cache poisoned");
    map.entry((kind, n))
        .or_insert_with(|| Box::leak(build().into_boxed_slice()))
}

/// Gauss–Hermite rule for `E[f(Z)]`, `Z ~ N(0, 1)`: nodes and weights such
/// that `sum(w * f(z)) ≈ E f(Z)`. Weights sum to one.
pub fn normal_rule(n: usize) -> Rule {
    cached('h', n, || {
        let deg = NonZeroUsize::new(n).expect("rule order must be positive");
        let rule = GaussHermite::new(deg);
        let norm = std::f64::consts::PI.sqrt();
        rule.as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (x * std::f64::consts::SQRT_2, w / norm))
            .collect()
    })
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn legendre_rule(n: usize) -> Rule {
    cached('l', n, || {
        let deg = NonZeroUsize::new(n).expect("rule order must be positive");
        GaussLegendre::new(deg).as_node_weight_pairs().to_vec()
    })
}

/// `E[f(Z)]` for standard normal `Z` with the `n`-point rule.
pub fn normal_expectation(n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    normal_rule(n).iter().map(|&(z, w)| w * f(z)).sum()
}

/// Composite Gauss–Legendre over consecutive breakpoints.
pub fn integrate_panels(breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = legendre_rule(PANEL_NODES);
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut s = 0.0;
        for &(x, w) in rule {
            s += w * f(mid + half * x);
        }
        total += half * s;
    }
    total
}

/// Composite-rule nodes and weights (flattened) for reuse across several
/// integrands on the same mesh.
pub fn panel_nodes(breaks: &[f64], out: &mut Vec<(f64, f64)>) {
    out.clear();
    let rule = legendre_rule(PANEL_NODES);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        out.extend(rule.iter().map(|&(x, w)| (mid + half * x, half * w)));
    }
}

/// Breakpoints on `[lo, hi]` graded geometrically away from `center`
/// (first panel width `first`, growing by `ratio`) and capped at panel
/// width `max_width`. `center` is included when it lies inside the interval.
pub fn graded_breaks(lo: f64, hi: f64, center: f64, first: f64, ratio: f64, max_width: f64) -> Vec<f64> {
    debug_assert!(hi > lo && first > 0.0 && ratio > 1.0 && max_width > 0.0);
    // distances from `center` in [from, to)
    let distances = |from: f64, to: f64| {
        let mut out = Vec::new();
        let mut d = from;
        loop {
            d += (d * (ratio - 1.0)).max(first).min(max_width);
            if d >= to {
                break out;
            }
            out.push(d);
        }
    };
    let mut out = vec![lo, hi];
    if center > lo && center < hi {
        out.push(center);
        out.extend(distances(0.0, hi - center).into_iter().map(|d| center + d));
        out.extend(distances(0.0, center - lo).into_iter().map(|d| center - d));
    } else if center <= lo {
        out.extend(distances(lo - center, hi - center).into_iter().map(|d| center + d));
    } else {
        out.extend(distances(center - hi, center - lo).into_iter().map(|d| center - d));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Adaptive Gauss–Legendre: bisect until a panel agrees with the sum of
/// its halves to `tol` (absolute, scaled by panel share).
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        integrate_panels(&[a, b], f)
    }
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let left = panel(f, a, m);
        let right = panel(f, m, b);
        let diff = (left + right - whole).abs();
        if diff <= tol {
            return Ok(left + right);
        }
        if depth == 0 {
            return Err(Error::Quadrature {
                relative_change: diff / (left + right).abs().max(f64::MIN_POSITIVE),
            });
        }
        Ok(recurse(f, a, m, left, 0.5 * tol, depth - 1)? + recurse(f, m, b, right, 0.5 * tol, depth - 1)?)
    }
    let whole = panel(f, a, b);
    recurse(f, a, b, whole, tol, 40)
}
