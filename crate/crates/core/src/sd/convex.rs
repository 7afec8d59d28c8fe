use super::SdCurve;

/// Indices of the lower convex hull of `(x, y)` (x strictly increasing),
/// by the monotone chain. Collinear interior points are dropped.
pub fn lower_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Lower convex envelope of the sampled curve.
///
/// The critical ratio `delta_c` is the end of the envelope segment leaving
/// `(0, σ²)`, reported only when that segment actually cuts below the raw
/// curve (by more than `1e-9 σ²`); it is the touch point of the chord from
/// the origin anchor.
pub fn convexify(curve: &SdCurve) -> (SdCurve, Option<f64>) {
    let (x, y) = (&curve.deltas, &curve.distortions);
    let hull = lower_hull(x, y);
    let mut env = y.clone();
    for seg in hull.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        for j in a + 1..b {
            let t = (x[j] - x[a]) / (x[b] - x[a]);
            env[j] = (y[a] + t * (y[b] - y[a])).min(y[j]);
        }
    }
    let tol = 1e-9 * curve.source_variance;
    let delta_c = match hull.get(1) {
        Some(&end) if (1..end).any(|j| y[j] - env[j] > tol) => Some(x[end]),
        _ => None,
    };
    let out = SdCurve {
        deltas: x.clone(),
        distortions: env,
        source_variance: curve.source_variance,
        convexified: true,
        delta_c,
    };
    (out, delta_c)
}
