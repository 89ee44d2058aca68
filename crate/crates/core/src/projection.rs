//! Euclidean projection onto the capped simplex `{z : 1'z <= 1, z >= 0}`.

use nalgebra::DVector;

/// Returns `argmin_{z in S} ||z - v||`.
///
/// If the clipped vector `max(v, 0)` already satisfies the cap it is the
/// answer; otherwise the projection lands on the unit simplex and is found
/// with the sort-and-threshold rule.
pub fn project_capped_simplex(v: &DVector<f64>) -> DVector<f64> {
    let clipped = v.map(|x| x.max(0.0));
    if clipped.sum() <= 1.0 {
        return clipped;
    }
    let theta = simplex_threshold(v.as_slice());
    v.map(|x| (x - theta).max(0.0))
}

/// Threshold `theta` with `sum(max(v - theta, 0)) = 1`.
fn simplex_threshold(v: &[f64]) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if x - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta
}
