//! Small 1-D root and peak helpers shared by the pattern analyses.

/// Vertex offset of the parabola through `(-h, y0)`, `(0, y1)`, `(h, y2)`,
/// clamped to `[-h, h]`. Returns 0 when the three points are collinear.
pub(crate) fn parabolic_offset(y0: f64, y1: f64, y2: f64, h: f64) -> f64 {
    let denom = y0 - 2.0 * y1 + y2;
    if denom >= 0.0 || !denom.is_finite() {
        return 0.0;
    }
    (0.5 * h * (y0 - y2) / denom).clamp(-h, h)
}

/// Bisection for a sign change of `f` in `[lo, hi]`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Index of the first maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
