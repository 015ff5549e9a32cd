/// Piecewise-linear "hot" colormap: black, red, yellow, white.
///
/// Input is clamped to `[0, 1]`.
pub fn hot_colormap(v: f64) -> [f64; 3] {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    [
        (3.0 * v).clamp(0.0, 1.0),
        (3.0 * v - 1.0).clamp(0.0, 1.0),
        (3.0 * v - 2.0).clamp(0.0, 1.0),
    ]
}
