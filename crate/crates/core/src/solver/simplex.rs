/// Euclidean projection onto the unit simplex `{w ≥ 0, Σ w = 1}` by sorting
/// and thresholding.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    assert!(!y.is_empty(), "cannot project an empty vector");
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = y.iter().map(|v| (v - theta).max(0.0)).collect();
    // Remove the rounding drift so the sum is 1 to machine precision.
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        for v in &mut out {
            *v /= s;
        }
    }
    out
}
