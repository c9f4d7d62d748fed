//! Euclidean projection onto the capped simplex `{u ≥ 0, Σu ≤ C}`.

/// Projects `v` onto `{u : u ≥ 0, Σ u ≤ cap}`.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_capped_simplex_in_place(&mut out, cap);
    out
}

/// In-place form of [`project_capped_simplex`].
pub fn project_capped_simplex_in_place(v: &mut [f64], cap: f64) {
    debug_assert!(cap > 0.0);
    let clipped_sum: f64 = v.iter().map(|x| x.max(0.0)).sum();
    if clipped_sum <= cap {
        for x in v.iter_mut() {
            *x = x.max(0.0);
        }
        return;
    }
    // The sum constraint is active: project onto {u ≥ 0, Σu = cap} by
    // sorting and thresholding.
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (r, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (prefix - cap) / (r as f64 + 1.0);
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        let p = *x - theta;
        *x = if p > 0.0 { p.min(cap) } else { 0.0 };
    }
}
