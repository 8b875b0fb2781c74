use num_complex::Complex64;

/// Per-bin mask `clamp(|DS|^2 / (mean_i |Y_i|^2 + eps), floor, 1)` where DS is
/// the mean of the aligned channels.
pub fn nonlinear_mask(aligned: &[Vec<Complex64>], floor: f64, epsilon: f64) -> Vec<f64> {
    let c = aligned.len() as f64;
    let bins = aligned.first().map_or(0, |ch| ch.len());
    (0..bins)
        .map(|k| {
            let ds: Complex64 = aligned.iter().map(|ch| ch[k]).sum::<Complex64>() / c;
            let p: f64 = aligned.iter().map(|ch| ch[k].norm_sqr()).sum::<f64>() / c;
            (ds.norm_sqr() / (p + epsilon)).clamp(floor, 1.0)
        })
        .collect()
}

/// Delay-and-sum of aligned spectra with the coherence mask applied.
pub fn nonlinear_process(aligned: &[Vec<Complex64>], floor: f64, epsilon: f64) -> Vec<Complex64> {
    let c = aligned.len() as f64;
    let mask = nonlinear_mask(aligned, floor, epsilon);
    mask.iter()
        .enumerate()
        .map(|(k, m)| aligned.iter().map(|ch| ch[k]).sum::<Complex64>() / c * *m)
        .collect()
}
