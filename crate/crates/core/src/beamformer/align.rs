use num_complex::Complex64;

use crate::geometry::SteeringVector;

/// Time-align every channel's direct path to mic 0 by phase rotation:
/// `y_i(f) * exp(j 2 pi f (t_i - t_0))`, i.e. multiplication by `conj(d_i)`.
///
/// `spectra[i][k]` is bin `k` of mic `i`; `steering[k]` the steering vector for bin `k`.
pub fn align_channels(spectra: &[Vec<Complex64>], steering: &[SteeringVector]) -> Vec<Vec<Complex64>> {
    spectra
        .iter()
        .enumerate()
        .map(|(i, ch)| {
            ch.iter()
                .zip(steering)
                .map(|(y, d)| y * d.entries[i].conj())
                .collect()
        })
        .collect()
}
