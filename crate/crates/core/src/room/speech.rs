use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::SAMPLE_RATE;

/// Speech-like test signal of `num_samples` at 16 kHz: voiced syllables
/// (harmonic series with drifting pitch and two formant bumps), short noise
/// bursts for fricatives, and pauses between phrases. Every phrase lasts at
/// most 1.5 s and is followed by at least 150 ms of silence.
pub fn synth_speech<R: Rng + ?Sized>(rng: &mut R, num_samples: usize) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let mut out = vec![0.0; num_samples];
    let base_f0: f64 = rng.random_range(90.0..240.0);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut t = (rng.random_range(0.0..0.3) * fs) as usize;
    let mut phrase_left = rng.random_range(0.6..1.5) * fs;
    while t < num_samples {
        let voiced = rng.random_bool(0.8);
        let secs: f64 = if voiced {
            rng.random_range(0.08..0.3)
        } else {
            rng.random_range(0.04..0.12)
        };
        let len = secs * fs;
        let len = (len.min(phrase_left.max(0.02 * fs))) as usize;
        let end = (t + len).min(num_samples);
        let amp = rng.random_range(0.4..1.0);
        if voiced {
            let f_start: f64 = base_f0 * rng.random_range(0.85..1.2);
            let f_end = f_start * rng.random_range(0.8..1.25);
            let formants = [rng.random_range(300.0..900.0), rng.random_range(900.0..2500.0)];
            let n_harm = (4000.0 / f_start.min(f_end)) as usize;
            let harm_gain: Vec<f64> = (1..=n_harm)
                .map(|h| {
                    let f = h as f64 * f_start;
                    let bump = formants
                        .iter()
                        .map(|fc| (-((f - fc) / 200.0).powi(2)).exp())
                        .sum::<f64>();
                    (0.3 + 2.0 * bump) / h as f64
                })
                .collect();
            let mut phase = vec![0.0f64; n_harm];
            for i in t..end {
                let u = (i - t) as f64 / len as f64;
                let f0 = f_start + (f_end - f_start) * u;
                let env = (std::f64::consts::PI * u).sin().powf(0.7);
                let mut s = 0.0;
                for (h, (ph, g)) in phase.iter_mut().zip(&harm_gain).enumerate() {
                    let fh = f0 * (h + 1) as f64;
                    if fh >= 7000.0 {
                        break;
                    }
                    *ph += 2.0 * std::f64::consts::PI * fh / fs;
                    s += g * ph.sin();
                }
                out[i] += amp * env * s;
            }
        } else {
            // first-difference tilted noise
            let mut prev = 0.0;
            for i in t..end {
                let u = (i - t) as f64 / len as f64;
                let env = (std::f64::consts::PI * u).sin();
                let w: f64 = noise.sample(rng);
                out[i] += 0.3 * amp * env * (w - 0.7 * prev);
                prev = w;
            }
        }
        t = end;
        phrase_left -= len as f64;
        if phrase_left <= 0.0 {
            t += (rng.random_range(0.15..0.5) * fs) as usize;
            phrase_left = rng.random_range(0.6..1.5) * fs;
        } else {
            t += (rng.random_range(0.0..0.04) * fs) as usize;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::FftPlan;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic() {
        let a = synth_speech(&mut ChaCha8Rng::seed_from_u64(3), 16000);
        let b = synth_speech(&mut ChaCha8Rng::seed_from_u64(3), 16000);
        assert_eq!(a, b);
        let c = synth_speech(&mut ChaCha8Rng::seed_from_u64(4), 16000);
        assert_ne!(a, c);
    }

    #[test]
    fn spectral_centroid_in_speech_band() {
        let plan = FftPlan::<f64>::new(1024).unwrap();
        let mut scratch = Vec::new();
        for seed in 0..5 {
            let x = synth_speech(&mut ChaCha8Rng::seed_from_u64(seed), 64000);
            let (mut num, mut den) = (0.0, 0.0);
            for frame in x.chunks_exact(1024) {
                let bins = plan.forward_real(frame, &mut scratch);
                for (k, b) in bins.iter().enumerate() {
                    let p = b.norm_sqr();
                    num += p * k as f64 * 16000.0 / 1024.0;
                    den += p;
                }
            }
            let centroid = num / den;
            assert!((100.0..4000.0).contains(&centroid), "seed {seed}: {centroid}");
        }
    }

    #[test]
    fn has_silence_gap() {
        for seed in 0..20 {
            let x = synth_speech(&mut ChaCha8Rng::seed_from_u64(seed), 64000);
            // a run of at least 100 ms of exact zeros
            let mut run = 0usize;
            let mut best = 0usize;
            for v in &x {
                run = if *v == 0.0 { run + 1 } else { 0 };
                best = best.max(run);
            }
            assert!(best >= 1600, "seed {seed}: longest gap {best}");
        }
    }
}
