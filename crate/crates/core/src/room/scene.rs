use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{absorption_for_rt60, image_source_rir, synth_speech, RoomSpec};
use crate::geometry::{dist, wrap_angle, ArrayGeometry, ArrayLayout};
use crate::signal::{convolve, FftPlan, MultichannelBuffer};
use crate::{Error, Result, SAMPLE_RATE};

/// Ranges for random scenes. All angles in degrees, lengths in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub array: ArrayLayout,
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    pub rt60_min: f64,
    pub rt60_max: f64,
    /// Probability of 1, 2, 3, 4 simultaneous speakers.
    pub source_count_weights: Vec<f64>,
    pub min_source_distance: f64,
    pub max_source_distance: f64,
    pub min_separation_deg: f64,
    pub theta_error_deg: f64,
    pub gain_db: [f64; 2],
    pub snr_db: [f64; 2],
    pub clip_seconds: f64,
    pub max_order: usize,
    pub wall_margin: f64,
    pub noise_directions: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            array: ArrayLayout::default(),
            room_min: [3.0, 3.0, 2.5],
            room_max: [8.0, 8.0, 4.0],
            rt60_min: 0.1,
            rt60_max: 0.5,
            source_count_weights: vec![0.1, 0.4, 0.4, 0.1],
            min_source_distance: 0.8,
            max_source_distance: 3.0,
            min_separation_deg: 10.0,
            theta_error_deg: 5.0,
            gain_db: [-5.0, 0.0],
            snr_db: [5.0, 25.0],
            clip_seconds: 4.0,
            max_order: 6,
            wall_margin: 0.3,
            noise_directions: 36,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        ArrayGeometry::from_layout(&self.array)?;
        for a in 0..3 {
            if !(self.room_min[a] > 0.0 && self.room_min[a] <= self.room_max[a]) {
                return bad(format!("room_min/room_max axis {a} must satisfy 0 < min <= max"));
            }
        }
        if !(self.rt60_min > 0.0 && self.rt60_min <= self.rt60_max) {
            return bad("rt60 range must satisfy 0 < min <= max".into());
        }
        let w = &self.source_count_weights;
        if w.is_empty() || w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return bad("source_count_weights must be non-negative with positive sum".into());
        }
        if !(self.min_source_distance > 0.0 && self.min_source_distance <= self.max_source_distance) {
            return bad("source distance range must satisfy 0 < min <= max".into());
        }
        if !(self.min_separation_deg >= 0.0 && self.theta_error_deg >= 0.0) {
            return bad("angles must be >= 0".into());
        }
        if self.gain_db[0] > self.gain_db[1] || self.snr_db[0] > self.snr_db[1] {
            return bad("gain_db and snr_db ranges must be [low, high]".into());
        }
        if !(self.clip_seconds > 0.0) {
            return bad("clip_seconds must be > 0".into());
        }
        if self.noise_directions == 0 {
            return bad("noise_directions must be >= 1".into());
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.clip_seconds * SAMPLE_RATE as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    pub position: [f64; 3],
    /// Azimuth in the array frame, radians.
    pub azimuth: f64,
    /// Horizontal distance from the array center.
    pub distance: f64,
    pub gain_db: f64,
    /// Dry signal before gain, `num_samples` long.
    pub signal: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub rt60: f64,
    /// Array layout in its own frame (mic 0 is the reference).
    pub array: ArrayGeometry,
    pub array_center: [f64; 3],
    pub array_rotation: f64,
    pub sources: Vec<SourceSpec>,
    pub noise_directions: usize,
    pub snr_db: f64,
    pub target_index: usize,
    pub true_theta: f64,
    pub input_theta: f64,
    pub num_samples: usize,
}

impl SceneSpec {
    /// World positions of the mics.
    pub fn mic_positions(&self) -> Vec<[f64; 3]> {
        self.array
            .rotated(self.array_rotation)
            .positions()
            .iter()
            .map(|p| [p[0] + self.array_center[0], p[1] + self.array_center[1], p[2] + self.array_center[2]])
            .collect()
    }

    /// Check the geometric and range constraints a sampled scene must satisfy.
    pub fn validate(&self, config: &SceneConfig) -> Result<()> {
        let fail = |m: String| Err(Error::Scene(m));
        self.room.validate()?;
        if self.sources.is_empty() || self.target_index >= self.sources.len() {
            return fail("scene needs a target source".into());
        }
        for p in self.mic_positions() {
            if !self.room.contains(&p) {
                return fail(format!("microphone {p:?} outside the room"));
            }
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !self.room.contains(&s.position) {
                return fail(format!("source {i} outside the room"));
            }
            if dist(&s.position, &self.array_center) < config.min_source_distance {
                return fail(format!("source {i} closer than {} m", config.min_source_distance));
            }
            if !(config.gain_db[0]..=config.gain_db[1]).contains(&s.gain_db) {
                return fail(format!("source {i} gain {} dB out of range", s.gain_db));
            }
            if s.signal.len() != self.num_samples {
                return fail(format!("source {i} signal length mismatch"));
            }
            for t in &self.sources[..i] {
                let sep = wrap_angle(s.azimuth - t.azimuth).abs().to_degrees();
                if sep < config.min_separation_deg {
                    return fail(format!("sources separated by only {sep:.2} deg"));
                }
            }
        }
        let err = wrap_angle(self.input_theta - self.true_theta).abs().to_degrees();
        if err >= config.theta_error_deg.max(f64::MIN_POSITIVE) && config.theta_error_deg > 0.0 {
            return fail(format!("input direction error {err:.3} deg"));
        }
        if !(config.snr_db[0]..=config.snr_db[1]).contains(&self.snr_db) {
            return fail(format!("snr {} dB out of range", self.snr_db));
        }
        Ok(())
    }
}

/// Rendered clip: mixture at every mic and the dry target at mic 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingClip {
    pub mixture: MultichannelBuffer<f32>,
    pub target_dry: Vec<f32>,
    pub theta_input: f64,
    pub true_theta: f64,
    pub num_sources: usize,
    pub rt60: f64,
    pub snr_db: f64,
}

fn pick_count<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i + 1;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0) + 1
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Active-interval speech: a random window of at least 62.5% of the clip,
/// so any two sources overlap for at least a quarter of the clip (1 s of 4 s).
fn source_signal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut x = synth_speech(rng, n);
    let len = ((uniform(rng, 0.625, 1.0) * n as f64) as usize).min(n);
    let start = rng.random_range(0..=n - len);
    let fade = 160.min(len / 2);
    for (i, v) in x.iter_mut().enumerate() {
        let g = if i < start || i >= start + len {
            0.0
        } else if i < start + fade {
            (i - start) as f64 / fade as f64
        } else if i >= start + len - fade {
            (start + len - 1 - i) as f64 / fade as f64
        } else {
            1.0
        };
        *v *= g;
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.1 / rms);
    }
    x
}

/// Draw a scene from the configured ranges. Rooms that cannot host the
/// drawn sources after bounded retries are resampled.
pub fn sample_scene<R: Rng + ?Sized>(rng: &mut R, config: &SceneConfig) -> Result<SceneSpec> {
    config.validate()?;
    let array = ArrayGeometry::from_layout(&config.array)?;
    let num_samples = config.num_samples();
    let count = pick_count(rng, &config.source_count_weights);
    let radius = array
        .positions()
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
        .fold(0.0, f64::max);
    let margin = config.wall_margin;
    let min_sep = config.min_separation_deg.to_radians();

    for _ in 0..200 {
        let dims = [0, 1, 2].map(|a| uniform(rng, config.room_min[a], config.room_max[a]));
        let rt60 = uniform(rng, config.rt60_min, config.rt60_max);
        let (alpha, clamped) = absorption_for_rt60(dims, rt60)?;
        if clamped {
            // this room cannot be that dry; the label would be wrong
            continue;
        }
        let room = RoomSpec::uniform(dims, alpha, config.max_order)?;
        let span = margin + radius;
        if dims.iter().any(|d| *d <= 2.0 * span) {
            continue;
        }
        let center = [
            uniform(rng, span, dims[0] - span),
            uniform(rng, span, dims[1] - span),
            uniform(rng, 1.0f64.min(dims[2] / 2.0), 1.8f64.min(dims[2] - margin)),
        ];
        let rotation = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);

        let mut sources: Vec<SourceSpec> = Vec::with_capacity(count);
        let mut tries = 0;
        while sources.len() < count && tries < 100 {
            tries += 1;
            let az = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
            if sources.iter().any(|s| wrap_angle(az - s.azimuth).abs() < min_sep) {
                continue;
            }
            let d = uniform(rng, config.min_source_distance, config.max_source_distance);
            let world = az + rotation;
            let z = uniform(rng, 1.2f64.min(dims[2] / 2.0), 1.9f64.min(dims[2] - margin));
            let pos = [center[0] + d * world.cos(), center[1] + d * world.sin(), z];
            let inside = (0..3).all(|a| pos[a] > margin && pos[a] < dims[a] - margin);
            if !inside {
                continue;
            }
            sources.push(SourceSpec {
                position: pos,
                azimuth: az,
                distance: d,
                gain_db: uniform(rng, config.gain_db[0], config.gain_db[1]),
                signal: Vec::new(),
            });
        }
        if sources.len() < count {
            continue;
        }
        for s in &mut sources {
            s.signal = source_signal(rng, num_samples);
        }
        let target_index = rng.random_range(0..count);
        let true_theta = sources[target_index].azimuth;
        let e = config.theta_error_deg.to_radians();
        let input_theta = wrap_angle(true_theta + if e > 0.0 { rng.random_range(-e..e) * (1.0 - 1e-9) } else { 0.0 });
        let scene = SceneSpec {
            room,
            rt60,
            array: array.clone(),
            array_center: center,
            array_rotation: rotation,
            sources,
            noise_directions: config.noise_directions,
            snr_db: uniform(rng, config.snr_db[0], config.snr_db[1]),
            target_index,
            true_theta,
            input_theta,
            num_samples,
        };
        scene.validate(config)?;
        return Ok(scene);
    }
    Err(Error::Scene("could not place sources after 200 room draws".into()))
}

/// Far-field plane wave from `theta` across `geometry`, mic 0 receiving
/// `signal` unchanged; other mics get band-limited fractional delays.
pub fn plane_wave(geometry: &ArrayGeometry, theta: f64, signal: &[f64]) -> Vec<Vec<f64>> {
    let n = (signal.len() + 256).next_power_of_two();
    let plan = FftPlan::<f64>::new(n).expect("power of two");
    let mut padded = signal.to_vec();
    padded.resize(n, 0.0);
    let mut scratch = Vec::new();
    let spec = plan.forward_real(&padded, &mut scratch);
    let fs = SAMPLE_RATE as f64;
    let t0 = geometry.toa(theta, 0);
    (0..geometry.num_mics())
        .map(|i| {
            if i == 0 {
                return signal.to_vec();
            }
            let tau = geometry.toa(theta, i) - t0;
            let bins: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(k, x)| x * Complex64::cis(-2.0 * std::f64::consts::PI * k as f64 * fs / n as f64 * tau))
                .collect();
            let mut out = vec![0.0; n];
            plan.inverse_real(&bins, &mut scratch, &mut out);
            out.truncate(signal.len());
            out
        })
        .collect()
}

/// Approximately isotropic noise: `directions` equally spaced horizontal
/// plane waves, each carrying independent pink Gaussian noise, summed at
/// every mic. `mic_offsets` are positions relative to the array center.
pub fn diffuse_noise<R: Rng + ?Sized>(
    rng: &mut R,
    mic_offsets: &[[f64; 3]],
    speed_of_sound: f64,
    num_samples: usize,
    directions: usize,
) -> Vec<Vec<f64>> {
    let n = num_samples.max(2).next_power_of_two().max(65536);
    let bins = n / 2 + 1;
    let fs = SAMPLE_RATE as f64;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let shape: Vec<f64> = (0..bins)
        .map(|k| {
            let f = k as f64 * fs / n as f64;
            if k == 0 {
                0.0
            } else {
                (100.0 / f.max(50.0)).sqrt()
            }
        })
        .collect();
    let mut acc = vec![vec![Complex64::new(0.0, 0.0); bins]; mic_offsets.len()];
    let offset = rng.random_range(0.0..2.0 * std::f64::consts::PI / directions as f64);
    for d in 0..directions {
        let theta = offset + 2.0 * std::f64::consts::PI * d as f64 / directions as f64;
        let u = crate::geometry::direction(theta);
        let src: Vec<Complex64> = shape
            .iter()
            .map(|s| Complex64::new(normal.sample(rng), normal.sample(rng)) * *s)
            .collect();
        for (m, p) in mic_offsets.iter().enumerate() {
            let tau = -(p[0] * u[0] + p[1] * u[1] + p[2] * u[2]) / speed_of_sound;
            let step = Complex64::cis(-2.0 * std::f64::consts::PI * fs / n as f64 * tau);
            let mut ph = Complex64::new(1.0, 0.0);
            for (a, s) in acc[m].iter_mut().zip(&src) {
                *a += s * ph;
                ph *= step;
            }
        }
    }
    let plan = FftPlan::<f64>::new(n).expect("power of two");
    let mut scratch = Vec::new();
    acc.iter()
        .map(|spec| {
            let mut out = vec![0.0; n];
            plan.inverse_real(spec, &mut scratch, &mut out);
            out.truncate(num_samples);
            out
        })
        .collect()
}

fn power(chs: &[Vec<f64>]) -> f64 {
    chs.iter().flatten().map(|v| v * v).sum()
}

/// Render the reverberant noisy mixture and the dry, direct-path-only target
/// at mic 0. Pure given the scene and the rng state (which only drives noise).
pub fn render_clip<R: Rng + ?Sized>(scene: &SceneSpec, rng: &mut R) -> Result<TrainingClip> {
    let mics = scene.mic_positions();
    let n = scene.num_samples;
    let c = scene.array.speed_of_sound();
    let mut speech = vec![vec![0.0; n]; mics.len()];
    for src in &scene.sources {
        let g = 10f64.powf(src.gain_db / 20.0);
        let x: Vec<f64> = src.signal.iter().map(|v| v * g).collect();
        for (m, mic) in mics.iter().enumerate() {
            let rir = image_source_rir(&scene.room, &src.position, mic, c)?;
            let y = convolve(&x, &rir);
            for (a, b) in speech[m].iter_mut().zip(&y) {
                *a += b;
            }
        }
    }
    let target = &scene.sources[scene.target_index];
    let direct_room = RoomSpec {
        max_order: 0,
        ..scene.room.clone()
    };
    let g = 10f64.powf(target.gain_db / 20.0);
    let x: Vec<f64> = target.signal.iter().map(|v| v * g).collect();
    let direct = image_source_rir(&direct_room, &target.position, &mics[0], c)?;
    let mut dry = convolve(&x, &direct);
    dry.truncate(n);

    let mut mixture = speech;
    if scene.snr_db.is_finite() {
        let offsets = scene.array.rotated(scene.array_rotation).positions().to_vec();
        let noise = diffuse_noise(rng, &offsets, c, n, scene.noise_directions);
        let ps = power(&mixture);
        let pn = power(&noise);
        if pn > 0.0 && ps > 0.0 {
            let k = (ps / pn / 10f64.powf(scene.snr_db / 10.0)).sqrt();
            for (m, ns) in mixture.iter_mut().zip(&noise) {
                for (a, b) in m.iter_mut().zip(ns) {
                    *a += k * b;
                }
            }
        }
    }

    let peak = mixture.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.9 { 0.9 / peak } else { 1.0 };
    let channels: Vec<Vec<f32>> = mixture
        .iter()
        .map(|ch| ch.iter().map(|v| (v * scale) as f32).collect())
        .collect();
    Ok(TrainingClip {
        mixture: MultichannelBuffer::new(channels)?,
        target_dry: dry.iter().map(|v| (v * scale) as f32).collect(),
        theta_input: scene.input_theta,
        true_theta: scene.true_theta,
        num_sources: scene.sources.len(),
        rt60: scene.rt60,
        snr_db: scene.snr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_scene() {
        let cfg = SceneConfig::default();
        let a = sample_scene(&mut ChaCha8Rng::seed_from_u64(9), &cfg).unwrap();
        let b = sample_scene(&mut ChaCha8Rng::seed_from_u64(9), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scenes_satisfy_constraints() {
        let cfg = SceneConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = sample_scene(&mut rng, &cfg).unwrap();
            s.validate(&cfg).unwrap();
            // every pair of sources shares at least 1 s of activity
            let active: Vec<Vec<bool>> = s.sources.iter().map(|x| x.signal.iter().map(|v| *v != 0.0).collect()).collect();
            let span = |a: &[bool]| (a.iter().position(|v| *v), a.iter().rposition(|v| *v));
            for i in 0..active.len() {
                for j in 0..i {
                    if let ((Some(a0), Some(a1)), (Some(b0), Some(b1))) = (span(&active[i]), span(&active[j])) {
                        let overlap = a1.min(b1) as i64 - a0.max(b0) as i64;
                        assert!(overlap >= 15_000, "overlap {overlap}");
                    }
                }
            }
        }
    }

    #[test]
    fn source_count_histogram() {
        let weights = [0.1, 0.4, 0.4, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hist = [0usize; 4];
        for _ in 0..10_000 {
            hist[pick_count(&mut rng, &weights) - 1] += 1;
        }
        for (h, w) in hist.iter().zip(&weights) {
            assert!((*h as f64 / 10_000.0 - w).abs() < 0.02, "{hist:?}");
        }
    }

    fn simple_scene(alpha: f64, snr: f64, positions: &[[f64; 3]]) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let array = ArrayGeometry::circular(6, 0.05).unwrap();
        SceneSpec {
            room: RoomSpec::uniform([6.0, 5.0, 3.0], alpha, 3).unwrap(),
            rt60: 0.3,
            array,
            array_center: [3.0, 2.5, 1.5],
            array_rotation: 0.4,
            sources: positions
                .iter()
                .map(|p| SourceSpec {
                    position: *p,
                    azimuth: (p[1] - 2.5).atan2(p[0] - 3.0) - 0.4,
                    distance: 1.0,
                    gain_db: -2.0,
                    signal: source_signal(&mut rng, 16000),
                })
                .collect(),
            noise_directions: 36,
            snr_db: snr,
            target_index: 0,
            true_theta: 0.0,
            input_theta: 0.0,
            num_samples: 16000,
        }
    }

    #[test]
    fn anechoic_single_source_equals_target() {
        let scene = simple_scene(1.0, f64::INFINITY, &[[4.5, 3.0, 1.5]]);
        let clip = render_clip(&scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (a, b) in clip.mixture.channel(0).iter().zip(&clip.target_dry) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn snr_is_met() {
        let scene = simple_scene(0.4, 12.0, &[[4.5, 3.0, 1.5], [1.5, 1.0, 1.4]]);
        let clean = render_clip(&SceneSpec { snr_db: f64::INFINITY, ..scene.clone() }, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let noisy = render_clip(&scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let (mut ps, mut pn) = (0.0f64, 0.0f64);
        for m in 0..6 {
            for (a, b) in clean.mixture.channel(m).iter().zip(noisy.mixture.channel(m)) {
                ps += (*a as f64).powi(2);
                pn += (*b as f64 - *a as f64).powi(2);
            }
        }
        let snr = 10.0 * (ps / pn).log10();
        assert!((snr - 12.0).abs() < 0.5, "{snr}");
    }

    #[test]
    fn permuting_sources_keeps_mixture() {
        let mut scene = simple_scene(0.4, f64::INFINITY, &[[4.5, 3.0, 1.5], [1.5, 1.0, 1.4], [2.0, 4.2, 1.6]]);
        let a = render_clip(&scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        scene.sources.rotate_left(1);
        scene.target_index = 2;
        let b = render_clip(&scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for m in 0..6 {
            for (x, y) in a.mixture.channel(m).iter().zip(b.mixture.channel(m)) {
                assert!((x - y).abs() < 1e-7);
            }
        }
        assert_eq!(a.target_dry, b.target_dry);
    }

    #[test]
    fn disjoint_sources_superpose() {
        let mut scene = simple_scene(1.0, f64::INFINITY, &[[4.5, 3.0, 1.5], [1.5, 1.0, 1.4]]);
        for (i, s) in scene.sources.iter_mut().enumerate() {
            for (t, v) in s.signal.iter_mut().enumerate() {
                let first_half = t < 7000;
                let keep = if i == 0 { first_half } else { t >= 9000 };
                if !keep {
                    *v = 0.0;
                }
            }
        }
        let clip = render_clip(&scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ch = clip.mixture.channel(0);
        let e = |r: std::ops::Range<usize>| ch[r].iter().map(|v| v * v).sum::<f32>();
        assert!(e(0..7000) > 0.0);
        assert!(e(9200..16000) > 0.0);
        // the gap between the two intervals only holds the propagation tails
        assert!(e(7300..9000) < 1e-12);
        // first interval is exactly the target
        for (a, b) in ch[..7000].iter().zip(&clip.target_dry[..7000]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn plane_wave_reference_is_exact() {
        let g = ArrayGeometry::circular(6, 0.05).unwrap();
        let x: Vec<f64> = (0..1000).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let y = plane_wave(&g, 0.7, &x);
        assert_eq!(y[0], x);
        assert_eq!(y.len(), 6);
    }
}
