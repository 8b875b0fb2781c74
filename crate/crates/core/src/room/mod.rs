//! Synthetic scenes: image-source room impulse responses, speech-like
//! sources, diffuse noise and the clip/dataset generator.

mod dataset;
mod scene;
mod speech;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SAMPLE_RATE};

pub use dataset::{clip_from_seed, clip_seed, generate_dataset, ClipMeta, Dataset, DatasetManifest, MANIFEST_FILE};
pub use scene::{
    diffuse_noise, plane_wave, render_clip, sample_scene, SceneConfig, SceneSpec, SourceSpec, TrainingClip,
};
pub use speech::synth_speech;

/// Direct path gain is 1 at this distance.
pub const REFERENCE_DISTANCE: f64 = 1.0;

/// Half-width of the windowed-sinc fractional delay (16 taps total).
const SINC_HALF: i64 = 8;

/// Shoebox room. Wall order in `absorption`: x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: [f64; 3],
    pub absorption: [f64; 6],
    pub max_order: usize,
}

impl RoomSpec {
    pub fn uniform(dimensions: [f64; 3], alpha: f64, max_order: usize) -> Result<Self> {
        let r = RoomSpec {
            dimensions,
            absorption: [alpha; 6],
            max_order,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Scene(format!("room dimensions must be > 0: {:?}", self.dimensions)));
        }
        if self.absorption.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::Scene(format!("absorption must be in (0, 1]: {:?}", self.absorption)));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + y * z + x * z)
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        p.iter().zip(&self.dimensions).all(|(v, d)| *v > 0.0 && *v < *d)
    }
}

/// Sabine absorption for a target RT60: `0.161 V / (S rt60)`.
/// Returns the clamped coefficient and whether it had to be clamped to 1.
pub fn absorption_for_rt60(dimensions: [f64; 3], rt60: f64) -> Result<(f64, bool)> {
    if !(rt60 > 0.0) {
        return Err(Error::Scene(format!("rt60 must be > 0, got {rt60}")));
    }
    let [x, y, z] = dimensions;
    let v = x * y * z;
    let s = 2.0 * (x * y + y * z + x * z);
    let alpha = 0.161 * v / (s * rt60);
    if alpha > 1.0 {
        Ok((1.0, true))
    } else {
        Ok((alpha, false))
    }
}

/// Reflection order needed so that every image within `seconds` of
/// propagation is included (diagonal lattice directions need up to sqrt(3)
/// times the axial order).
pub fn order_for_duration(room: &RoomSpec, seconds: f64, speed_of_sound: f64) -> usize {
    let min_side = room.dimensions.iter().cloned().fold(f64::INFINITY, f64::min);
    (3f64.sqrt() * seconds * speed_of_sound / min_side).ceil() as usize + 1
}

/// Add a windowed-sinc fractionally delayed impulse of `gain` at `delay` samples.
pub(crate) fn add_fractional_tap(out: &mut [f64], delay: f64, gain: f64) {
    let center = delay.floor() as i64;
    for n in center - SINC_HALF + 1..=center + SINC_HALF {
        if n < 0 || n as usize >= out.len() {
            continue;
        }
        let x = n as f64 - delay;
        let sinc = if x == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        let w = 0.5 * (1.0 + (std::f64::consts::PI * x / SINC_HALF as f64).cos());
        out[n as usize] += gain * sinc * w;
    }
}

/// One image: per-axis reflection counts against the low and high wall.
struct Image {
    pos: [f64; 3],
    hits: [[usize; 2]; 3],
}

fn images(room: &RoomSpec, src: &[f64; 3], max_order: usize) -> Vec<Image> {
    let n = max_order as i64;
    // per axis: (lattice index m, parity q) -> coordinate 2mL + (1-2q)s, hits |m-q| low, |m| high
    let axis: Vec<Vec<(f64, [usize; 2], usize)>> = (0..3)
        .map(|a| {
            let l = room.dimensions[a];
            let mut v = Vec::new();
            for m in -n..=n + 1 {
                for q in 0..2i64 {
                    let lo = (m - q).unsigned_abs() as usize;
                    let hi = m.unsigned_abs() as usize;
                    if lo + hi <= max_order {
                        let sign = if q == 0 { 1.0 } else { -1.0 };
                        v.push((2.0 * m as f64 * l + sign * src[a], [lo, hi], lo + hi));
                    }
                }
            }
            v
        })
        .collect();
    let mut out = Vec::new();
    for x in &axis[0] {
        for y in &axis[1] {
            if x.2 + y.2 > max_order {
                continue;
            }
            for z in &axis[2] {
                if x.2 + y.2 + z.2 <= max_order {
                    out.push(Image {
                        pos: [x.0, y.0, z.0],
                        hits: [x.1, y.1, z.1],
                    });
                }
            }
        }
    }
    out
}

/// Image-source impulse response from `src` to `mic` at 16 kHz, truncated at
/// reflection order `room.max_order`. Each image contributes
/// `prod(beta) * d_ref / d` at delay `d / c` with `beta = sqrt(1 - alpha)`.
pub fn image_source_rir(room: &RoomSpec, src: &[f64; 3], mic: &[f64; 3], speed_of_sound: f64) -> Result<Vec<f64>> {
    room.validate()?;
    if !room.contains(src) || !room.contains(mic) {
        return Err(Error::Scene("source and microphone must be strictly inside the room".into()));
    }
    if crate::geometry::dist(src, mic) < 1e-6 {
        return Err(Error::Scene("source coincides with microphone".into()));
    }
    let beta: Vec<f64> = room.absorption.iter().map(|a| (1.0 - a).max(0.0).sqrt()).collect();
    let fs = SAMPLE_RATE as f64;
    let imgs = images(room, src, room.max_order);
    let taps: Vec<(f64, f64)> = imgs
        .iter()
        .filter_map(|im| {
            let mut g = 1.0;
            for a in 0..3 {
                for side in 0..2 {
                    let h = im.hits[a][side];
                    if h > 0 {
                        g *= beta[2 * a + side].powi(h as i32);
                    }
                }
            }
            if g == 0.0 {
                return None;
            }
            let d = crate::geometry::dist(&im.pos, mic);
            Some((d / speed_of_sound * fs, g * REFERENCE_DISTANCE / d))
        })
        .collect();
    let max_delay = taps.iter().map(|t| t.0).fold(0.0, f64::max);
    let mut h = vec![0.0; max_delay.ceil() as usize + SINC_HALF as usize + 1];
    for (delay, gain) in taps {
        add_fractional_tap(&mut h, delay, gain);
    }
    Ok(h)
}

/// RT60 from Schroeder backward integration, line fit between -5 and -35 dB
/// extrapolated to -60 dB. `None` if the decay never reaches -35 dB.
pub fn schroeder_rt60(rir: &[f64]) -> Option<f64> {
    let mut edc = vec![0.0; rir.len()];
    let mut acc = 0.0;
    for i in (0..rir.len()).rev() {
        acc += rir[i] * rir[i];
        edc[i] = acc;
    }
    if acc <= 0.0 {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / acc).log10()).collect();
    let start = db.iter().position(|&v| v <= -5.0)?;
    let end = db.iter().position(|&v| v <= -35.0)?;
    if end <= start + 1 {
        return None;
    }
    let fs = SAMPLE_RATE as f64;
    let n = (end - start) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in db.iter().enumerate().take(end).skip(start) {
        let x = i as f64 / fs;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope < 0.0).then(|| -60.0 / slope)
}
