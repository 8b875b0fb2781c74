use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{render_clip, sample_scene, SceneConfig, TrainingClip};
use crate::geometry::ArrayGeometry;
use crate::signal::wav::{read_wav, temp_sibling, write_wav, WavFormat};
use crate::signal::MultichannelBuffer;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Sidecar record for one clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub id: String,
    pub theta_input: f64,
    pub true_theta: f64,
    pub num_sources: usize,
    pub rt60: f64,
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config_sha256: String,
    pub seed: u64,
    pub num_mics: usize,
    pub config: SceneConfig,
    pub clips: Vec<ClipMeta>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let tmp = temp_sibling(path);
    std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn config_hash(config: &SceneConfig) -> Result<String> {
    let text = toml::to_string(config).map_err(|e| Error::Internal(e.to_string()))?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Seed of clip `index` in a dataset generated with `seed`.
pub fn clip_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Sample and render the clip a given per-clip seed produces.
pub fn clip_from_seed(config: &SceneConfig, seed: u64) -> Result<TrainingClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = sample_scene(&mut rng, config)?;
    render_clip(&scene, &mut rng)
}

fn write_clip(dir: &Path, meta: &ClipMeta, clip: &TrainingClip) -> Result<()> {
    write_wav(dir.join(format!("{}.mix.wav", meta.id)), &clip.mixture, WavFormat::Float32)?;
    let gt = MultichannelBuffer::new(vec![clip.target_dry.clone()])?;
    write_wav(dir.join(format!("{}.gt.wav", meta.id)), &gt, WavFormat::Float32)?;
    let text = toml::to_string(meta).map_err(|e| Error::Internal(e.to_string()))?;
    write_text(&dir.join(format!("{}.meta.toml", meta.id)), &text)
}

/// Render `count` clips into `out_dir` on `jobs` worker threads. Output is
/// byte-identical for the same config, count and seed regardless of `jobs`.
pub fn generate_dataset(
    out_dir: impl AsRef<Path>,
    config: &SceneConfig,
    count: usize,
    seed: u64,
    jobs: usize,
) -> Result<DatasetManifest> {
    config.validate()?;
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let jobs = jobs.clamp(1, count.max(1));
    let results: Vec<Result<Vec<(usize, ClipMeta)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                s.spawn(move || {
                    let mut metas = Vec::new();
                    for i in (w..count).step_by(jobs) {
                        let clip_seed = clip_seed(seed, i);
                        let clip = clip_from_seed(config, clip_seed)?;
                        let meta = ClipMeta {
                            id: format!("clip{i:05}"),
                            theta_input: clip.theta_input,
                            true_theta: clip.true_theta,
                            num_sources: clip.num_sources,
                            rt60: clip.rt60,
                            snr_db: clip.snr_db,
                            seed: clip_seed,
                        };
                        write_clip(dir, &meta, &clip)?;
                        metas.push((i, meta));
                    }
                    Ok(metas)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("generator thread panicked".into()))))
            .collect()
    });
    let mut clips = Vec::with_capacity(count);
    for r in results {
        clips.extend(r?);
    }
    clips.sort_by_key(|(i, _)| *i);
    let manifest = DatasetManifest {
        config_sha256: config_hash(config)?,
        seed,
        num_mics: ArrayGeometry::from_layout(&config.array)?.num_mics(),
        config: config.clone(),
        clips: clips.into_iter().map(|(_, m)| m).collect(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    write_text(&dir.join(MANIFEST_FILE), &text)?;
    Ok(manifest)
}

/// A generated dataset on disk.
#[derive(Clone, Debug)]
pub struct Dataset {
    dir: PathBuf,
    manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(Dataset { dir, manifest })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.manifest.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.clips.is_empty()
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::from_layout(&self.manifest.config.array)
    }

    pub fn meta(&self, index: usize) -> &ClipMeta {
        &self.manifest.clips[index]
    }

    pub fn load_mixture(&self, index: usize) -> Result<MultichannelBuffer<f32>> {
        let meta = &self.manifest.clips[index];
        read_wav(self.dir.join(format!("{}.mix.wav", meta.id)))
    }

    /// Mono groundtruth, or `None` when the clip has no `.gt.wav`.
    pub fn load_groundtruth(&self, index: usize) -> Result<Option<Vec<f32>>> {
        let meta = &self.manifest.clips[index];
        let path = self.dir.join(format!("{}.gt.wav", meta.id));
        if !path.exists() {
            return Ok(None);
        }
        let gt = read_wav(path)?;
        if gt.num_channels() != 1 {
            return Err(Error::Input(format!("{}: groundtruth must be mono", meta.id)));
        }
        Ok(Some(gt.into_channels().remove(0)))
    }

    pub fn load(&self, index: usize) -> Result<TrainingClip> {
        let meta = &self.manifest.clips[index];
        let mixture = self.load_mixture(index)?;
        let gt = self
            .load_groundtruth(index)?
            .ok_or_else(|| Error::Input(format!("{}: missing groundtruth", meta.id)))?;
        if gt.len() != mixture.len() {
            return Err(Error::Input(format!("{}: groundtruth must match the mixture length", meta.id)));
        }
        Ok(TrainingClip {
            target_dry: gt,
            mixture,
            theta_input: meta.theta_input,
            true_theta: meta.true_theta,
            num_sources: meta.num_sources,
            rt60: meta.rt60,
            snr_db: meta.snr_db,
        })
    }
}
