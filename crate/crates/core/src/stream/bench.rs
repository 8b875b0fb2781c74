use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::StreamState;
use crate::beamformer::PREBEAM_DELAY;
use crate::geometry::ArrayGeometry;
use crate::nn::{ModelConfig, ModelWeights};
use crate::{Result, BLOCK_SIZE, SAMPLE_RATE};

/// End-to-end latency: buffering, processing and decoder lookahead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencyBudget {
    pub buffer_ms: f64,
    pub processing_ms: f64,
    pub lookahead_ms: f64,
    pub end_to_end_ms: f64,
    /// Delay of the prebeam STFT; it overlaps the buffering interval and is
    /// not added to `end_to_end_ms`.
    pub prebeam_delay_ms: f64,
}

impl LatencyBudget {
    pub fn new(config: &ModelConfig, processing_ms: f64) -> Self {
        let buffer_ms = BLOCK_SIZE as f64 * 1000.0 / SAMPLE_RATE as f64;
        let lookahead_ms = config.lookahead_ms();
        LatencyBudget {
            buffer_ms,
            processing_ms,
            lookahead_ms,
            end_to_end_ms: buffer_ms + processing_ms + lookahead_ms,
            prebeam_delay_ms: PREBEAM_DELAY as f64 * 1000.0 / SAMPLE_RATE as f64,
        }
    }

    pub fn is_real_time(&self) -> bool {
        self.processing_ms <= self.buffer_ms
    }
}

/// Mean and 95th percentile of a per-block stage time, in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageTiming {
    pub mean_ms: f64,
    pub p95_ms: f64,
}

impl StageTiming {
    fn from_secs(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return StageTiming { mean_ms: 0.0, p95_ms: 0.0 };
        }
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let idx = ((v.len() as f64 * 0.95).ceil() as usize).clamp(1, v.len()) - 1;
        StageTiming {
            mean_ms: mean * 1e3,
            p95_ms: v[idx] * 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchReport {
    pub blocks: usize,
    pub beamformers: StageTiming,
    pub network: StageTiming,
    pub overhead: StageTiming,
    pub total: StageTiming,
    /// Built from the mean total per-block time.
    pub budget: LatencyBudget,
    /// `buffer_ms - mean processing`; negative means slower than real time.
    pub real_time_margin_ms: f64,
}

/// Time the streaming engine on `duration` seconds of random input.
pub fn bench(config: &ModelConfig, weights: &ModelWeights<f32>, geometry: &ArrayGeometry, duration: f64, seed: u64) -> Result<BenchReport> {
    let mut state = StreamState::new(config, weights, geometry.clone(), 0.0)?;
    let blocks = ((duration * SAMPLE_RATE as f64) as usize / BLOCK_SIZE).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block = vec![vec![0.0f32; BLOCK_SIZE]; geometry.num_mics()];
    let mut out = vec![0.0f32; BLOCK_SIZE];
    // a few untimed blocks to settle allocations and caches
    for _ in 0..8 {
        state.process_block(&block, &mut out)?;
    }
    let (mut bf, mut nn, mut over, mut total) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..blocks {
        for ch in &mut block {
            ch.iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
        }
        let t0 = Instant::now();
        let (b, n) = state.process_block_timed(&block, &mut out)?;
        let t = t0.elapsed().as_secs_f64();
        bf.push(b);
        nn.push(n);
        over.push((t - b - n).max(0.0));
        total.push(t);
    }
    let total = StageTiming::from_secs(total);
    let budget = LatencyBudget::new(config, total.mean_ms);
    Ok(BenchReport {
        blocks,
        beamformers: StageTiming::from_secs(bf),
        network: StageTiming::from_secs(nn),
        overhead: StageTiming::from_secs(over),
        total,
        real_time_margin_ms: budget.buffer_ms - total.mean_ms,
        budget,
    })
}
