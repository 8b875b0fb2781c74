use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use dirhear::config::EngineConfig;
use dirhear::nn::{ModelConfig, ModelWeights};
use dirhear::room::{generate_dataset, Dataset};
use dirhear::signal::wav::{read_wav, write_wav, WavFormat};
use dirhear::signal::MultichannelBuffer;
use dirhear::stream::{self, state_bytes, total_delay, StreamState};
use dirhear::train::{self, EvalReport};
use dirhear::BLOCK_SIZE;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Exit;

/// Load a checkpoint; a missing file exits with status 2.
pub fn load_weights(path: &Path) -> anyhow::Result<ModelWeights<f32>> {
    if !path.is_file() {
        return Err(Exit {
            code: 2,
            message: format!("weights file not found: {}", path.display()),
        }
        .into());
    }
    Ok(ModelWeights::load(path)?)
}

pub fn gen_data(cfg: &EngineConfig, out: &Path, count: usize, jobs: usize) -> anyhow::Result<()> {
    let t = Instant::now();
    let m = generate_dataset(out, &cfg.scene, count, cfg.seed, jobs)?;
    let mut per_count = [0usize; 4];
    for c in &m.clips {
        per_count[(c.num_sources - 1).min(3)] += 1;
    }
    println!("wrote {count} clips to {} in {:.1} s", out.display(), t.elapsed().as_secs_f64());
    println!(
        "sources 1/2/3/4: {}/{}/{}/{}  config sha256 {}",
        per_count[0], per_count[1], per_count[2], per_count[3], m.config_sha256
    );
    Ok(())
}

pub fn train(cfg: &EngineConfig, data: &Path, val: Option<&Path>, out: &Path, resume: bool) -> anyhow::Result<()> {
    let model = cfg.model_config()?;
    let mut tc = cfg.train.clone();
    tc.beamformer = cfg.beamformer.clone();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?).with_context(|| format!("writing config into {}", out.display()))?;
    let o = train::train(data, val, out, &model, &tc, resume)?;
    println!(
        "{} steps, {} epochs{} in {:.1} min of training",
        o.steps,
        o.epochs_completed,
        if o.finished { "" } else { " (stopped by limit)" },
        o.elapsed_seconds / 60.0
    );
    for (epoch, r) in &o.validations {
        println!("epoch {epoch}: val SI-SDRi {:.2} dB, SDRi {:.2} dB", r.mean_si_sdri(), r.mean_sdri());
    }
    if let Some(b) = o.best_val_si_sdri {
        println!("best val SI-SDRi {b:.2} dB");
    }
    println!("last checkpoint {}", o.last_checkpoint.display());
    if let Some(p) = o.best_checkpoint {
        println!("best checkpoint {}", p.display());
    }
    Ok(())
}

fn print_report(r: &EvalReport) {
    for id in &r.skipped {
        eprintln!("warning: {id}: no usable groundtruth, skipped");
    }
    println!("clips {}  skipped {}", r.clips.len(), r.skipped.len());
    println!("mean SI-SDRi {:.2} dB", r.mean_si_sdri());
    println!("mean SDRi    {:.2} dB", r.mean_sdri());
}

pub fn eval(cfg: &EngineConfig, weights: Option<&Path>, data: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let ds = Dataset::open(data)?;
    let report = match weights {
        Some(p) => train::evaluate(&load_weights(p)?, &ds, &cfg.beamformer)?,
        None => train::evaluate_mvdr(&ds, &cfg.beamformer)?,
    };
    if let Some(p) = out {
        report.write_tsv(p)?;
    }
    print_report(&report);
    Ok(())
}

pub fn separate(cfg: &EngineConfig, weights: &Path, input: &Path, output: &Path, streaming: bool, keep_delay: bool) -> anyhow::Result<()> {
    let w = load_weights(weights)?;
    let geometry = cfg.geometry()?;
    let mix = read_wav(input)?;
    let mics = w.config().mics;
    if mix.num_channels() != mics {
        anyhow::bail!("{} has {} channels, the weights expect {mics}", input.display(), mix.num_channels());
    }
    if geometry.num_mics() != mics {
        anyhow::bail!("configured array has {} microphones, the weights expect {mics}", geometry.num_mics());
    }
    let len = mix.len();
    let delay = total_delay(w.config());
    // pad so the delayed tail comes out too
    let padded_len = (len + delay).div_ceil(BLOCK_SIZE) * BLOCK_SIZE;
    let mut chans = mix.into_channels();
    chans.iter_mut().for_each(|c| c.resize(padded_len, 0.0));
    let padded = MultichannelBuffer::new(chans)?;
    let theta = cfg.theta();
    let y = if streaming {
        let mut st = StreamState::new(w.config(), &w, geometry, theta)?;
        stream::stream_signal(&mut st, &padded)?
    } else {
        stream::offline_forward(&w, &geometry, cfg.beamformer.clone(), theta, &padded)?
    };
    let out = if keep_delay { y[..len].to_vec() } else { y[delay..delay + len].to_vec() };
    write_wav(output, &MultichannelBuffer::new(vec![out])?, WavFormat::Float32)?;
    eprintln!(
        "{} mode, theta {:.1} deg, {} samples -> {}",
        if streaming { "streaming" } else { "offline" },
        theta.to_degrees(),
        len,
        output.display()
    );
    Ok(())
}

pub fn bench(cfg: &EngineConfig, weights: Option<&Path>, duration: f64) -> anyhow::Result<()> {
    let w = match weights {
        Some(p) => load_weights(p)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            ModelWeights::init(&cfg.model_config()?, &mut rng)?
        }
    };
    let model = w.config().clone();
    let geometry = cfg.geometry()?;
    if geometry.num_mics() != model.mics {
        anyhow::bail!("configured array has {} microphones, the weights expect {}", geometry.num_mics(), model.mics);
    }
    let r = stream::bench(&model, &w, &geometry, duration, cfg.seed)?;
    println!("blocks timed      {}", r.blocks);
    println!("stage             mean ms   p95 ms");
    for (name, s) in [
        ("beamformers", r.beamformers),
        ("network", r.network),
        ("overhead", r.overhead),
        ("total", r.total),
    ] {
        println!("{name:<17} {:>7.3}  {:>7.3}", s.mean_ms, s.p95_ms);
    }
    let b = r.budget;
    println!("buffer            {:.1} ms", b.buffer_ms);
    println!("processing        {:.3} ms", b.processing_ms);
    println!("lookahead         {:.1} ms", b.lookahead_ms);
    println!("end-to-end        {:.3} ms", b.end_to_end_ms);
    println!("prebeam delay     {:.1} ms (inside the buffer interval)", b.prebeam_delay_ms);
    println!(
        "real time         {} (margin {:.3} ms per block)",
        if b.is_real_time() { "yes" } else { "no" },
        r.real_time_margin_ms
    );
    print_state_bytes(&model);
    Ok(())
}

fn print_state_bytes(model: &ModelConfig) {
    let s = state_bytes(model);
    println!("cache copy bytes  strided {}  plain TCN {}", s.strided, s.plain_tcn);
    println!("cache reduction   {:.1}%", 100.0 * s.reduction());
}

pub fn info(model: &ModelConfig) {
    let counts = model.count_params_and_macs();
    println!(
        "model             k={} N={} M={} H={} C={} D={}, {} mics, beamformer inputs {}",
        model.k,
        model.stacks,
        model.layers,
        model.hidden,
        model.encoder_channels,
        model.block_channels,
        model.mics,
        if model.use_beamformers { "on" } else { "off" }
    );
    println!("parameters        {:.3} M ({})", counts.params as f64 / 1e6, counts.params);
    println!("MAC/s             {:.3} G", counts.macs_per_second / 1e9);
    println!(
        "receptive field   {:.3} s ({} samples)",
        model.receptive_field(),
        model.receptive_field_samples()
    );
    println!("lookahead         {:.1} ms ({} samples)", model.lookahead_ms(), model.lookahead_samples());
    print_state_bytes(model);
}
