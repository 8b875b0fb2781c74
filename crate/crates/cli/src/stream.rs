//! stdin/stdout streaming with an optional theta control channel.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::mpsc;

use anyhow::Context;
use dirhear::config::EngineConfig;
use dirhear::geometry::wrap_angle;
use dirhear::stream::StreamState;
use dirhear::BLOCK_SIZE;

use crate::commands::load_weights;

/// Parse one control line; `None` for blank lines and `#` comments.
pub fn parse_control(line: &str) -> Option<Result<f64, String>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return None;
    }
    let mut it = line.split_whitespace();
    let parsed = match (it.next(), it.next(), it.next()) {
        (Some("theta"), Some(v), None) => v.parse::<f64>().ok().filter(|t| t.is_finite()),
        _ => None,
    };
    Some(parsed.map(wrap_angle).ok_or_else(|| format!("bad control line `{line}`, expected `theta <radians>`")))
}

fn spawn_control(path: &Path) -> mpsc::Receiver<f64> {
    let (tx, rx) = mpsc::channel();
    let path = path.to_path_buf();
    std::thread::spawn(move || {
        let file = match std::fs::File::open(&path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("warning: control channel {}: {e}", path.display());
                return;
            }
        };
        for line in BufReader::new(file).lines() {
            let Ok(line) = line else { break };
            match parse_control(&line) {
                Some(Ok(theta)) => {
                    if tx.send(theta).is_err() {
                        break;
                    }
                }
                Some(Err(msg)) => eprintln!("warning: {msg}"),
                None => {}
            }
        }
    });
    rx
}

/// Fill `buf` from `r`; returns the number of bytes read (short only at EOF).
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

pub fn run(cfg: &EngineConfig, weights: &Path, control: Option<&Path>) -> anyhow::Result<()> {
    let w = load_weights(weights)?;
    let geometry = cfg.geometry()?;
    let c = geometry.num_mics();
    let mut state = StreamState::new(w.config(), &w, geometry, cfg.theta())?;
    let updates = control.map(spawn_control);

    let mut stdin = std::io::stdin().lock();
    let mut stdout = std::io::stdout().lock();
    let mut bytes = vec![0u8; c * BLOCK_SIZE * 4];
    let mut block = vec![vec![0.0f32; BLOCK_SIZE]; c];
    let mut out = vec![0.0f32; BLOCK_SIZE];
    let mut out_bytes = vec![0u8; BLOCK_SIZE * 4];
    loop {
        let n = read_full(&mut stdin, &mut bytes).context("reading stdin")?;
        if n == 0 {
            break;
        }
        if n % (4 * c) != 0 {
            anyhow::bail!("stdin ended inside a frame: {n} bytes is not a multiple of {} ({c} channels)", 4 * c);
        }
        // a short final block is zero-padded
        bytes[n..].iter_mut().for_each(|b| *b = 0);
        for (i, frame) in bytes.chunks_exact(4 * c).enumerate() {
            for (ch, s) in frame.chunks_exact(4).enumerate() {
                block[ch][i] = f32::from_le_bytes(s.try_into().unwrap());
            }
        }
        if let Some(rx) = &updates {
            while let Ok(theta) = rx.try_recv() {
                state.set_theta(theta)?;
            }
        }
        state.process_block(&block, &mut out)?;
        for (d, v) in out_bytes.chunks_exact_mut(4).zip(&out) {
            d.copy_from_slice(&v.to_le_bytes());
        }
        stdout.write_all(&out_bytes).context("writing stdout")?;
        stdout.flush().context("writing stdout")?;
        if n < bytes.len() {
            break;
        }
    }
    Ok(())
}
