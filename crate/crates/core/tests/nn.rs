use dirhear::nn::{
    self, apply_mask, ctanh, decoder_forward, encoder_forward, separator_forward, ComplexConvLayer, ComplexTensor, ModelConfig, ModelWeights,
    NormMode, NormState, TRelu,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny() -> ModelConfig {
    ModelConfig::new(2, 3, 2, 4, 4, 4, 2)
}

fn noisy_weights(cfg: &ModelConfig, seed: u64) -> ModelWeights<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = ModelWeights::<f64>::init(cfg, &mut rng).unwrap();
    for v in w.as_mut_slice() {
        *v += rng.random_range(-0.2..0.2);
    }
    w
}

fn rand_rows(rng: &mut ChaCha8Rng, rows: usize, len: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn rand_tensor(rng: &mut ChaCha8Rng, c: usize, f: usize) -> ComplexTensor<f64> {
    ComplexTensor::from_fn(c, f, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

#[test]
fn conv_output_length_and_channel_check() {
    let layer = ComplexConvLayer::<f64>::zeros(3, 2, 3, 2, 2).unwrap();
    let x = ComplexTensor::zeros(3, 20);
    // span 5: (20 - 5) / 2 + 1
    assert_eq!(layer.forward(&x).unwrap().frames(), 8);
    assert!(layer.forward(&ComplexTensor::zeros(2, 20)).is_err());
}

#[test]
fn conv_matches_nested_loops_with_stride() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut layer = ComplexConvLayer::<f64>::zeros(3, 4, 3, 2, 2).unwrap();
    for v in layer.weight_re.iter_mut().chain(layer.weight_im.iter_mut()).chain(layer.bias_re.iter_mut()) {
        *v = rng.random_range(-1.0..1.0);
    }
    let x = rand_tensor(&mut rng, 3, 31);
    let y = layer.forward(&x).unwrap();
    for o in 0..4 {
        for u in 0..y.frames() {
            let mut acc = Complex64::new(layer.bias_re[o], layer.bias_im[o]);
            for i in 0..3 {
                for kk in 0..3 {
                    let idx = layer.weight_index(o, i, kk);
                    acc += Complex64::new(layer.weight_re[idx], layer.weight_im[idx]) * x.get(i, 2 * u + 2 * kk);
                }
            }
            assert!((y.get(o, u) - acc).norm() < 1e-6 * acc.norm().max(1.0));
        }
    }
}

#[test]
fn trelu_public_examples() {
    let crelu = TRelu { h_rr: 1.0, h_ri: 0.0, h_ir: 0.0, h_ii: 1.0, b1: 0.0, b2: 0.0 };
    let x = ComplexTensor::from_fn(1, 1, |_, _| Complex64::new(3.0, -4.0));
    assert_eq!(nn::trelu(&[crelu], &x).unwrap().get(0, 0), Complex64::new(3.0, 0.0));
    let conj = TRelu { h_ii: -1.0, ..crelu };
    let x = ComplexTensor::from_fn(1, 1, |_, _| Complex64::new(1.0, -2.0));
    assert_eq!(nn::trelu(&[conj], &x).unwrap().get(0, 0), Complex64::new(1.0, 2.0));
    assert!(nn::trelu(&[crelu, crelu], &x).is_err());
}

#[test]
fn norm_public_scale_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = rand_tensor(&mut rng, 3, 64);
    let x10 = ComplexTensor::from_fn(3, 64, |c, t| x.get(c, t) * 10.0);
    let (one, zero) = (vec![1.0; 3], vec![0.0; 3]);
    let run = |t: &ComplexTensor<f64>| {
        nn::complex_norm((&one, &zero), (&zero, &zero), t, 1e-8, NormMode::PerClip, &mut NormState::new(3)).unwrap()
    };
    let (a, b) = (run(&x), run(&x10));
    for (p, q) in a.stacked().iter().zip(b.stacked()) {
        assert!((p - q).abs() < 1e-6);
    }
}

#[test]
fn encoder_frames_linearity_and_channels() {
    let cfg = tiny();
    let w = noisy_weights(&cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = rand_rows(&mut rng, cfg.input_channels(), 80);
    let e = encoder_forward(&w, &x).unwrap();
    assert_eq!(e.shape(), (cfg.encoder_channels, 7));
    let zeros = vec![vec![0.0; 80]; cfg.input_channels()];
    assert!(encoder_forward(&w, &zeros).unwrap().stacked().iter().all(|v| *v == 0.0));
    let x2: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
    let e2 = encoder_forward(&w, &x2).unwrap();
    for (a, b) in e.stacked().iter().zip(e2.stacked()) {
        assert!((2.0 * a - b).abs() < 1e-9);
    }
    assert!(encoder_forward(&w, &x[1..]).is_err());
}

#[test]
fn decoder_zero_and_linearity() {
    let cfg = tiny();
    let w = noisy_weights(&cfg, 3);
    assert_eq!(cfg.lookahead_samples(), 24);
    assert_eq!(cfg.lookahead_ms(), 1.5);
    assert!(decoder_forward(&w, &ComplexTensor::zeros(4, 10)).unwrap().iter().all(|v| *v == 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = rand_rows(&mut rng, cfg.input_channels(), 96);
    let b = rand_rows(&mut rng, cfg.input_channels(), 96);
    let ab: Vec<Vec<f64>> = a.iter().zip(&b).map(|(p, q)| p.iter().zip(q).map(|(x, y)| x + 0.5 * y).collect()).collect();
    let ed = |x: &[Vec<f64>]| decoder_forward(&w, &encoder_forward(&w, x).unwrap()).unwrap();
    let (za, zb, zab) = (ed(&a), ed(&b), ed(&ab));
    for i in 0..za.len() {
        assert!((za[i] + 0.5 * zb[i] - zab[i]).abs() < 1e-6);
    }
}

#[test]
fn zero_weights_give_constant_bias_mask() {
    let cfg = tiny();
    let mut w = ModelWeights::<f64>::zeros(&cfg).unwrap();
    let head = w.layout().head.clone().unwrap();
    let bias = w.layout().tensors()[head.bias].offset;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vals: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
    w.as_mut_slice()[bias..bias + 8].copy_from_slice(&vals);
    let latent = rand_tensor(&mut rng, 4, 40);
    let mask = separator_forward(&w, &latent).unwrap();
    assert_eq!(mask.shape(), latent.shape());
    for c in 0..4 {
        let b = Complex64::new(vals[c], vals[4 + c]);
        let expect = b * (b.norm().tanh() / b.norm());
        for t in 0..40 {
            assert!((mask.get(c, t) - expect).norm() < 1e-12);
        }
    }
}

#[test]
fn separator_is_causal() {
    let cfg = tiny();
    let w = noisy_weights(&cfg, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let latent = rand_tensor(&mut rng, 4, 64);
    let base = separator_forward(&w, &latent).unwrap();
    for _ in 0..6 {
        let t0 = rng.random_range(0..64);
        let mut p = latent.clone();
        p.set(1, t0, p.get(1, t0) + Complex64::new(0.5, -0.3));
        let m = separator_forward(&w, &p).unwrap();
        for c in 0..4 {
            for t in 0..t0 {
                assert_eq!(m.get(c, t), base.get(c, t), "frame {t} moved after perturbing {t0}");
            }
        }
        assert!((0..4).any(|c| (t0..64).any(|t| m.get(c, t) != base.get(c, t))));
    }
}

#[test]
fn network_lookahead_is_24_samples() {
    let cfg = tiny();
    let w = noisy_weights(&cfg, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = rand_rows(&mut rng, cfg.input_channels(), 400);
    let base = nn::separate_offline(&w, &x).unwrap();
    for n0 in [40usize, 137, 300] {
        let mut p = x.clone();
        p[2][n0] += 1.0;
        let z = nn::separate_offline(&w, &p).unwrap();
        for n in 0..n0 - 24 {
            assert_eq!(z[n], base[n], "sample {n} moved after perturbing {n0}");
        }
        assert!(z[n0 - 24..].iter().zip(&base[n0 - 24..]).any(|(a, b)| a != b));
    }
}

#[test]
fn zero_stack_count_is_encoder_plus_decoder() {
    let mut cfg = tiny();
    cfg.stacks = 0;
    let counts = nn::count_params_and_macs(&cfg);
    let (c, cin, k) = (cfg.encoder_channels, cfg.input_channels(), cfg.encoder_kernel);
    assert_eq!(counts.params, 2 * c * cin * k + c * k);
    assert_eq!(counts.macs_per_second, ((2 * c * cin * k + 2 * c * k) * 2000) as f64);
}

#[test]
fn gradients_match_finite_differences() {
    let cfg = tiny();
    let w = noisy_weights(&cfg, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let len = 128;
    let x: Vec<f64> = (0..cfg.input_channels() * len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |w: &ModelWeights<f64>| {
        let (g, o) = nn::forward(w, x.clone(), len, false).unwrap();
        g.value(o.output).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
    };
    let (g, o) = nn::forward(&w, x.clone(), len, true).unwrap();
    let grad = g.backward(&w, o.output, r.clone()).unwrap();
    let mut checked = 0;
    for t in w.layout().tensors() {
        for _ in 0..2 {
            let i = t.offset + rng.random_range(0..t.storage());
            let h = 1e-5;
            let mut wp = w.clone();
            wp.as_mut_slice()[i] += h;
            let mut wm = w.clone();
            wm.as_mut_slice()[i] -= h;
            let fd = (loss(&wp) - loss(&wm)) / (2.0 * h);
            let err = (fd - grad[i]).abs();
            assert!(err <= 1e-5 + 1e-4 * fd.abs(), "{} slot {i}: analytic {} vs numeric {fd}", t.name, grad[i]);
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn per_clip_norm_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (c, f) = (2, 9);
    let x: Vec<f64> = (0..2 * c * f).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gy: Vec<f64> = (0..2 * c * f).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gm = (vec![0.7, -0.4], vec![0.3, 1.1]);
    let bt = (vec![0.1, 0.2], vec![-0.3, 0.0]);
    for mode in [NormMode::PerClip, NormMode::Cumulative] {
        let loss = |x: &[f64]| {
            let mut y = vec![0.0; x.len()];
            nn::ops::norm_forward(x, c, f, (&gm.0, &gm.1), (&bt.0, &bt.1), 1e-8, mode, &mut NormState::new(c), &mut y);
            y.iter().zip(&gy).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut gx = vec![0.0; x.len()];
        let (mut a, mut b, mut p, mut q) = (vec![0.0; c], vec![0.0; c], vec![0.0; c], vec![0.0; c]);
        nn::ops::norm_backward(&x, c, f, (&gm.0, &gm.1), 1e-8, mode, &gy, &mut gx, (&mut a, &mut b), (&mut p, &mut q));
        for i in 0..x.len() {
            let h = 1e-6;
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-6, "{mode:?} {i}: {} vs {fd}", gx[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mask_never_amplifies(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent = rand_tensor(&mut rng, 3, 12);
        let logits = ComplexTensor::from_fn(3, 12, |_, _| Complex64::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)));
        let mask = ctanh(&logits);
        let out = apply_mask(&latent, &mask).unwrap();
        for c in 0..3 {
            for t in 0..12 {
                prop_assert!(mask.get(c, t).norm() < 1.0);
                prop_assert!(out.get(c, t).norm() <= latent.get(c, t).norm());
            }
        }
    }

    #[test]
    fn trelu_reduces_to_crelu(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let p = TRelu { h_rr: 1.0, h_ri: 0.0, h_ir: 0.0, h_ii: 1.0, b1: 0.0, b2: 0.0 };
        prop_assert_eq!(p.apply(re, im), (re.max(0.0), im.max(0.0)));
    }

    #[test]
    fn encoder_is_additive(seed in any::<u64>()) {
        let cfg = tiny();
        let w = noisy_weights(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let a = rand_rows(&mut rng, cfg.input_channels(), 64);
        let b = rand_rows(&mut rng, cfg.input_channels(), 64);
        let ab: Vec<Vec<f64>> = a.iter().zip(&b).map(|(p, q)| p.iter().zip(q).map(|(x, y)| x + y).collect()).collect();
        let (ea, eb, eab) = (encoder_forward(&w, &a).unwrap(), encoder_forward(&w, &b).unwrap(), encoder_forward(&w, &ab).unwrap());
        for i in 0..ea.stacked().len() {
            prop_assert!((ea.stacked()[i] + eb.stacked()[i] - eab.stacked()[i]).abs() < 1e-6);
        }
    }
}
