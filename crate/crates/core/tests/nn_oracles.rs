use approx::assert_abs_diff_eq;
use jetssm_core::nn::{
    Activation, Linear, Model, ModelConfig, ModelKind, ModelRng, NormKind, SequenceTensor,
};
use jetssm_core::ssm::{causal_conv, vandermonde_kernel, Discretization};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn small_config() -> ModelConfig {
    ModelConfig {
        in_channels: 3,
        hidden_dim: 4,
        out_channels: 2,
        n_blocks: 2,
        n_state: 4,
        seed: 7,
        mlp_depth: 2,
        gru_layers: 2,
        ..ModelConfig::default()
    }
}

fn random_input(frames: usize, channels: usize, seed: u64) -> SequenceTensor<f64> {
    let mut rng = ModelRng::seed_from_u64(seed);
    SequenceTensor::from_fn(frames, channels, |_, _| rng.gen_range(-1.0..1.0))
}

fn naive_linear(l: &Linear<f64>, x: &SequenceTensor<f64>) -> SequenceTensor<f64> {
    SequenceTensor::from_fn(x.frames(), l.out_dim, |t, o| {
        let mut acc = l.bias[o];
        for i in 0..l.in_dim {
            acc += l.weight[o * l.in_dim + i] * x.get(t, i);
        }
        acc
    })
}

#[test]
fn encoder_pads_identity() {
    // 2 -> 3 with identity on the first two outputs.
    let mut l = Linear::<f64>::zeros(2, 3);
    l.weight[0] = 1.0;
    l.weight[3] = 1.0;
    let x = SequenceTensor::new(vec![1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
    let y = l.forward(&x).unwrap();
    assert_eq!(y.data(), &[1.0, 2.0, 0.0, 3.0, 4.0, 0.0]);
    l.bias = vec![0.5, -0.5, 2.0];
    let y = l.forward(&x).unwrap();
    assert_eq!(y.row(1), &[3.5, 3.5, 2.0]);
}

#[test]
fn linear_matches_naive_matmul() {
    let mut rng = ModelRng::seed_from_u64(3);
    let l = Linear::<f64>::init(13, 9, &mut rng);
    let x = random_input(17, 13, 4);
    let y = l.forward(&x).unwrap();
    let r = naive_linear(&l, &x);
    for (a, b) in y.data().iter().zip(r.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn linear_rejects_wrong_width() {
    let mut rng = ModelRng::seed_from_u64(3);
    let l = Linear::<f64>::init(4, 2, &mut rng);
    assert!(l.forward(&random_input(5, 3, 1)).is_err());
}

#[test]
fn block_with_zero_output_path_is_identity() {
    let cfg = small_config();
    let Model::S4d(mut m) = Model::<f64>::new(ModelKind::S4d, &cfg).unwrap() else {
        unreachable!()
    };
    for b in &mut m.blocks {
        b.c_re.iter_mut().for_each(|v| *v = 0.0);
        b.c_im.iter_mut().for_each(|v| *v = 0.0);
        b.d.iter_mut().for_each(|v| *v = 0.0);
    }
    // GELU(0) = 0, so each block reduces to its residual path.
    let model = Model::S4d(m.clone());
    let x = random_input(20, 3, 9);
    let y = model.predict(&x).unwrap();
    let expected = naive_linear(&m.decoder, &naive_linear(&m.encoder, &x));
    for (a, b) in y.data().iter().zip(expected.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn block_mix_equals_direct_convolution() {
    let cfg = small_config();
    let Model::S4d(m) = Model::<f64>::new(ModelKind::S4d, &cfg).unwrap() else {
        unreachable!()
    };
    let block = &m.blocks[0];
    let z = random_input(33, 4, 5);
    let s = block.mix(&z).unwrap();
    for h in 0..4 {
        let k = vandermonde_kernel(&block.channel_discrete(h), 33).unwrap();
        let y = causal_conv(&z.column(h), &k).unwrap();
        for t in 0..33 {
            assert_abs_diff_eq!(s.get(t, h), y[t] + block.d[h] * z.get(t, h), epsilon = 1e-10);
        }
    }
}

#[test]
fn composed_forward_matches_manual_pipeline() {
    let cfg = ModelConfig {
        n_blocks: 1,
        ..small_config()
    };
    let model = Model::<f64>::new(ModelKind::S4d, &cfg).unwrap();
    let Model::S4d(m) = &model else { unreachable!() };
    let x = random_input(25, 3, 11);
    let y = model.predict(&x).unwrap();

    let e = naive_linear(&m.encoder, &x);
    let b = &m.blocks[0];
    // Fresh running stats: mean 0, var 1.
    let scale = 1.0 / (1.0 + 1e-5f64).sqrt();
    let mut h = e.clone();
    for c in 0..4 {
        let z: Vec<f64> = e.column(c).iter().map(|v| v * scale).collect();
        let k = vandermonde_kernel(&b.channel_discrete(c), 25).unwrap();
        let conv = causal_conv(&z, &k).unwrap();
        for t in 0..25 {
            let s = conv[t] + b.d[c] * z[t];
            h.set(t, c, e.get(t, c) + Activation::Gelu.apply(s));
        }
    }
    let expected = naive_linear(&m.decoder, &h);
    for (a, b) in y.data().iter().zip(expected.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }
}

#[test]
fn full_size_model_shapes() {
    let cfg = ModelConfig {
        n_state: 16,
        hidden_dim: 32,
        ..ModelConfig::default()
    };
    let x = random_input(1150, 130, 0);
    for kind in [ModelKind::S4d, ModelKind::MlpShallow, ModelKind::MlpDeep] {
        let y = Model::<f64>::new(kind, &cfg).unwrap().predict(&x).unwrap();
        assert_eq!((y.frames(), y.channels()), (1150, 70), "{kind}");
    }
    let y = Model::<f32>::new(ModelKind::S4d, &cfg)
        .unwrap()
        .predict(&SequenceTensor::from_f64(&x))
        .unwrap();
    assert_eq!((y.frames(), y.channels()), (1150, 70));
    assert!(y.data().iter().all(|v| v.is_finite()));
}

#[test]
fn wrong_input_width_is_rejected() {
    let model = Model::<f64>::new(ModelKind::S4d, &small_config()).unwrap();
    assert!(model.predict(&random_input(10, 5, 0)).is_err());
}

#[test]
fn same_seed_same_model() {
    for kind in ModelKind::ALL {
        let a = Model::<f64>::new(kind, &small_config()).unwrap();
        let b = Model::<f64>::new(kind, &small_config()).unwrap();
        assert_eq!(a, b);
        let c = Model::<f64>::new(
            kind,
            &ModelConfig {
                seed: 8,
                ..small_config()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn config_validation_lists_problems() {
    let bad = ModelConfig {
        n_blocks: 0,
        n_state: 5,
        dropout: 1.5,
        ..ModelConfig::default()
    };
    let msg = bad.validate().unwrap_err().to_string();
    assert!(msg.contains("n_blocks") && msg.contains("n_state") && msg.contains("dropout"), "{msg}");
    assert!("transformer".parse::<ModelKind>().unwrap_err().to_string().contains("mlp_deep"));
    assert_eq!("mlp_shallow".parse::<ModelKind>().unwrap(), ModelKind::MlpShallow);
}

#[test]
fn backward_of_scalar_weight() {
    // y = w x with w = 3, x = 4, dL/dy = 3 gives dL/dw = 12 per frame; 3 frames -> 36.
    let mut l = Linear::<f64>::zeros(1, 1);
    l.weight[0] = 3.0;
    let model = Model::Mlp(jetssm_core::nn::MlpModel {
        hidden: vec![l],
        output: {
            let mut o = Linear::zeros(1, 1);
            o.weight[0] = 1.0;
            o
        },
        activation: Activation::Identity,
        dropout: 0.0,
    });
    let x = SequenceTensor::new(vec![4.0; 3], 3, 1).unwrap();
    let mut rng = ModelRng::seed_from_u64(0);
    let (y, tape) = model.forward_recorded(&x, true, &mut rng).unwrap();
    assert_eq!(y.data(), &[12.0; 3]);
    let dy = SequenceTensor::new(vec![3.0; 3], 3, 1).unwrap();
    let (g, dx) = model.backward(tape, &dy).unwrap();
    assert_eq!(g.params()[0], &[36.0]);
    assert_eq!(dx.data(), &[9.0; 3]);
}

#[test]
fn disconnected_parameters_get_zero_gradient() {
    // Zero decoder weights cut the path to every earlier parameter.
    let Model::S4d(mut m) = Model::<f64>::new(ModelKind::S4d, &small_config()).unwrap() else {
        unreachable!()
    };
    m.decoder.weight.iter_mut().for_each(|w| *w = 0.0);
    let model = Model::S4d(m);
    let x = random_input(10, 3, 2);
    let mut rng = ModelRng::seed_from_u64(0);
    let (y, tape) = model.forward_recorded(&x, true, &mut rng).unwrap();
    let (g, _) = model.backward(tape, &y.map(|_| 1.0)).unwrap();
    let params = g.params();
    let n = params.len();
    for p in &params[..n - 2] {
        assert!(p.iter().all(|&v| v == 0.0));
    }
    assert!(params[n - 1].iter().all(|&v| v == 10.0));
}

#[test]
fn backward_without_forward_is_a_state_error() {
    let model = Model::<f64>::new(ModelKind::Gru, &small_config()).unwrap();
    let err = model
        .backward(Default::default(), &SequenceTensor::zeros(4, 2))
        .unwrap_err();
    assert!(matches!(err, jetssm_core::Error::State(_)));
}

/// Central-difference check of every parameter group against the tape gradient.
fn gradient_check(model: Model<f64>, training: bool, label: &str) {
    let frames = 12;
    let x = random_input(frames, model.in_channels(), 21);
    let weights = random_input(frames, model.out_channels(), 22);
    let loss = |m: &Model<f64>| -> f64 {
        let mut rng = ModelRng::seed_from_u64(99);
        let (y, _) = m.forward_recorded(&x, training, &mut rng).unwrap();
        y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };
    let mut rng = ModelRng::seed_from_u64(99);
    let (_, tape) = model.forward_recorded(&x, training, &mut rng).unwrap();
    let (grad, dx) = model.backward(tape, &weights).unwrap();
    let specs = model.param_specs();
    let h = 1e-6;
    let mut probe = model.clone();
    let groups = grad.params().len();
    for gi in 0..groups {
        let len = grad.params()[gi].len();
        for idx in (0..len).step_by((len / 5).max(1)) {
            let orig = probe.params()[gi][idx];
            probe.params_mut()[gi][idx] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[gi][idx] = orig - h;
            let down = loss(&probe);
            probe.params_mut()[gi][idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grad.params()[gi][idx];
            let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
            assert!(err <= 1e-4, "{label} {}[{idx}]: analytic {an} vs fd {fd}", specs[gi].0);
        }
    }
    // Input gradient.
    for t in [0, frames / 2, frames - 1] {
        let mut xp = x.clone();
        let orig = xp.get(t, 0);
        let eval = |xx: &SequenceTensor<f64>| -> f64 {
            let mut rng = ModelRng::seed_from_u64(99);
            let (y, _) = model.forward_recorded(xx, training, &mut rng).unwrap();
            y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
        };
        xp.set(t, 0, orig + h);
        let up = eval(&xp);
        xp.set(t, 0, orig - h);
        let down = eval(&xp);
        let fd = (up - down) / (2.0 * h);
        let an = dx.get(t, 0);
        assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3), "{label} dx[{t}]");
    }
}

#[test]
fn s4d_gradients_match_finite_differences() {
    let base = small_config();
    gradient_check(Model::new(ModelKind::S4d, &base).unwrap(), true, "s4d/batch/train");
    gradient_check(Model::new(ModelKind::S4d, &base).unwrap(), false, "s4d/batch/eval");
    let variants = [
        ModelConfig {
            norm_kind: NormKind::Layer,
            ..base.clone()
        },
        ModelConfig {
            discretization: Discretization::Bilinear,
            shared_a: true,
            ..base.clone()
        },
        ModelConfig {
            dropout: 0.3,
            feedthrough: false,
            ..base.clone()
        },
    ];
    for (i, cfg) in variants.iter().enumerate() {
        gradient_check(Model::new(ModelKind::S4d, cfg).unwrap(), true, &format!("s4d/variant{i}"));
    }
}

#[test]
fn baseline_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        dropout: 0.2,
        ..small_config()
    };
    for kind in [ModelKind::Gru, ModelKind::MlpShallow, ModelKind::MlpDeep] {
        gradient_check(Model::new(kind, &cfg).unwrap(), true, kind.name());
    }
}

#[test]
fn gru_with_zero_weights_outputs_readout_bias() {
    let Model::Gru(mut m) = Model::<f64>::new(ModelKind::Gru, &small_config()).unwrap() else {
        unreachable!()
    };
    for l in &mut m.layers {
        for v in l.w_ih.iter_mut().chain(&mut l.w_hh).chain(&mut l.b_ih).chain(&mut l.b_hh) {
            *v = 0.0;
        }
    }
    let bias = m.readout.bias.clone();
    let y = Model::Gru(m).predict(&random_input(8, 3, 1)).unwrap();
    for t in 0..8 {
        assert_eq!(y.row(t), bias.as_slice());
    }
}

#[test]
fn gru_carries_state_forward() {
    let model = Model::<f64>::new(ModelKind::Gru, &small_config()).unwrap();
    let zeros = SequenceTensor::zeros(10, 3);
    let mut impulse = zeros.clone();
    impulse.set(0, 0, 1.0);
    let a = model.predict(&zeros).unwrap();
    let b = model.predict(&impulse).unwrap();
    assert!((a.get(9, 0) - b.get(9, 0)).abs() > 1e-8);
}

#[test]
fn mlp_is_frame_permutation_equivariant() {
    let model = Model::<f64>::new(ModelKind::MlpDeep, &small_config()).unwrap();
    let x = random_input(9, 3, 4);
    let perm = [3, 8, 0, 1, 7, 2, 6, 5, 4];
    let y = model.predict(&x).unwrap();
    let yp = model.predict(&x.permute_frames(&perm).unwrap()).unwrap();
    assert_eq!(yp, y.permute_frames(&perm).unwrap());
}

#[test]
fn mlp_identity_activation_is_affine() {
    let cfg = ModelConfig {
        activation: Activation::Identity,
        ..small_config()
    };
    let model = Model::<f64>::new(ModelKind::MlpDeep, &cfg).unwrap();
    let Model::Mlp(m) = &model else { unreachable!() };
    let x = random_input(6, 3, 4);
    let mut h = x.clone();
    for l in &m.hidden {
        h = naive_linear(l, &h);
    }
    let expected = naive_linear(&m.output, &h);
    for (a, b) in model.predict(&x).unwrap().data().iter().zip(expected.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn streaming_matches_convolution_mode() {
    let cfg = ModelConfig {
        discretization: Discretization::Bilinear,
        ..small_config()
    };
    let mut model = Model::<f64>::new(ModelKind::S4d, &cfg).unwrap();
    // Non-trivial running statistics.
    for buf in model.buffers_mut() {
        for (i, v) in buf.iter_mut().enumerate() {
            *v = 0.5 + 0.1 * i as f64;
        }
    }
    let x = random_input(40, 3, 6);
    let y = model.predict(&x).unwrap();
    let mut stream = model.stream().unwrap();
    let mut out = vec![0.0; 2];
    for t in 0..40 {
        model.step(&mut stream, x.row(t), &mut out).unwrap();
        for c in 0..2 {
            assert_abs_diff_eq!(out[c], y.get(t, c), epsilon = 1e-9);
        }
    }
    let gru = Model::<f64>::new(ModelKind::Gru, &cfg).unwrap();
    assert!(matches!(gru.stream(), Err(jetssm_core::Error::Incompatible(_))));
}

#[test]
fn batch_stats_are_absorbed() {
    let mut model = Model::<f64>::new(ModelKind::S4d, &small_config()).unwrap();
    let before: Vec<Vec<f64>> = model.buffers().iter().map(|b| b.to_vec()).collect();
    let mut rng = ModelRng::seed_from_u64(0);
    let (_, tape) = model.forward_recorded(&random_input(16, 3, 1), true, &mut rng).unwrap();
    model.absorb_batch_stats(&tape);
    let after: Vec<Vec<f64>> = model.buffers().iter().map(|b| b.to_vec()).collect();
    assert_ne!(before, after);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eval_mode_is_causal(seed in 0u64..1000, cut in 1usize..30) {
        let model = Model::<f64>::new(ModelKind::S4d, &small_config()).unwrap();
        let x = random_input(32, 3, seed);
        let mut x2 = x.clone();
        let mut rng = ModelRng::seed_from_u64(seed);
        for t in cut..32 {
            for c in 0..3 {
                x2.set(t, c, rng.gen_range(-5.0..5.0));
            }
        }
        let y = model.predict(&x).unwrap();
        let y2 = model.predict(&x2).unwrap();
        for t in 0..cut {
            for c in 0..2 {
                prop_assert!((y.get(t, c) - y2.get(t, c)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gru_is_causal(seed in 0u64..1000, cut in 1usize..15) {
        let model = Model::<f64>::new(ModelKind::Gru, &small_config()).unwrap();
        let x = random_input(16, 3, seed);
        let mut x2 = x.clone();
        x2.set(cut, 1, 3.0);
        let y = model.predict(&x).unwrap();
        let y2 = model.predict(&x2).unwrap();
        for t in 0..cut {
            prop_assert_eq!(y.row(t), y2.row(t));
        }
    }
}
