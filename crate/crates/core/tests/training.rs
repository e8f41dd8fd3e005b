use approx::assert_relative_eq;
use jetssm_core::audio::{featurize, MelConfig};
use jetssm_core::dataset::{synthesize_trials, GeneratorConfig};
use jetssm_core::error::Error;
use jetssm_core::nn::{ModelConfig, ModelKind, ModelRng, NormKind, SequenceTensor};
use jetssm_core::training::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn tensor(frames: usize, channels: usize, seed: u64, scale: f64) -> SequenceTensor<f64> {
    let mut rng = ModelRng::seed_from_u64(seed);
    SequenceTensor::from_fn(frames, channels, |_, _| rng.gen_range(-scale..scale))
}

fn tiny_data(seed: u64, trials: usize) -> Vec<TrialData> {
    let gen = GeneratorConfig { seed, ..Default::default() };
    synthesize_trials(&gen, trials, 2)
        .unwrap()
        .into_iter()
        .map(|t| TrialData::new(featurize(&t.clip, &MelConfig::default(), 1150).unwrap(), t.profiles).unwrap())
        .collect()
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        hidden_dim: 8,
        n_state: 8,
        n_blocks: 1,
        norm_kind: NormKind::Layer,
        ..Default::default()
    }
}

fn tiny_train(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 30,
        seed,
        stride: 32,
        ..Default::default()
    }
}

fn tau() -> f64 {
    0.1 * GeneratorConfig::default().noise_std_um().unwrap()
}

#[test]
fn mse_examples() {
    let a = tensor(5, 70, 1, 100.0);
    assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
    let shifted = a.map(|v| v + 0.75);
    assert_relative_eq!(mse_loss(&shifted, &a).unwrap(), 0.5625, max_relative = 1e-12);
    assert!(matches!(mse_loss(&a, &tensor(4, 70, 1, 1.0)), Err(Error::Shape(_))));
}

#[test]
fn mse_matches_double_loop() {
    let (p, t) = (tensor(17, 70, 2, 500.0), tensor(17, 70, 3, 500.0));
    let mut s = 0.0;
    for i in 0..17 {
        for j in 0..70 {
            s += (p.get(i, j) - t.get(i, j)).powi(2);
        }
    }
    let naive = s / (17.0 * 70.0);
    assert_relative_eq!(mse_loss(&p, &t).unwrap(), naive, max_relative = 1e-12);
}

#[test]
fn mse_grad_matches_finite_differences() {
    let (p, t) = (tensor(3, 4, 4, 2.0), tensor(3, 4, 5, 2.0));
    let g = mse_grad(&p, &t).unwrap();
    let eps = 1e-6;
    for k in 0..12 {
        let mut hi = p.clone();
        let mut lo = p.clone();
        hi.data_mut()[k] += eps;
        lo.data_mut()[k] -= eps;
        let fd = (mse_loss(&hi, &t).unwrap() - mse_loss(&lo, &t).unwrap()) / (2.0 * eps);
        assert_relative_eq!(g.data()[k], fd, max_relative = 1e-6);
    }
}

#[test]
fn adam_zero_gradients_are_stationary() {
    let mut w = vec![1.5, -2.0, 0.25];
    let before = w.clone();
    let mut state = AdamState::<f64>::new(&[3]);
    let cfg = TrainConfig::default().adam();
    for _ in 0..25 {
        adam_step(&mut [w.as_mut_slice()], &[&[0.0; 3]], &mut state, &cfg).unwrap();
    }
    assert_eq!(w, before);
    assert!(state.m[0].iter().chain(&state.v[0]).all(|&x| x == 0.0));
}

#[test]
fn adam_first_step_is_signed_lr() {
    let cfg = AdamConfig { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
    for g in [3.0, -0.2, 1e-3] {
        let mut w = vec![0.5];
        let mut state = AdamState::<f64>::new(&[1]);
        adam_step(&mut [w.as_mut_slice()], &[&[g]], &mut state, &cfg).unwrap();
        let expected = 0.5 - 0.01 * g / (g.abs() + 1e-8);
        assert_relative_eq!(w[0], expected, max_relative = 1e-12);
        assert!((w[0] - (0.5 - 0.01 * g.signum())).abs() < 1e-7);
    }
}

#[test]
fn adam_matches_reference_on_quadratic() {
    let cfg = AdamConfig { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
    // Reference written out step by step.
    let (mut w_ref, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    let mut w = vec![1.0f64];
    let mut state = AdamState::<f64>::new(&[1]);
    for step in 1..=10 {
        let g = 2.0 * w_ref;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let mh = m / (1.0 - 0.9f64.powi(step));
        let vh = v / (1.0 - 0.999f64.powi(step));
        w_ref -= 0.1 * mh / (vh.sqrt() + 1e-8);

        let gw = [2.0 * w[0]];
        adam_step(&mut [w.as_mut_slice()], &[&gw], &mut state, &cfg).unwrap();
        assert!((w[0] - w_ref).abs() <= 1e-10, "step {step}: {} vs {w_ref}", w[0]);
    }
}

#[test]
fn adam_rejects_mismatched_groups() {
    let mut w = vec![0.0; 3];
    let mut state = AdamState::<f64>::new(&[3]);
    let cfg = TrainConfig::default().adam();
    let r = adam_step(&mut [w.as_mut_slice()], &[&[0.0; 2]], &mut state, &cfg);
    assert!(matches!(r, Err(Error::Shape(_))));
}

#[test]
fn accuracy_examples() {
    let target = tensor(6, 70, 6, 1000.0);
    assert_eq!(accuracy_within(&target, &target, 1.0).unwrap(), 100.0);
    let off = target.map(|v| v + 2.0);
    assert_eq!(accuracy_within(&off, &target, 1.0).unwrap(), 0.0);
    let mut half = target.clone();
    for (k, v) in half.data_mut().iter_mut().enumerate() {
        *v += if k % 2 == 0 { 0.5 } else { -1.5 };
    }
    assert_eq!(accuracy_within(&half, &target, 1.0).unwrap(), 50.0);
    assert!(matches!(accuracy_within(&target, &target, 0.0), Err(Error::InvalidArgument(_))));
}

proptest! {
    #[test]
    fn accuracy_is_monotone_in_tau(seed in 0u64..500, a in 0.01f64..50.0, b in 0.01f64..50.0) {
        let p = tensor(8, 70, seed, 30.0);
        let t = tensor(8, 70, seed + 1, 30.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(accuracy_within(&p, &t, lo).unwrap() <= accuracy_within(&p, &t, hi).unwrap());
    }

    #[test]
    fn zero_mse_iff_full_accuracy(seed in 0u64..500, tau in 1e-9f64..10.0, perturb in proptest::bool::ANY) {
        let t = tensor(4, 70, seed, 100.0);
        let mut p = t.clone();
        if perturb {
            let k = (seed as usize) % p.data().len();
            p.data_mut()[k] += tau * 1.5 + 1e-6;
        }
        let zero = mse_loss(&p, &t).unwrap() == 0.0;
        prop_assert_eq!(zero, accuracy_within(&p, &t, tau).unwrap() == 100.0);
    }

    #[test]
    fn adam_zero_grad_identity_for_any_step_count(seed in 0u64..200, steps in 1usize..40) {
        let mut rng = ModelRng::seed_from_u64(seed);
        let mut w: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let before = w.clone();
        let mut state = AdamState::<f64>::new(&[5]);
        let cfg = AdamConfig { learning_rate: rng.gen_range(1e-4..1.0), beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        for _ in 0..steps {
            adam_step(&mut [w.as_mut_slice()], &[&[0.0; 5]], &mut state, &cfg).unwrap();
        }
        prop_assert_eq!(w, before);
    }
}

#[test]
fn train_config_guards() {
    let bad = TrainConfig { epochs: 0, ..Default::default() };
    assert!(matches!(bad.validate(), Err(Error::InvalidArgument(_))));
    let bad = TrainConfig { adam_betas: (1.0, 0.999), ..Default::default() };
    assert!(bad.validate().is_err());
    let bad = TrainConfig { learning_rate: -1.0, ..Default::default() };
    assert!(bad.validate().is_err());
    let data = tiny_data(3, 1);
    let r = train::<f64>(ModelKind::S4d, &tiny_model(), &TrainConfig { epochs: 0, ..Default::default() }, &data);
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
    let r = train::<f64>(ModelKind::S4d, &tiny_model(), &tiny_train(0), &[]);
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let data = tiny_data(11, 2);
    let (a, ha) = train::<f64>(ModelKind::S4d, &tiny_model(), &tiny_train(5), &data).unwrap();
    let (b, hb) = train::<f64>(ModelKind::S4d, &tiny_model(), &tiny_train(5), &data).unwrap();
    assert_eq!(ha.epoch_loss.len(), 30);
    assert!(ha.epoch_loss[29] <= ha.epoch_loss[0], "{:?}", ha.epoch_loss);
    assert_eq!(ha, hb);
    let bits = |m: &TrainedModel<f64>| -> Vec<u64> {
        m.model.params().iter().flat_map(|p| p.iter().map(|v| v.to_bits())).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    let ra = evaluate(&a, &data, tau(), false).unwrap();
    let rb = evaluate(&b, &data, tau(), false).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn trained_beats_untrained_on_five_seeds() {
    let t = tau();
    for seed in 0..5u64 {
        let data = tiny_data(100 + seed, 2);
        let cfg = tiny_train(seed);
        let (m, _) = train::<f64>(ModelKind::S4d, &tiny_model(), &cfg, &data).unwrap();
        let u = untrained::<f64>(ModelKind::S4d, &tiny_model(), &cfg, &data).unwrap();
        let trained = evaluate(&m, &data, t, false).unwrap();
        let base = evaluate(&u, &data, t, false).unwrap();
        assert!(
            trained.accuracy_pct > base.accuracy_pct,
            "seed {seed}: trained {} vs untrained {}",
            trained.accuracy_pct,
            base.accuracy_pct
        );
        for r in [&trained, &base] {
            assert!((0.0..=100.0).contains(&r.accuracy_pct));
            assert!(r.mse >= 0.0);
            assert_eq!(r.per_frame_error.len(), r.frames);
            assert_eq!(r.per_column_mae.len(), 70);
            assert_eq!(r.model_name, "s4d");
        }
    }
}

#[test]
fn profiles_only_add_information_on_training_frames() {
    // Trained the literal way, with the profile columns populated.
    let data = tiny_data(21, 2);
    let cfg = TrainConfig { profile_visible_prob: 1.0, ..tiny_train(2) };
    let (m, _) = train::<f64>(ModelKind::S4d, &tiny_model(), &cfg, &data).unwrap();
    let own: Vec<TrialData> = data.iter().map(|d| {
        // Train half duplicated, so the scored half holds the training frames.
        let tr = d.train_part().unwrap();
        let frames = tr.frames();
        let mel = SequenceTensor::from_fn(2 * frames, tr.mel.channels(), |t, c| tr.mel.get(t % frames, c));
        let prof = SequenceTensor::from_fn(2 * frames, 70, |t, c| tr.profiles.depths().get(t % frames, c));
        TrialData::new(mel, jetssm_core::dataset::ErosionProfileSet::new(prof).unwrap()).unwrap()
    }).collect();
    let visible = evaluate(&m, &own, tau(), true).unwrap().accuracy_pct;
    let masked = evaluate(&m, &own, tau(), false).unwrap().accuracy_pct;
    println!("visible {visible:.2} masked {masked:.2}");
    if visible < masked {
        assert!(masked - visible < 1.0, "profiles reduced accuracy by {:.2} points", masked - visible);
        eprintln!("warning: visible below masked by {:.2} points", masked - visible);
    }
}

#[test]
fn mismatched_mel_layout_is_incompatible() {
    let data = tiny_data(4, 1);
    let (m, _) = train::<f64>(ModelKind::MlpShallow, &tiny_model(), &TrainConfig { epochs: 1, ..tiny_train(0) }, &data).unwrap();
    let d = &data[0];
    let narrow = TrialData::new(d.mel.slice_channels(0, 40).unwrap(), d.profiles.clone()).unwrap();
    assert!(matches!(evaluate(&m, &[narrow], tau(), false), Err(Error::Incompatible(_))));
}

fn search_setup<'a>(space: &'a TrialSpace, model: &'a ModelConfig, train: &'a TrainConfig) -> SearchSetup<'a> {
    SearchSetup { kind: ModelKind::S4d, space, model, train, tau_um: tau(), workers: 2 }
}

fn quick_space() -> TrialSpace {
    TrialSpace {
        hidden_dims: vec![4, 8],
        n_blocks: (1, 2),
        learning_rate: (1e-3, 1e-2),
        dropout: (0.0, 0.1),
        mlp_depth: (1, 2),
        n_trials: 10,
    }
}

#[test]
fn search_budget_one_and_zero() {
    let data = tiny_data(31, 1);
    let (space, model) = (quick_space(), tiny_model());
    let cfg = TrainConfig { epochs: 2, ..tiny_train(0) };
    let setup = search_setup(&space, &model, &cfg);
    let out = trial_search::<f64>(&setup, &data, 1, 9).unwrap();
    assert_eq!(out.leaderboard.len(), 1);
    let r = evaluate(&out.best, &data, tau(), false).unwrap();
    assert_eq!(r.accuracy_pct, out.leaderboard[0].accuracy_pct);
    assert!(matches!(trial_search::<f64>(&setup, &data, 0, 9), Err(Error::InvalidArgument(_))));
}

#[test]
fn search_rejects_bad_space() {
    let data = tiny_data(31, 1);
    let space = TrialSpace { n_blocks: (0, 7), ..quick_space() };
    let (model, cfg) = (tiny_model(), tiny_train(0));
    assert!(trial_search::<f64>(&search_setup(&space, &model, &cfg), &data, 1, 0).is_err());
}

#[test]
fn search_is_reproducible_and_best_beats_median() {
    let data = tiny_data(41, 1);
    let (space, model) = (quick_space(), tiny_model());
    let cfg = TrainConfig { epochs: 5, ..tiny_train(0) };
    let setup = search_setup(&space, &model, &cfg);
    let a = trial_search::<f64>(&setup, &data, 10, 3).unwrap();
    let b = trial_search::<f64>(&SearchSetup { workers: 3, ..search_setup(&space, &model, &cfg) }, &data, 10, 3).unwrap();
    let strip = |o: &SearchOutcome<f64>| -> Vec<TrialRecord> {
        o.leaderboard.iter().map(|r| TrialRecord { wall_time_s: 0.0, ..r.clone() }).collect()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.leaderboard.len(), 10);
    for w in a.leaderboard.windows(2) {
        assert!(
            w[0].accuracy_pct > w[1].accuracy_pct
                || (w[0].accuracy_pct == w[1].accuracy_pct && w[0].mse <= w[1].mse)
        );
    }
    let mut accs: Vec<f64> = a.leaderboard.iter().map(|r| r.accuracy_pct).collect();
    accs.sort_by(f64::total_cmp);
    let median = (accs[4] + accs[5]) / 2.0;
    assert!(a.leaderboard[0].accuracy_pct >= median);
}
