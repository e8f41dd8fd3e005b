use jetssm_core::audio::{featurize, MelConfig};
use jetssm_core::dataset::{
    alias_frequency, assemble_sample, depth_curve_lookup, load_profiles_csv, normalize_features,
    parse_profiles_csv, segment_depths, split_train_test, synthesize_profiles, synthesize_trial,
    synthesize_trials, write_profiles_csv, DepthCurve, ErosionProfileSet, FeatureStats,
    GeneratorConfig, StairsSchedule, PROFILE_COLUMNS,
};
use jetssm_core::nn::SequenceTensor;
use jetssm_core::Error;
use proptest::prelude::*;

#[test]
fn depth_curve_anchors() {
    assert_eq!(depth_curve_lookup(2.0).unwrap(), (437.34, 185.99));
    assert_eq!(depth_curve_lookup(5.0).unwrap(), (1327.71, 405.06));
    assert_eq!(depth_curve_lookup(7.0).unwrap(), (1004.1, 154.17));
    let (m, s) = depth_curve_lookup(2.5).unwrap();
    assert!((m - 847.395).abs() < 1e-9);
    assert!((s - (185.99 + 205.11) / 2.0).abs() < 1e-9);
    for z in [1.99, 7.01, f64::NAN] {
        assert!(matches!(depth_curve_lookup(z), Err(Error::InvalidArgument(_))));
    }
}

#[test]
fn curve_peaks_at_five_mm() {
    let curve = DepthCurve::default();
    let peak = (0..=50)
        .map(|i| 2.0 + i as f64 * 0.1)
        .max_by(|a, b| curve.lookup(*a).unwrap().0.total_cmp(&curve.lookup(*b).unwrap().0))
        .unwrap();
    assert!((peak - 5.0).abs() < 1e-9);
}

#[test]
fn schedule_invariants() {
    let s = StairsSchedule::default();
    s.validate(&DepthCurve::default()).unwrap();
    assert_eq!(s.duration_s(), 1.0 + 6.0 * 2.0 + 5.0 * 1.0 + 1.0);
    let d = s.dwells();
    assert_eq!(d.len(), 6);
    assert_eq!((d[0].start_s, d[0].end_s), (1.0, 3.0));
    assert_eq!(d[1].start_s, 4.0);
    let bad = StairsSchedule {
        traverse_speed_mm_s: 4.0,
        standoffs_mm: vec![2.0, 9.0],
        ..s
    };
    let msg = bad.validate(&DepthCurve::default()).unwrap_err().to_string();
    assert!(msg.contains("segment_length_mm") && msg.contains("9"), "{msg}");
}

#[test]
fn alias_of_sonotrode_tone() {
    assert!((alias_frequency(22170.0, 38400.0) - 16230.0).abs() < 1e-9);
    assert_eq!(alias_frequency(5000.0, 38400.0), 5000.0);
    assert!((GeneratorConfig::default().tone_hz() - 16230.0).abs() < 1e-9);
}

#[test]
fn synthesis_is_deterministic_and_shaped() {
    let cfg = GeneratorConfig {
        seed: 11,
        ..Default::default()
    };
    let a = synthesize_trial(&cfg).unwrap();
    let b = synthesize_trial(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.profiles.frames(), 1150);
    assert_eq!(a.profiles.depths().channels(), 70);
    assert_eq!(a.clip.samples.len(), 19 * 38400);
    assert!(a.clip.samples.iter().all(|v| v.abs() <= 1.0));
    let p = synthesize_profiles(&cfg).unwrap();
    assert_eq!(p.profiles, a.profiles);
    let c = synthesize_trial(&GeneratorConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.profiles, c.profiles);
}

#[test]
fn contact_frames_are_near_zero() {
    let t = synthesize_profiles(&GeneratorConfig::default()).unwrap();
    let contact: Vec<usize> = (0..1150).filter(|&i| t.contact[i]).collect();
    // Lead-in, five transitions and lead-out: 7 s of 19 s.
    let expected = 7.0 / 19.0 * 1150.0;
    assert!((contact.len() as f64 - expected).abs() <= 2.0, "{}", contact.len());
    for &i in &contact {
        let max = t.profiles.depths().row(i).iter().cloned().fold(0.0, f64::max);
        assert!(max < 15.0, "frame {i}: {max}");
    }
}

#[test]
fn generator_depth_statistics_over_100_seeds() {
    let curve = DepthCurve::default();
    let schedule = StairsSchedule::default();
    let trials = 100;
    let mut sums = vec![0.0; schedule.standoffs_mm.len()];
    for seed in 0..trials {
        let t = synthesize_profiles(&GeneratorConfig {
            seed,
            ..Default::default()
        })
        .unwrap();
        for (k, (_, d)) in segment_depths(&t.profiles, &t.segments).into_iter().enumerate() {
            sums[k] += d;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / trials as f64).collect();
    for (k, &z) in schedule.standoffs_mm.iter().enumerate() {
        let (mu, sd) = curve.lookup(z).unwrap();
        let se = sd / (trials as f64).sqrt();
        assert!(
            (means[k] - mu).abs() <= 3.0 * se,
            "z = {z}: pooled {} vs {mu} (3 SE = {})",
            means[k],
            3.0 * se
        );
    }
    // Bell shape: rising then falling, peak at 5 mm.
    assert!(means[0] < means[1]);
    assert!(means[3] > means[4] && means[4] > means[5]);
    let peak = (0..6).max_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap();
    assert_eq!(schedule.standoffs_mm[peak], 5.0);
}

#[test]
fn metal_contact_has_distinct_spectrum() {
    let trial = synthesize_trial(&GeneratorConfig {
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let mel = featurize(&trial.clip, &MelConfig::default(), 1150).unwrap();
    let mut metal = vec![0.0; 60];
    let mut cut = vec![0.0; 60];
    for t in 0..1150 {
        let acc = if trial.contact[t] { &mut metal } else { &mut cut };
        for (a, v) in acc.iter_mut().zip(mel.row(t)) {
            *a += v.exp();
        }
    }
    let dot: f64 = metal.iter().zip(&cut).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine_distance = 1.0 - dot / (norm(&metal) * norm(&cut));
    assert!(cosine_distance >= 0.1, "{cosine_distance}");
}

#[test]
fn parallel_generation_matches_serial() {
    let cfg = GeneratorConfig {
        seed: 40,
        ..Default::default()
    };
    let par = synthesize_trials(&cfg, 5, 3).unwrap();
    assert_eq!(par.len(), 5);
    for (k, t) in par.iter().enumerate() {
        let serial = synthesize_profiles(&GeneratorConfig {
            seed: 40 + k as u64,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(t.profiles, serial.profiles);
    }
}

fn csv_text(rows: &[Vec<String>]) -> String {
    rows.iter().map(|r| r.join(",") + "\n").collect()
}

#[test]
fn csv_round_trip_is_exact() {
    let t = synthesize_profiles(&GeneratorConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    write_profiles_csv(std::fs::File::create(&path).unwrap(), &t.profiles).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1150);
    assert_eq!(load_profiles_csv(&path).unwrap(), t.profiles);
}

#[test]
fn csv_header_and_clamping() {
    let mut rows = vec![(0..70).map(|j| format!("c{j}")).collect::<Vec<_>>()];
    rows.push((0..70).map(|j| format!("{}", j as f64 - 2.0)).collect());
    rows.push(vec!["1.5".to_string(); 70]);
    let (set, clamped) = parse_profiles_csv(csv_text(&rows).as_bytes()).unwrap();
    assert_eq!(set.frames(), 2);
    assert_eq!(clamped, 2);
    assert_eq!(set.depths().get(0, 0), 0.0);
    assert_eq!(set.depths().get(0, 5), 3.0);
}

#[test]
fn csv_errors_carry_coordinates() {
    let err = parse_profiles_csv("".as_bytes()).unwrap_err().to_string();
    assert!(err.contains("no rows"), "{err}");

    let mut rows = vec![vec!["1".to_string(); 70]; 3];
    rows[2].pop();
    let err = parse_profiles_csv(csv_text(&rows).as_bytes()).unwrap_err().to_string();
    assert!(err.contains("row 3"), "{err}");

    let mut rows = vec![vec!["1".to_string(); 70]; 4];
    rows[3][7] = "abc".into();
    let err = parse_profiles_csv(csv_text(&rows).as_bytes()).unwrap_err().to_string();
    assert!(err.contains("row 4") && err.contains("column 8"), "{err}");

    assert!(matches!(load_profiles_csv("/no/such/file.csv"), Err(Error::Io { .. })));
}

#[test]
fn split_examples() {
    assert_eq!(split_train_test(1150), (0..575, 575..1150));
    assert_eq!(split_train_test(3), (0..1, 1..3));
}

#[test]
fn normalization_examples() {
    let x = SequenceTensor::from_fn(50, 3, |t, c| match c {
        0 => 4.0,
        1 => t as f64 * 3.0 + 1.0,
        _ => ((t * 7919) % 97) as f64 / 10.0,
    });
    let (y, stats) = normalize_features(&x, None).unwrap();
    assert!(y.column(0).iter().all(|&v| v == 0.0));
    assert_eq!(stats.std[0], 0.0);
    for c in 1..3 {
        let col = y.column(c);
        let m = col.iter().sum::<f64>() / 50.0;
        let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 50.0).sqrt();
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
    }
    // Idempotent on standardized data.
    let (z, _) = normalize_features(&y.slice_channels(1, 3).unwrap(), None).unwrap();
    for (a, b) in z.data().iter().zip(y.slice_channels(1, 3).unwrap().data()) {
        assert!((a - b).abs() < 1e-9);
    }
    // Provided stats are applied, not refitted.
    let (train, test) = (x.slice_frames(0, 25).unwrap(), x.slice_frames(25, 50).unwrap());
    let (_, st) = normalize_features(&train, None).unwrap();
    let (_, reused) = normalize_features(&test, Some(&st)).unwrap();
    assert_eq!(reused, st);
    assert_eq!(reused.fitted_frames, 25);
    let back = st.invert(&st.apply(&test).unwrap()).unwrap();
    for (a, b) in back.data().iter().zip(test.data()) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(matches!(
        normalize_features(&SequenceTensor::zeros(4, 2), Some(&st)),
        Err(Error::Shape(_))
    ));
}

#[test]
fn assembly_and_masking() {
    let t = synthesize_profiles(&GeneratorConfig::default()).unwrap();
    let mel = SequenceTensor::from_fn(1150, 60, |t, c| (t + c) as f64 * 0.01);
    let stats = FeatureStats::fit(t.profiles.depths());
    let on = assemble_sample(&mel, &t.profiles, &stats, true).unwrap();
    let off = assemble_sample(&mel, &t.profiles, &stats, false).unwrap();
    assert_eq!((on.input.frames(), on.input.channels()), (1150, 130));
    let norm = stats.apply(t.profiles.depths()).unwrap();
    assert_eq!(on.input.slice_channels(60, 130).unwrap(), norm);
    assert_eq!(on.input.slice_channels(0, 60).unwrap(), mel);
    assert!(off.input.slice_channels(60, 130).unwrap().data().iter().all(|&v| v == 0.0));
    assert_eq!(&on.target, t.profiles.depths());
    assert_eq!(on.target, off.target);
    let short = mel.slice_frames(0, 10).unwrap();
    assert!(matches!(
        assemble_sample(&short, &t.profiles, &stats, true),
        Err(Error::Shape(_))
    ));
}

#[test]
fn profile_set_rejects_bad_values() {
    assert!(ErosionProfileSet::new(SequenceTensor::zeros(3, 69)).is_err());
    let mut neg = SequenceTensor::zeros(3, PROFILE_COLUMNS);
    neg.set(1, 1, -1.0);
    assert!(ErosionProfileSet::new(neg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalized_random_data_has_unit_moments(seed in 0u64..1000, frames in 2usize..80) {
        let mut s = seed + 1;
        let x = SequenceTensor::from_fn(frames, 4, |_, c| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 33) as f64 / (1u64 << 31) as f64 * (c as f64 + 1.0) - 0.5
        });
        let (y, stats) = normalize_features(&x, None).unwrap();
        for c in 0..4 {
            if stats.std[c] == 0.0 { continue; }
            let col = y.column(c);
            let m = col.iter().sum::<f64>() / frames as f64;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / frames as f64).sqrt();
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_inputs_carry_no_profile_information(seed in 0u64..50) {
        let t = synthesize_profiles(&GeneratorConfig { seed, ..Default::default() }).unwrap();
        let mel = SequenceTensor::zeros(1150, 60);
        let stats = FeatureStats::fit(t.profiles.depths());
        let s = assemble_sample(&mel, &t.profiles, &stats, false).unwrap();
        prop_assert!(s.input.data().iter().all(|&v| v == 0.0));
    }
}
