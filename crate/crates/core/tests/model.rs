use clmi::model::{build_ablation_suite, Model, ModelConfig, Topology};
use clmi_autodiff::{Mode, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_batch(cfg: &ModelConfig, b: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [h, w, c] = cfg.input_dims;
    Tensor::from_fn(&[b, h, w, c], |_| rng.random_range(-1.0..1.0))
}

fn shape_of<'a>(trace: &'a [(String, Vec<usize>)], name: &str) -> &'a [usize] {
    &trace
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("{name} missing from trace"))
        .1
}

/// Trainable parameter count from layer formulas, independent of the builder.
fn expected_params(cfg: &ModelConfig) -> usize {
    let three_d = cfg.conv_dim == 3;
    let mut cin = if three_d { 1 } else { cfg.input_dims[2] };
    let mut total = 0;
    for s in &cfg.conv_stages {
        for &k in &s.scales {
            let taps = if three_d { k * k * k } else { k * k };
            total += taps * cin * s.filters + s.filters;
        }
        cin = s.filters * s.scales.len();
        total += 2 * cin;
    }
    let h = cfg.lstm_units;
    let feat = match cfg.topology {
        Topology::Parallel => cfg.input_dims[2],
        Topology::Serial => cin,
    };
    total += 4 * h * (feat + h + 1);
    total += h * h + 2 * h; // attention W, b, v
    total += 2 * h; // post-attention norm
    total += (cfg.concat_width() + 1) * cfg.n_classes;
    total
}

#[test]
fn default_model_matches_table_shapes() {
    let cfg = ModelConfig::default();
    let mut m = Model::new(cfg.clone()).unwrap();
    assert_eq!(m.n_params(), expected_params(&cfg));
    assert_eq!(m.n_params(), 39_921_220);

    let x = random_batch(&cfg, 1, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pass = m.forward(&x, Mode::Infer, &mut rng).unwrap();
    let t = &pass.trace;
    let rows: &[(&str, &[usize])] = &[
        ("Conv3d_1a", &[1, 30, 30, 22, 32]),
        ("Conv3d_1c", &[1, 30, 30, 22, 32]),
        ("Conv3d_1", &[1, 30, 30, 22, 96]),
        ("MaxPooling_1", &[1, 15, 15, 11, 96]),
        ("Conv3d_2b", &[1, 15, 15, 11, 64]),
        ("Conv3d_2", &[1, 15, 15, 11, 192]),
        ("MaxPooling_2", &[1, 8, 8, 6, 192]),
        ("Conv3d_3", &[1, 8, 8, 6, 384]),
        ("MaxPooling_3", &[1, 4, 4, 3, 384]),
        ("Conv3d_4a", &[1, 4, 4, 3, 128]),
        ("Conv3d_4", &[1, 4, 4, 3, 384]),
        ("BN Layer_4", &[1, 4, 4, 3, 384]),
        ("MaxPooling_4", &[1, 2, 2, 2, 384]),
        ("Flatten Layer_1", &[1, 3072]),
        ("Reshape Layer", &[1, 900, 22]),
        ("LSTM", &[1, 900, 256]),
        ("Attention", &[1, 256]),
        ("BN Layer_5", &[1, 256]),
        ("Flatten Layer_2", &[1, 256]),
        ("Concatenate", &[1, 3328]),
        ("Fully Connected Layer", &[1, 4]),
    ];
    for (name, shape) in rows {
        assert_eq!(shape_of(t, name), *shape, "{name}");
    }
    assert_eq!(pass.features.shape(), &[1, 3328]);
    assert_eq!(pass.logits.shape(), &[1, 4]);
}

#[test]
fn variant_widths_and_param_counts() {
    for (_, cfg) in build_ablation_suite(&ModelConfig::default()) {
        let m = Model::new(cfg.clone()).unwrap();
        assert_eq!(m.n_params(), expected_params(&cfg));
    }
    let two_d = ModelConfig {
        conv_dim: 2,
        ..ModelConfig::default()
    };
    // 30 -> 15 -> 8 -> 4 -> 2 in-plane, depth axis fixed at 1
    assert_eq!(two_d.cnn_flat_width(), 2 * 2 * 384);
    let serial = ModelConfig {
        topology: Topology::Serial,
        ..ModelConfig::default()
    };
    assert_eq!(serial.lstm_input(), (8, 384));
    assert_eq!(serial.concat_width(), 256);
    assert_ne!(serial.concat_width(), 3328);
}

#[test]
fn reduced_variants_trace() {
    let base = ModelConfig::ci();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let cfg = ModelConfig {
        conv_dim: 2,
        ..base.clone()
    };
    let mut m = Model::new(cfg.clone()).unwrap();
    let pass = m.forward(&random_batch(&cfg, 2, 1), Mode::Train, &mut rng).unwrap();
    assert_eq!(shape_of(&pass.trace, "Conv3d_1a"), &[2, 10, 10, 1, 8]);
    assert_eq!(shape_of(&pass.trace, "MaxPooling_2"), &[2, 3, 3, 1, 24]);
    assert_eq!(shape_of(&pass.trace, "Reshape Layer"), &[2, 100, 8]);
    assert_eq!(pass.features.shape(), &[2, 9 * 24 + 16]);

    let cfg = ModelConfig {
        topology: Topology::Serial,
        ..base
    };
    let mut m = Model::new(cfg.clone()).unwrap();
    let pass = m.forward(&random_batch(&cfg, 2, 1), Mode::Train, &mut rng).unwrap();
    assert_eq!(shape_of(&pass.trace, "Reshape Layer"), &[2, 18, 24]);
    assert!(pass.trace.iter().all(|(n, _)| n != "Concatenate"));
    assert_eq!(pass.features.shape(), &[2, 16]);
}

#[test]
fn zeroed_network_emits_head_bias() {
    let cfg = ModelConfig::ci();
    let mut m = Model::new(cfg.clone()).unwrap();
    let bias = [0.5, -1.0, 2.0, 0.25];
    for p in m.params_mut().iter_mut() {
        let n = p.tensor.len();
        let fill: Vec<f64> = if p.name == "head.b" {
            bias.to_vec()
        } else if p.name.ends_with(".b") {
            vec![0.3; n]
        } else if p.name.ends_with(".w") || p.name.starts_with("lstm.w") || p.name == "attn.v" {
            vec![0.0; n]
        } else {
            p.tensor.data().to_vec()
        };
        p.tensor.data_mut().copy_from_slice(&fill);
    }
    let logits = m.predict(&Tensor::zeros(&[3, 10, 10, 8])).unwrap();
    for row in logits.data().chunks(4) {
        assert_eq!(row, bias);
    }
}

#[test]
fn branches_are_independent() {
    let cfg = ModelConfig::ci();
    let split = cfg.cnn_flat_width();
    let x = random_batch(&cfg, 2, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut base = Model::new(cfg.clone()).unwrap();
    let f0 = base.forward(&x, Mode::Infer, &mut rng).unwrap().features;

    for zero_cnn in [true, false] {
        let mut m = Model::new(cfg.clone()).unwrap();
        for p in m.params_mut().iter_mut() {
            let hit = if zero_cnn {
                Model::is_cnn_param(&p.name)
            } else {
                Model::is_lstm_param(&p.name)
            };
            if hit {
                p.tensor.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let f = m.forward(&x, Mode::Infer, &mut rng).unwrap().features;
        let w = cfg.concat_width();
        for b in 0..2 {
            let (row, row0) = (&f.data()[b * w..(b + 1) * w], &f0.data()[b * w..(b + 1) * w]);
            let (kept, kept0, changed, changed0) = if zero_cnn {
                (&row[split..], &row0[split..], &row[..split], &row0[..split])
            } else {
                (&row[..split], &row0[..split], &row[split..], &row0[split..])
            };
            assert_eq!(kept, kept0);
            assert_ne!(changed, changed0);
        }
    }
}

#[test]
fn every_parameter_receives_gradient() {
    for (_, cfg) in build_ablation_suite(&ModelConfig::ci()) {
        let mut m = Model::new(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_batch(&cfg, 4, 2);
        m.backward_batch(&x, &[0, 1, 2, 3], &mut rng).unwrap();
        for p in m.params().iter() {
            let g = p.grad.as_ref().unwrap_or_else(|| panic!("{} has no gradient", p.name));
            let max = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max > 0.0, "{:?}: {} has zero gradient", cfg.topology, p.name);
        }
    }
}

#[test]
fn mean_pooling_without_attention() {
    let cfg = ModelConfig {
        attention: false,
        ..ModelConfig::ci()
    };
    let mut m = Model::new(cfg.clone()).unwrap();
    assert!(m.params().by_name("attn.w").is_none());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let loss = m
        .train_step(&random_batch(&cfg, 4, 3), &[0, 1, 2, 3], 1e-3, &mut rng)
        .unwrap()
        .loss
        .unwrap();
    assert!(loss.is_finite());
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let cfg = ModelConfig::ci();
    let mut m = Model::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_batch(&cfg, 4, 4);
    for _ in 0..3 {
        m.train_step(&x, &[0, 1, 2, 3], 1e-2, &mut rng).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.clmi");
    m.save(&path).unwrap();
    let mut back = Model::load(
        ModelConfig {
            seed: 99,
            ..cfg.clone()
        },
        &path,
    )
    .unwrap();
    // the checkpoint stores f32, so compare at that precision
    let (a, b) = (m.predict(&x).unwrap(), back.predict(&x).unwrap());
    for (u, v) in a.data().iter().zip(b.data()) {
        assert!((u - v).abs() < 1e-4 * (1.0 + u.abs()), "{u} vs {v}");
    }
    let wrong = ModelConfig { lstm_units: 8, ..cfg };
    assert!(Model::load(wrong, &path).is_err());
}

#[test]
fn same_seed_same_training() {
    let cfg = ModelConfig::ci();
    let x = random_batch(&cfg, 4, 6);
    let run = || {
        let mut m = Model::new(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2 {
            m.train_step(&x, &[3, 2, 1, 0], 1e-3, &mut rng).unwrap();
        }
        m.checkpoint_entries()
    };
    assert_eq!(run(), run());
}
