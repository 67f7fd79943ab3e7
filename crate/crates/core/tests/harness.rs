use clmi::harness::metrics::{macro_f1, micro_f1, Confusion, Metrics};
use clmi::harness::{
    export_features, run_ablation, run_cv, run_sweep, splits, sweep_plan, train, Classifier, Hyperparams, RunConfig,
    Samples, SplitMode, SweepAxis,
};
use clmi::model::{ConvStage, Model, ModelConfig};
use clmi::preprocess::{filter_trials, PreprocessConfig};
use clmi::synthgen::SynthSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seconds-scale config: 2 classes, 4 channels, 4×4 volumes, one conv stage.
fn tiny() -> RunConfig {
    let mut cfg = RunConfig::ci();
    cfg.data.synth = Some(SynthSpec {
        n_trials_per_class: 10,
        n_channels: 4,
        n_samples: 64,
        n_classes: 2,
        ..SynthSpec::default()
    });
    cfg.preprocess = PreprocessConfig {
        window_samples: 16,
        window_stride_samples: 8,
        n_windows: 3,
        volume_h: 4,
        volume_w: 4,
        ..PreprocessConfig::default()
    };
    cfg.model = ModelConfig {
        conv_stages: vec![ConvStage {
            filters: 2,
            scales: vec![3],
        }],
        lstm_units: 4,
        input_dims: [4, 4, 4],
        n_classes: 2,
        ..ModelConfig::default()
    };
    cfg.hyper = Hyperparams {
        epochs: 2,
        batch_size: 8,
        ..Hyperparams::default()
    };
    cfg.run.folds = 3;
    cfg
}

#[test]
fn micro_f1_equals_accuracy_on_random_confusions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let k = rng.random_range(2..7);
        let mut c = Confusion::new(k);
        for _ in 0..rng.random_range(1..200) {
            c.add(rng.random_range(0..k), rng.random_range(0..k));
        }
        assert!((micro_f1(&c) - c.accuracy()).abs() < 1e-12, "{c:?}");
    }
}

#[test]
fn twelve_of_thirteen() {
    let c = Confusion {
        counts: vec![vec![6, 1], vec![0, 6]],
    };
    let m = Metrics::from_confusion(&c);
    assert!((m.accuracy - 12.0 / 13.0).abs() < 1e-12);
    assert!((m.f1_micro - 12.0 / 13.0).abs() < 1e-12);
    // class 0: p 1, r 6/7; class 1: p 6/7, r 1
    let f = 2.0 * (6.0 / 7.0) / (1.0 + 6.0 / 7.0);
    assert!((macro_f1(&c) - f).abs() < 1e-12);
}

#[test]
fn cv_report_is_fold_mean_and_folds_do_not_leak() {
    let cfg = tiny();
    let d = cfg.dataset().unwrap();
    let r = run_cv(&d, &cfg).unwrap();
    assert_eq!(r.folds.len(), 3);
    let mean = r.folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / 3.0;
    assert!((r.mean.accuracy - mean).abs() < 1e-12);
    let var = r.folds.iter().map(|f| (f.metrics.accuracy - mean).powi(2)).sum::<f64>() / 3.0;
    assert!((r.std.accuracy - var.sqrt()).abs() < 1e-12);

    let mut seen = vec![0; d.len()];
    for f in &r.folds {
        assert!(f.test_trials.iter().all(|t| !f.train_trials.contains(t)));
        for &t in &f.test_trials {
            seen[t] += 1;
        }
        assert_eq!(f.confusion.total() as usize, f.test_trials.len());
    }
    assert!(seen.iter().all(|&n| n == 1), "every trial is tested exactly once");
}

#[test]
fn augmented_splits_stay_disjoint() {
    let mut cfg = tiny();
    cfg.run.augment = true;
    cfg.run.classifier = Classifier::CspLda;
    cfg.run.csp_filters_per_end = 1;
    let d = cfg.dataset().unwrap();
    let r = run_cv(&d, &cfg).unwrap();
    for ((train_idx, test_idx), f) in splits(&d, &cfg).unwrap().iter().zip(&r.folds) {
        assert!(test_idx.iter().all(|t| !train_idx.contains(t)));
        // voting leaves one prediction per test trial
        assert_eq!(f.confusion.total() as usize, test_idx.len());
    }
}

#[test]
fn holdout_is_one_split() {
    let mut cfg = tiny();
    cfg.run.mode = SplitMode::Holdout;
    cfg.run.train_fraction = 0.7;
    let d = cfg.dataset().unwrap();
    let s = splits(&d, &cfg).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].0.len() + s[0].1.len(), d.len());
}

#[test]
fn zero_epochs_leave_the_model_untouched() {
    let mut cfg = tiny();
    cfg.hyper.epochs = 0;
    let d = cfg.dataset().unwrap();
    let f = filter_trials(&d, &cfg.preprocess).unwrap();
    let idx: Vec<usize> = (0..d.len()).collect();
    let s = Samples::build(&f, &idx, &cfg.preprocess, false).unwrap();
    let mut model = Model::new(cfg.model.clone()).unwrap();
    let before = model.checkpoint_entries();
    let h = train(&mut model, &s, &cfg.hyper).unwrap();
    assert!(h.loss.is_empty());
    assert_eq!(model.checkpoint_entries(), before);
}

#[test]
fn runs_are_deterministic() {
    let cfg = tiny();
    let d = cfg.dataset().unwrap();
    assert_eq!(run_cv(&d, &cfg).unwrap(), run_cv(&d, &cfg).unwrap());
}

#[test]
fn feature_export_has_one_row_per_sample() {
    let cfg = tiny();
    let d = cfg.dataset().unwrap();
    let f = filter_trials(&d, &cfg.preprocess).unwrap();
    let idx: Vec<usize> = (0..d.len()).collect();
    let s = Samples::build(&f, &idx, &cfg.preprocess, true).unwrap();
    let mut model = Model::new(cfg.model.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    export_features(&mut model, &s, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let width = cfg.model.concat_width();
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), width + 1);
    assert_eq!(header[0], "label");
    assert_eq!(header[width], format!("f{}", width - 1));
    assert_eq!(lines.len() - 1, d.len() * cfg.preprocess.n_windows);
    for (line, &label) in lines[1..].iter().zip(&s.labels) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), width + 1);
        assert_eq!(cols[0].parse::<usize>().unwrap(), label);
        assert!(cols[1..].iter().all(|v| v.parse::<f64>().unwrap().is_finite()));
    }
}

#[test]
fn ablation_has_three_rows_on_the_same_folds() {
    let mut cfg = tiny();
    cfg.hyper.epochs = 1;
    cfg.run.classifier = Classifier::CspLda; // forced back to the network
    let d = cfg.dataset().unwrap();
    let rows = run_ablation(&d, &cfg).unwrap();
    assert_eq!(rows.len(), 3);
    let tests: Vec<Vec<usize>> = rows[0].1.folds.iter().map(|f| f.test_trials.clone()).collect();
    for (_, r) in &rows {
        assert!(r.folds.iter().all(|f| f.final_train_loss.is_some()));
        assert_eq!(r.folds.iter().map(|f| f.test_trials.clone()).collect::<Vec<_>>(), tests);
    }
}

#[test]
fn sweeps_change_only_their_axis() {
    let cfg = tiny();
    for axis in [SweepAxis::Lr, SweepAxis::LstmUnits, SweepAxis::Epochs] {
        let plan = sweep_plan(&cfg, axis, &axis.grid()).unwrap();
        assert_eq!(plan.len(), 5);
        for (v, c) in &plan {
            let mut back = c.clone();
            match axis {
                SweepAxis::Lr => {
                    assert_eq!(c.hyper.lr0, *v);
                    back.hyper.lr0 = cfg.hyper.lr0;
                }
                SweepAxis::LstmUnits => {
                    assert_eq!(c.model.lstm_units as f64, *v);
                    back.model.lstm_units = cfg.model.lstm_units;
                }
                SweepAxis::Epochs => {
                    assert_eq!(c.hyper.epochs as f64, *v);
                    back.hyper.epochs = cfg.hyper.epochs;
                }
            }
            assert_eq!(back, cfg);
        }
    }
    assert!(sweep_plan(&cfg, SweepAxis::Epochs, &[2.5]).is_err());
    assert!(sweep_plan(&cfg, SweepAxis::Lr, &[-1.0]).is_err());

    let d = cfg.dataset().unwrap();
    let rows = run_sweep(&d, &cfg, SweepAxis::LstmUnits, &[2.0, 3.0]).unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![2.0, 3.0]);
}
