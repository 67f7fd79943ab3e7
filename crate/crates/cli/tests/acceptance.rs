//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Built without the libtest harness so the lines are always
//! printed.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use clmi::data_io::Trial;
use clmi::harness::metrics::{macro_f1, micro_f1, Confusion, Metrics};
use clmi::harness::{lr_at, run_cv, Classifier, RunConfig, Samples, SweepAxis};
use clmi::model::{Model, ModelConfig};
use clmi::preprocess::{bandpass, car_filter, filter_trials, sliding_window_augment, PreprocessConfig};
use clmi::synthgen::SynthSpec;
use clmi_autodiff::gradcheck::suite;
use clmi_autodiff::{Mode, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(
        t < limit,
        format!("took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()),
    )
}

// 1 ----------------------------------------------------------------------

fn gradients() -> Outcome {
    let start = Instant::now();
    let reports = suite::run(10).map_err(|e| e.to_string())?;
    let worst = reports
        .iter()
        .max_by(|a, b| a.1.max_rel_err.total_cmp(&b.1.max_rel_err))
        .ok_or("no layers checked")?;
    ensure(reports.len() == suite::LAYERS.len(), "layer list incomplete")?;
    ensure(
        worst.1.max_rel_err < 1e-4,
        format!("{}: rel err {:.2e}", worst.0, worst.1.max_rel_err),
    )?;
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "{} layers × 10 seeds, worst {} {:.2e}",
        reports.len(),
        worst.0,
        worst.1.max_rel_err
    ))
}

// 2 ----------------------------------------------------------------------

fn table_shapes() -> Outcome {
    let cfg = ModelConfig::default();
    let mut m = Model::new(cfg.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let [h, w, c] = cfg.input_dims;
    let x = Tensor::from_fn(&[1, h, w, c], |_| rng.random_range(-1.0..1.0));
    let pass = m.forward(&x, Mode::Infer, &mut rng).map_err(|e| e.to_string())?;
    let expected: &[(&str, &[usize])] = &[
        ("Input", &[1, 30, 30, 22, 1]),
        ("Conv3d_1a", &[1, 30, 30, 22, 32]),
        ("Conv3d_1b", &[1, 30, 30, 22, 32]),
        ("Conv3d_1c", &[1, 30, 30, 22, 32]),
        ("Conv3d_1", &[1, 30, 30, 22, 96]),
        ("BN Layer_1", &[1, 30, 30, 22, 96]),
        ("MaxPooling_1", &[1, 15, 15, 11, 96]),
        ("Conv3d_2", &[1, 15, 15, 11, 192]),
        ("MaxPooling_2", &[1, 8, 8, 6, 192]),
        ("Conv3d_3", &[1, 8, 8, 6, 384]),
        ("MaxPooling_3", &[1, 4, 4, 3, 384]),
        ("Conv3d_4", &[1, 4, 4, 3, 384]),
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
    for (name, shape) in expected {
        let got = pass
            .trace
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| format!("{name} missing"))?;
        ensure(got.1 == *shape, format!("{name}: {:?} != {shape:?}", got.1))?;
    }
    ensure(pass.logits.shape() == [1, 4], "logits")?;
    ensure(cfg.concat_width() == 3328, "concat width")?;
    Ok(format!("{} layers exact, {} parameters", expected.len(), m.n_params()))
}

// 3 ----------------------------------------------------------------------

fn interior_amplitude(freq: f64) -> Result<f64, String> {
    let fs = 250.0;
    let row: Vec<f64> = (0..1000).map(|s| (2.0 * PI * freq * s as f64 / fs).sin()).collect();
    let t = Trial::from_channels(&[row]).map_err(|e| e.to_string())?;
    let y = bandpass(&t, &PreprocessConfig::default(), fs).map_err(|e| e.to_string())?;
    Ok(y.channel(0)[125..875].iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

fn preprocessing() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let data: Vec<f64> = (0..22 * 1000).map(|_| rng.random_range(-100.0..100.0)).collect();
        let t = car_filter(&Trial::new(22, 1000, data).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for s in 0..1000 {
            worst = worst.max((0..22).map(|c| t.at(c, s)).sum::<f64>().abs());
        }
    }
    ensure(worst < 1e-9, format!("CAR sum {worst:e}"))?;
    let pass = interior_amplitude(15.0)?;
    let low = interior_amplitude(2.0)?;
    let high = interior_amplitude(60.0)?;
    ensure(pass >= 0.9, format!("15 Hz amplitude {pass}"))?;
    ensure(low <= 0.1 && high <= 0.1, format!("stopband amplitudes {low} {high}"))?;
    let trial = Trial::new(22, 1000, vec![1.0; 22_000]).map_err(|e| e.to_string())?;
    let windows = sliding_window_augment(&trial, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
    ensure(windows.len() == 5, format!("{} windows", windows.len()))?;
    ensure(windows.iter().all(|w| w.n_samples() == 900), "window length")?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "CAR |Σ| {worst:.1e}; gain 15 Hz {pass:.3}, 2 Hz {low:.4}, 60 Hz {high:.4}; 5×900 windows"
    ))
}

// 4 ----------------------------------------------------------------------

fn overfit() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::ci();
    cfg.data.synth = Some(SynthSpec {
        n_trials_per_class: 4,
        n_samples: 200,
        noise_scale: 0.05,
        ..SynthSpec::default()
    });
    let d = cfg.dataset().map_err(|e| e.to_string())?;
    let f = filter_trials(&d, &cfg.preprocess).map_err(|e| e.to_string())?;
    let idx: Vec<usize> = (0..d.len()).collect();
    let s = Samples::build(&f, &idx, &cfg.preprocess, false).map_err(|e| e.to_string())?;
    ensure(s.len() == 16, format!("{} trials", s.len()))?;
    let mut model = Model::new(cfg.model.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = s.batch(&idx);
    let mut loss = f64::INFINITY;
    for epoch in 0..300 {
        let pass = model
            .train_step(&x, &s.labels, lr_at(epoch, &cfg.hyper), &mut rng)
            .map_err(|e| e.to_string())?;
        loss = pass.loss.ok_or("no loss")?;
        if loss < 0.1 {
            within(start, Duration::from_secs(300))?;
            return Ok(format!("loss {loss:.4} after {} epochs", epoch + 1));
        }
    }
    Err(format!("loss {loss:.4} after 300 epochs"))
}

// 5 ----------------------------------------------------------------------

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::ci();
    let d = cfg.dataset().map_err(|e| e.to_string())?;
    let net = run_cv(&d, &cfg).map_err(|e| e.to_string())?;

    // 2-class baseline, frozen calibration: 3 filters per end, windowed
    // training with per-trial voting.
    let mut csp = RunConfig::ci();
    csp.data.synth.as_mut().expect("ci is synthetic").n_classes = 2;
    csp.run.classifier = Classifier::CspLda;
    csp.run.csp_filters_per_end = 3;
    csp.run.augment = true;
    let d2 = csp.dataset().map_err(|e| e.to_string())?;
    let base = run_cv(&d2, &csp).map_err(|e| e.to_string())?;

    let msg = format!(
        "network 4-class {:.3} ± {:.3} (≥ 0.80), CSP+LDA 2-class {:.3} ± {:.3} (≥ 0.90)",
        net.mean.accuracy, net.std.accuracy, base.mean.accuracy, base.std.accuracy
    );
    ensure(net.mean.accuracy >= 0.80 && base.mean.accuracy >= 0.90, msg.clone())?;
    within(start, Duration::from_secs(900))?;
    Ok(msg)
}

// 6 ----------------------------------------------------------------------

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(2..8);
        let mut c = Confusion::new(k);
        for _ in 0..rng.random_range(1..300) {
            c.add(rng.random_range(0..k), rng.random_range(0..k));
        }
        worst = worst.max((micro_f1(&c) - c.accuracy()).abs());
    }
    ensure(worst <= 1e-12, format!("micro-F1 vs accuracy {worst:e}"))?;
    // 13 test trials, one class-0 trial called class 1
    let c = Confusion {
        counts: vec![vec![6, 1], vec![0, 6]],
    };
    let m = Metrics::from_confusion(&c);
    let twelve = 12.0 / 13.0;
    ensure((m.accuracy - twelve).abs() < 1e-12, "accuracy 12/13")?;
    ensure((m.precision_micro - twelve).abs() < 1e-12, "micro precision 12/13")?;
    ensure((m.recall_micro - twelve).abs() < 1e-12, "micro recall 12/13")?;
    ensure((m.f1_micro - twelve).abs() < 1e-12, "micro F1 12/13")?;
    ensure(
        (macro_f1(&c) - 12.0 / 13.0).abs() < 1e-12,
        format!("macro F1 {}", macro_f1(&c)),
    )?;
    Ok(format!(
        "max |micro-F1 − accuracy| {worst:.1e} over 1000 matrices; 12/13 case exact"
    ))
}

// 7 ----------------------------------------------------------------------

fn clmi(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_clmi"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("clmi {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out)
}

/// A seconds-scale 4-class config written to `dir`.
fn small_config(dir: &Path) -> Result<String, String> {
    let mut cfg = RunConfig::ci();
    let synth = cfg.data.synth.as_mut().expect("ci is synthetic");
    synth.n_trials_per_class = 10;
    cfg.hyper.epochs = 3;
    cfg.run.folds = 3;
    cfg.run.augment = true;
    let path = dir.join("small.json");
    std::fs::write(&path, cfg.to_json()).map_err(|e| e.to_string())?;
    Ok(path.to_string_lossy().into_owned())
}

fn without_clock(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_clock_seconds\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = small_config(dir.path())?;
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        clmi(&["cv", "--config", &cfg, "--out", &out.to_string_lossy()])?;
    }
    let a = std::fs::read_to_string(a).map_err(|e| e.to_string())?;
    let b = std::fs::read_to_string(b).map_err(|e| e.to_string())?;
    ensure(a != b || a.contains("wall_clock_seconds"), "clock field missing")?;
    ensure(
        without_clock(&a) == without_clock(&b),
        "metrics JSON differs between runs",
    )?;
    Ok(format!(
        "two cv runs byte-identical over {} bytes (clock line excluded)",
        without_clock(&a).len()
    ))
}

// 8 ----------------------------------------------------------------------

fn ablation_and_sweeps() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::ci();
    cfg.run.mode = clmi::harness::SplitMode::Holdout;
    let path = dir.path().join("ablate.json");
    std::fs::write(&path, cfg.to_json()).map_err(|e| e.to_string())?;
    let out = clmi(&["ablate", "--config", &path.to_string_lossy()])?;
    let doc: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let reports = doc["reports"].as_array().ok_or("no reports")?;
    let names: Vec<&str> = reports.iter().filter_map(|r| r["name"].as_str()).collect();
    ensure(
        names
            == [
                "2D CNN | CNN-LSTM parallel",
                "3D CNN | CNN-LSTM serial",
                "3D CNN | CNN-LSTM parallel",
            ],
        format!("variants {names:?}"),
    )?;
    let accs: Vec<f64> = reports.iter().filter_map(|r| r["mean"]["accuracy"].as_f64()).collect();
    ensure(
        accs.len() == 3 && accs.iter().all(|&a| a > 0.25),
        format!("accuracies {accs:?} vs chance 0.25"),
    )?;

    for (axis, grid) in [
        ("lr", vec![0.1, 0.01, 0.001, 0.0001, 0.00001]),
        ("lstm_units", vec![64.0, 128.0, 256.0, 512.0, 1024.0]),
        ("epochs", vec![30.0, 50.0, 100.0, 150.0, 200.0]),
    ] {
        let out = clmi(&["sweep", "--profile", "default", "--axis", axis, "--plan-only"])?;
        let plan: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        let runs = plan["runs"].as_array().ok_or("no runs")?;
        let values: Vec<f64> = runs.iter().filter_map(|r| r["value"].as_f64()).collect();
        ensure(values == grid, format!("{axis} grid {values:?}"))?;
        ensure(
            SweepAxis::parse(axis).map(SweepAxis::grid) == Some(grid),
            format!("{axis} library grid"),
        )?;
        let field = if axis == "lr" { "lr0" } else { axis };
        ensure(
            runs.iter()
                .all(|r| r[field] == r["value"] || r[field].as_f64() == r["value"].as_f64()),
            format!("{axis} plan does not apply its value"),
        )?;
    }
    Ok(format!(
        "3 variants, holdout accuracies {}; lr/lstm_units/epochs grids match",
        accs.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ")
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient suite", gradients),
        ("layer shape table", table_shapes),
        ("preprocessing oracles", preprocessing),
        ("overfit check", overfit),
        ("synthetic end-to-end", end_to_end),
        ("metric identities", metric_identities),
        ("determinism", determinism),
        ("ablation/sweep harness", ablation_and_sweeps),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|n| n.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS — {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL — {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
