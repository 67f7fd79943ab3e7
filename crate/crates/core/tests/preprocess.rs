use std::f64::consts::PI;

use clmi::data_io::{EEGDataset, Trial};
use clmi::preprocess::{bandpass, car_filter, preprocess_pipeline, sliding_window_augment, PreprocessConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

const FS: f64 = 250.0;

fn sine_trial(freq: f64, n: usize) -> Trial {
    let row: Vec<f64> = (0..n).map(|s| (2.0 * PI * freq * s as f64 / FS).sin()).collect();
    Trial::from_channels(&[row]).unwrap()
}

/// Peak amplitude away from the first and last half second.
fn interior_amplitude(freq: f64) -> f64 {
    let t = sine_trial(freq, 1000);
    let y = bandpass(&t, &PreprocessConfig::default(), FS).unwrap();
    let edge = (FS / 2.0) as usize;
    y.channel(0)[edge..1000 - edge]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
}

#[test]
fn bandpass_gain_at_probe_frequencies() {
    let pass = interior_amplitude(15.0);
    assert!(pass >= 0.9, "15 Hz amplitude {pass}");
    for f in [2.0, 60.0] {
        let stop = interior_amplitude(f);
        assert!(stop <= 0.1, "{f} Hz amplitude {stop}");
    }
}

#[test]
fn bandpass_removes_high_band_energy_of_white_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 4096;
    let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = bandpass(&Trial::from_channels(&[row]).unwrap(), &PreprocessConfig::default(), FS).unwrap();
    let mut spec: Vec<Complex64> = y.channel(0).iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let energy = |lo: f64, hi: f64| -> f64 {
        (0..=n / 2)
            .filter(|&k| {
                let f = k as f64 * FS / n as f64;
                f >= lo && f < hi
            })
            .map(|k| spec[k].norm_sqr())
            .sum()
    };
    let total = energy(0.0, FS);
    let high = energy(60.0, FS);
    assert!(high / total < 0.01, "{}", high / total);
}

#[test]
fn filter_is_zero_phase() {
    // a symmetric pulse stays symmetric about its centre
    let n = 1001;
    let c = n / 2;
    let row: Vec<f64> = (0..n)
        .map(|s| {
            let d = s as f64 - c as f64;
            (-(d * d) / 50.0).exp() * (2.0 * PI * 15.0 * d / FS).cos()
        })
        .collect();
    let y = bandpass(&Trial::from_channels(&[row]).unwrap(), &PreprocessConfig::default(), FS).unwrap();
    let y = y.channel(0);
    let peak = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for d in 1..200 {
        assert!((y[c - d] - y[c + d]).abs() < 1e-6 * peak, "asymmetry at {d}");
    }
    // the peak stays at the centre
    let argmax = (0..n).max_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs())).unwrap();
    assert_eq!(argmax, c);
}

proptest! {
    #[test]
    fn car_zeroes_channel_sums(
        rows in (2usize..8, 1usize..40).prop_flat_map(|(c, n)| prop::collection::vec(prop::collection::vec(-1e3f64..1e3, n), c))
    ) {
        let t = Trial::from_channels(&rows).unwrap();
        let y = car_filter(&t).unwrap();
        for s in 0..t.n_samples() {
            let sum: f64 = (0..t.n_channels()).map(|c| y.at(c, s)).sum();
            prop_assert!(sum.abs() < 1e-9);
        }
        // idempotent
        let z = car_filter(&y).unwrap();
        for (a, b) in y.data().iter().zip(z.data()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn thousand_sample_trial_gives_five_windows() {
    let t = sine_trial(10.0, 1000);
    let w = sliding_window_augment(&t, &PreprocessConfig::default()).unwrap();
    assert_eq!(w.len(), 5);
    assert!(w.iter().all(|x| x.n_samples() == 900));
}

#[test]
fn pipeline_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trials: Vec<Trial> = (0..4)
        .map(|_| Trial::new(3, 1000, (0..3000).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let d = EEGDataset::new(trials, vec![0, 1, 0, 1], FS, 3, 1000, 2).unwrap();
    let cfg = PreprocessConfig::default();
    let aug = preprocess_pipeline(&d, &cfg, true).unwrap();
    assert_eq!((aug.len(), aug.n_samples), (20, 900));
    assert_eq!(&aug.labels[..10], &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    let plain = preprocess_pipeline(&d, &cfg, false).unwrap();
    assert_eq!((plain.len(), plain.n_samples), (4, 900));
    // the unaugmented crop is the first augmented window
    assert_eq!(plain.trials[1], aug.trials[5]);
}
