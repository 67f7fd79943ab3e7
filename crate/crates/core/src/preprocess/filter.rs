//! Digital Butterworth bandpass design and zero-phase filtering.
//!
//! The design follows the usual analog-prototype route: Butterworth lowpass
//! poles, lowpass-to-bandpass transform at prewarped band edges, bilinear
//! transform, then grouping into second-order sections. An order-`n` design
//! yields `n` biquads (a `2n`-order filter).

use std::f64::consts::PI;

use num_complex::Complex64;

/// One biquad `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Complex response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (self.a[0] + z1 * self.a[1] + z2 * self.a[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Magnitude response at `freq` Hz.
    pub fn magnitude(&self, freq: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq / fs;
        self.sections
            .iter()
            .map(|s| s.response(w))
            .product::<Complex64>()
            .norm()
    }

    /// Direct-form-II-transposed states giving a steady-state response to a
    /// constant unit input, one `[z1, z2]` per section.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = s.dc_gain();
                let z2 = s.b[2] - s.a[2] * g;
                let z1 = g - s.b[0];
                let out = [z1 * scale, z2 * scale];
                scale *= g;
                out
            })
            .collect()
    }

    /// Causal filtering with the given initial section states.
    fn run(&self, x: &mut [f64], mut states: Vec<[f64; 2]>) {
        for (s, z) in self.sections.iter().zip(states.iter_mut()) {
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z[0];
                z[0] = s.b[1] * input - s.a[1] * y + z[1];
                z[1] = s.b[2] * input - s.a[2] * y;
                *v = y;
            }
        }
    }
}

/// Order-`order` Butterworth bandpass with edges `lo..hi` Hz at rate `fs`.
///
/// Callers must ensure `0 < lo < hi < fs / 2` and `order >= 1`.
pub fn butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Sos {
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (wl, wh) = (warp(lo), warp(hi));
    let bw = wh - wl;
    let w0_sq = wl * wh;

    let mut poles = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta) * (bw / 2.0);
        let root = (p * p - w0_sq).sqrt();
        poles.push(p + root);
        poles.push(p - root);
    }
    // analog gain bw^order with `order` zeros at s = 0
    let fs2 = 2.0 * fs;
    let mut gain = Complex64::new(bw.powi(order as i32), 0.0);
    for _ in 0..order {
        gain *= fs2;
    }
    let mut digital: Vec<Complex64> = Vec::with_capacity(poles.len());
    for &p in &poles {
        gain /= fs2 - p;
        digital.push((fs2 + p) / (fs2 - p));
    }
    // the `order` zeros at infinity map to z = -1; the ones at s = 0 to z = +1
    let gain = gain.re;

    let mut upper: Vec<Complex64> = digital.into_iter().filter(|p| p.im > 0.0).collect();
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    debug_assert_eq!(upper.len(), order);

    let mut sections: Vec<Biquad> = upper
        .iter()
        .map(|p| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -2.0 * p.re, p.norm_sqr()],
        })
        .collect();
    for c in &mut sections[0].b {
        *c *= gain;
    }
    Sos { sections }
}

/// Forward-backward filtering with odd reflection padding of `pad` samples at
/// each end and steady-state initial conditions.
pub fn filtfilt(sos: &Sos, x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let zi = sos.step_states();
    let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

    let z = scaled(ext[0]);
    sos.run(&mut ext, z);
    ext.reverse();
    let z = scaled(ext[0]);
    sos.run(&mut ext, z);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}
