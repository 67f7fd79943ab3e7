//! Single-layer LSTM over `(B, T, F)` sequences, returning every hidden state.
//!
//! Weights: `wx (F, 4H)`, `wh (H, 4H)`, `b (4H)`; the gate blocks along the
//! `4H` axis are ordered input, forget, cell candidate, output. Initial hidden
//! and cell states are zero.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmGeom {
    pub batch: usize,
    pub steps: usize,
    pub features: usize,
    pub units: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Post-activation gates `(B, T, 4H)`.
    gates: Vec<f64>,
    /// Cell states `(B, T, H)`.
    cells: Vec<f64>,
    /// `tanh` of the cell states `(B, T, H)`.
    cells_tanh: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Accumulates `v · M` into `out` for a row-major `M` of shape `(v.len(), out.len())`.
#[inline]
fn vec_mat_acc(v: &[f64], m: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, &vr) in v.iter().enumerate() {
        if vr == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += vr * w;
        }
    }
}

/// Accumulates `M · v` into `out` for a row-major `M` of shape `(out.len(), v.len())`.
#[inline]
fn mat_vec_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &m[r * cols..(r + 1) * cols];
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates the outer product `a ⊗ b` into row-major `m`.
#[inline]
fn outer_acc(a: &[f64], b: &[f64], m: &mut [f64]) {
    let cols = b.len();
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        for (o, &bv) in m[r * cols..(r + 1) * cols].iter_mut().zip(b) {
            *o += ar * bv;
        }
    }
}

pub fn forward(g: &LstmGeom, x: &[f64], wx: &[f64], wh: &[f64], b: &[f64]) -> (Vec<f64>, LstmCache) {
    let (bn, t_n, f, h) = (g.batch, g.steps, g.features, g.units);
    let mut hs = vec![0.0; bn * t_n * h];
    let mut gates = vec![0.0; bn * t_n * 4 * h];
    let mut cells = vec![0.0; bn * t_n * h];
    let mut cells_tanh = vec![0.0; bn * t_n * h];
    let zero = vec![0.0; h];
    for bi in 0..bn {
        for t in 0..t_n {
            let bt = bi * t_n + t;
            let z = &mut gates[bt * 4 * h..(bt + 1) * 4 * h];
            z.copy_from_slice(b);
            vec_mat_acc(&x[bt * f..(bt + 1) * f], wx, z);
            if t > 0 {
                vec_mat_acc(&hs[(bt - 1) * h..bt * h], wh, z);
            }
            let (zi, rest) = z.split_at_mut(h);
            let (zf, rest) = rest.split_at_mut(h);
            let (zg, zo) = rest.split_at_mut(h);
            let c_prev = if t > 0 { &cells[(bt - 1) * h..bt * h] } else { &zero[..] };
            let mut c_new = vec![0.0; h];
            for j in 0..h {
                zi[j] = sigmoid(zi[j]);
                zf[j] = sigmoid(zf[j]);
                zg[j] = zg[j].tanh();
                zo[j] = sigmoid(zo[j]);
                c_new[j] = zf[j] * c_prev[j] + zi[j] * zg[j];
            }
            for j in 0..h {
                let tc = c_new[j].tanh();
                cells_tanh[bt * h + j] = tc;
                hs[bt * h + j] = zo[j] * tc;
            }
            cells[bt * h..(bt + 1) * h].copy_from_slice(&c_new);
        }
    }
    (
        hs,
        LstmCache {
            gates,
            cells,
            cells_tanh,
        },
    )
}

pub struct LstmGrads {
    pub dx: Option<Vec<f64>>,
    pub dwx: Vec<f64>,
    pub dwh: Vec<f64>,
    pub db: Vec<f64>,
}

/// Backpropagation through time. `hs` is the forward output.
#[allow(clippy::too_many_arguments)]
pub fn backward(
    g: &LstmGeom,
    cache: &LstmCache,
    hs: &[f64],
    x: &[f64],
    wx: &[f64],
    wh: &[f64],
    dy: &[f64],
    want_dx: bool,
) -> LstmGrads {
    let (bn, t_n, f, h) = (g.batch, g.steps, g.features, g.units);
    let mut dwx = vec![0.0; wx.len()];
    let mut dwh = vec![0.0; wh.len()];
    let mut db = vec![0.0; 4 * h];
    let mut dx = want_dx.then(|| vec![0.0; x.len()]);
    let mut dz = vec![0.0; 4 * h];
    for bi in 0..bn {
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..t_n).rev() {
            let bt = bi * t_n + t;
            let gt = &cache.gates[bt * 4 * h..(bt + 1) * 4 * h];
            let (gi, gf, gg, go) = (&gt[..h], &gt[h..2 * h], &gt[2 * h..3 * h], &gt[3 * h..]);
            let tc = &cache.cells_tanh[bt * h..(bt + 1) * h];
            for j in 0..h {
                let c_prev = if t > 0 { cache.cells[(bt - 1) * h + j] } else { 0.0 };
                let dh = dy[bt * h + j] + dh_next[j];
                let d_o = dh * tc[j];
                let dc = dh * go[j] * (1.0 - tc[j] * tc[j]) + dc_next[j];
                let di = dc * gg[j];
                let dg = dc * gi[j];
                let df = dc * c_prev;
                dc_next[j] = dc * gf[j];
                dz[j] = di * gi[j] * (1.0 - gi[j]);
                dz[h + j] = df * gf[j] * (1.0 - gf[j]);
                dz[2 * h + j] = dg * (1.0 - gg[j] * gg[j]);
                dz[3 * h + j] = d_o * go[j] * (1.0 - go[j]);
            }
            db.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
            outer_acc(&x[bt * f..(bt + 1) * f], &dz, &mut dwx);
            if let Some(dx) = dx.as_mut() {
                mat_vec_acc(wx, &dz, &mut dx[bt * f..(bt + 1) * f]);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            if t > 0 {
                outer_acc(&hs[(bt - 1) * h..bt * h], &dz, &mut dwh);
                mat_vec_acc(wh, &dz, &mut dh_next);
            }
        }
    }
    LstmGrads { dx, dwx, dwh, db }
}
