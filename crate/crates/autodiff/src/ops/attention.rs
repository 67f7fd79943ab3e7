//! Additive attention pooling over time.
//!
//! For hidden states `h_t` (rows of `(B, T, H)`):
//! `u_t = tanh(h_t W + b)`, `e_t = u_t · v`, `α = softmax_t(e)`, `out = Σ α_t h_t`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttnGeom {
    pub batch: usize,
    pub steps: usize,
    pub hidden: usize,
    pub attn: usize,
}

#[derive(Debug, Clone)]
pub struct AttnCache {
    /// `tanh(h W + b)`, shape `(B, T, A)`.
    u: Vec<f64>,
    /// Attention weights, shape `(B, T)`.
    pub alpha: Vec<f64>,
}

pub fn forward(g: &AttnGeom, hs: &[f64], w: &[f64], b: &[f64], v: &[f64]) -> (Vec<f64>, AttnCache) {
    let (bn, tn, h, a) = (g.batch, g.steps, g.hidden, g.attn);
    let mut u = vec![0.0; bn * tn * a];
    let mut alpha = vec![0.0; bn * tn];
    let mut out = vec![0.0; bn * h];
    for bi in 0..bn {
        for t in 0..tn {
            let bt = bi * tn + t;
            let ut = &mut u[bt * a..(bt + 1) * a];
            ut.copy_from_slice(b);
            for (r, &hv) in hs[bt * h..(bt + 1) * h].iter().enumerate() {
                for (o, &wv) in ut.iter_mut().zip(&w[r * a..(r + 1) * a]) {
                    *o += hv * wv;
                }
            }
            ut.iter_mut().for_each(|x| *x = x.tanh());
            alpha[bt] = ut.iter().zip(v).map(|(x, y)| x * y).sum();
        }
        let scores = &mut alpha[bi * tn..(bi + 1) * tn];
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            total += *s;
        }
        scores.iter_mut().for_each(|s| *s /= total);
        let ob = &mut out[bi * h..(bi + 1) * h];
        for t in 0..tn {
            let at = scores[t];
            for (o, &hv) in ob.iter_mut().zip(&hs[(bi * tn + t) * h..(bi * tn + t + 1) * h]) {
                *o += at * hv;
            }
        }
    }
    (out, AttnCache { u, alpha })
}

pub struct AttnGrads {
    pub dh: Vec<f64>,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    pub dv: Vec<f64>,
}

pub fn backward(g: &AttnGeom, cache: &AttnCache, hs: &[f64], w: &[f64], v: &[f64], dy: &[f64]) -> AttnGrads {
    let (bn, tn, h, a) = (g.batch, g.steps, g.hidden, g.attn);
    let mut dh = vec![0.0; hs.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; a];
    let mut dv = vec![0.0; a];
    let mut dalpha = vec![0.0; tn];
    let mut dpre = vec![0.0; a];
    for bi in 0..bn {
        let dyb = &dy[bi * h..(bi + 1) * h];
        let alpha = &cache.alpha[bi * tn..(bi + 1) * tn];
        for t in 0..tn {
            let bt = bi * tn + t;
            let ht = &hs[bt * h..(bt + 1) * h];
            dalpha[t] = ht.iter().zip(dyb).map(|(x, y)| x * y).sum();
            for (d, &gy) in dh[bt * h..(bt + 1) * h].iter_mut().zip(dyb) {
                *d += alpha[t] * gy;
            }
        }
        let mean: f64 = alpha.iter().zip(&dalpha).map(|(x, y)| x * y).sum();
        for t in 0..tn {
            let bt = bi * tn + t;
            let de = alpha[t] * (dalpha[t] - mean);
            let ut = &cache.u[bt * a..(bt + 1) * a];
            for j in 0..a {
                dv[j] += de * ut[j];
                dpre[j] = de * v[j] * (1.0 - ut[j] * ut[j]);
                db[j] += dpre[j];
            }
            let ht = &hs[bt * h..(bt + 1) * h];
            let dht = &mut dh[bt * h..(bt + 1) * h];
            for r in 0..h {
                let wrow = &w[r * a..(r + 1) * a];
                let dwrow = &mut dw[r * a..(r + 1) * a];
                let mut s = 0.0;
                for j in 0..a {
                    dwrow[j] += ht[r] * dpre[j];
                    s += wrow[j] * dpre[j];
                }
                dht[r] += s;
            }
        }
    }
    AttnGrads { dh, dw, db, dv }
}
