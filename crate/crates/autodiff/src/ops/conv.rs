//! "Same"-padded 3D cross-correlation over channels-last volumes.
//!
//! Layout: input `(B, D1, D2, D3, Cin)`, weights `(K1, K2, K3, Cin, Cout)`,
//! output `(B, D1, D2, D3, Cout)`. Each kernel extent must be odd; the input is
//! zero padded by `(K - 1) / 2` on both sides of every spatial axis. Taps that
//! land in the padding are skipped rather than multiplied by zero.

use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub dims: [usize; 3],
    pub kernel: [usize; 3],
    pub cin: usize,
    pub cout: usize,
}

impl ConvGeom {
    pub fn infer(input: &[usize], weight: &[usize], bias: &[usize]) -> Result<Self> {
        if input.len() != 5 || weight.len() != 5 || bias.len() != 1 {
            return Err(shape_err(
                "conv3d",
                format!("input {input:?}, weight {weight:?}, bias {bias:?}"),
            ));
        }
        let kernel = [weight[0], weight[1], weight[2]];
        if kernel.iter().any(|&k| k == 0 || k % 2 == 0) {
            return Err(shape_err("conv3d", format!("kernel {kernel:?} must be odd")));
        }
        if weight[3] != input[4] || bias[0] != weight[4] {
            return Err(shape_err(
                "conv3d",
                format!("input {input:?}, weight {weight:?}, bias {bias:?}"),
            ));
        }
        Ok(Self {
            batch: input[0],
            dims: [input[1], input[2], input[3]],
            kernel,
            cin: input[4],
            cout: weight[4],
        })
    }

    pub fn output_shape(&self) -> Vec<usize> {
        vec![self.batch, self.dims[0], self.dims[1], self.dims[2], self.cout]
    }

    fn voxels(&self) -> usize {
        self.dims.iter().product()
    }

    /// Calls `f(out_voxel, in_voxel, tap)` for every in-bounds (output, tap) pair
    /// of one batch element, voxel indices being flat within the sample.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [d1, d2, d3] = self.dims;
        let [k1, k2, k3] = self.kernel;
        let (p1, p2, p3) = (k1 / 2, k2 / 2, k3 / 2);
        for o1 in 0..d1 {
            let t1_lo = p1.saturating_sub(o1);
            let t1_hi = k1.min(d1 + p1 - o1);
            for o2 in 0..d2 {
                let t2_lo = p2.saturating_sub(o2);
                let t2_hi = k2.min(d2 + p2 - o2);
                for o3 in 0..d3 {
                    let t3_lo = p3.saturating_sub(o3);
                    let t3_hi = k3.min(d3 + p3 - o3);
                    let out_v = (o1 * d2 + o2) * d3 + o3;
                    for t1 in t1_lo..t1_hi {
                        let i1 = o1 + t1 - p1;
                        for t2 in t2_lo..t2_hi {
                            let i2 = o2 + t2 - p2;
                            let row_in = (i1 * d2 + i2) * d3;
                            let row_tap = (t1 * k2 + t2) * k3;
                            for t3 in t3_lo..t3_hi {
                                let i3 = o3 + t3 - p3;
                                f(out_v, row_in + i3, row_tap + t3);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn forward(g: &ConvGeom, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let (cin, cout) = (g.cin, g.cout);
    let nv = g.voxels();
    let mut out = vec![0.0; g.batch * nv * cout];
    for bi in 0..g.batch {
        let xs = &x[bi * nv * cin..(bi + 1) * nv * cin];
        let os = &mut out[bi * nv * cout..(bi + 1) * nv * cout];
        for row in os.chunks_exact_mut(cout) {
            row.copy_from_slice(b);
        }
        g.for_each_tap(|ov, iv, tap| {
            let xin = &xs[iv * cin..(iv + 1) * cin];
            let orow = &mut os[ov * cout..(ov + 1) * cout];
            let wtap = &w[tap * cin * cout..(tap + 1) * cin * cout];
            for (ci, &xv) in xin.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &wtap[ci * cout..(ci + 1) * cout];
                for (o, &wv) in orow.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        });
    }
    out
}

/// Returns `(dx, dw, db)`; `dx` is skipped when `want_dx` is false.
pub fn backward(
    g: &ConvGeom,
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    want_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (cin, cout) = (g.cin, g.cout);
    let nv = g.voxels();
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; cout];
    let mut dx = want_dx.then(|| vec![0.0; x.len()]);

    for row in dy.chunks_exact(cout) {
        for (d, &v) in db.iter_mut().zip(row) {
            *d += v;
        }
    }
    for bi in 0..g.batch {
        let xs = &x[bi * nv * cin..(bi + 1) * nv * cin];
        let dys = &dy[bi * nv * cout..(bi + 1) * nv * cout];
        let mut dxs = dx.as_mut().map(|d| &mut d[bi * nv * cin..(bi + 1) * nv * cin]);
        g.for_each_tap(|ov, iv, tap| {
            let dyrow = &dys[ov * cout..(ov + 1) * cout];
            let base = tap * cin * cout;
            for ci in 0..cin {
                let xv = xs[iv * cin + ci];
                let off = base + ci * cout;
                if xv != 0.0 {
                    for (d, &gy) in dw[off..off + cout].iter_mut().zip(dyrow) {
                        *d += xv * gy;
                    }
                }
                if let Some(dxs) = dxs.as_deref_mut() {
                    let wrow = &w[off..off + cout];
                    let s: f64 = wrow.iter().zip(dyrow).map(|(a, b)| a * b).sum();
                    dxs[iv * cin + ci] += s;
                }
            }
        });
    }
    (dx, dw, db)
}
