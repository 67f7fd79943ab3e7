//! The 3D-CLMI network: a multi-scale 3D CNN branch and an LSTM + attention
//! branch running side by side, concatenated into a dense classifier head.
//!
//! ```text
//! volume (B,H,W,C) ─┬─ reshape (B,H,W,C,1) ─ [conv k∈{3,5,7} ‖ → BN → ReLU → pool]×S ─ flatten ─┐
//!                   └─ reshape (B,H·W,C) ── LSTM ── attention ── BN ─────────────────────────────┴─ concat ─ dropout ─ dense
//! ```
//!
//! Variants: `conv_dim = 2` treats the EEG channels as feature maps of an
//! `H×W` image (kernels `(k,k,1)`, pooling `(2,2,1)`); `topology = serial`
//! feeds the pooled CNN volume, read as a sequence of voxels, into the LSTM
//! and drops the concat.

use std::path::Path;

use clmi_autodiff::init::glorot_uniform;
use clmi_autodiff::{
    adam_step, checkpoint, AdamConfig, AutodiffError, BatchNormState, Graph, Mode, ParamId, ParamStore, Tensor, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model config: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Parallel,
    Serial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvStage {
    pub filters: usize,
    pub scales: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub conv_dim: u8,
    pub topology: Topology,
    pub conv_stages: Vec<ConvStage>,
    pub lstm_units: usize,
    /// Without attention the LSTM states are mean-pooled over time.
    pub attention: bool,
    pub dropout_p: f64,
    pub n_classes: usize,
    /// `(H, W, C)`.
    pub input_dims: [usize; 3],
    pub seed: u64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

fn stages(filters: &[usize]) -> Vec<ConvStage> {
    filters
        .iter()
        .map(|&filters| ConvStage {
            filters,
            scales: vec![3, 5, 7],
        })
        .collect()
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_dim: 3,
            topology: Topology::Parallel,
            conv_stages: stages(&[32, 64, 128, 128]),
            lstm_units: 256,
            attention: true,
            dropout_p: 0.3,
            n_classes: 4,
            input_dims: [30, 30, 22],
            seed: 0,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    /// Desk-scale profile: 10×10×8 input, two stages of 8 filters, 16 LSTM units.
    pub fn ci() -> Self {
        Self {
            conv_stages: stages(&[8, 8]),
            lstm_units: 16,
            input_dims: [10, 10, 8],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::BadConfig(m));
        if !matches!(self.conv_dim, 2 | 3) {
            return bad(format!("conv_dim {} must be 2 or 3", self.conv_dim));
        }
        if self.conv_stages.is_empty() {
            return bad("at least one conv stage is required".into());
        }
        for (i, s) in self.conv_stages.iter().enumerate() {
            if s.filters == 0 || s.scales.is_empty() || s.scales.iter().any(|&k| k == 0 || k % 2 == 0) {
                return bad(format!(
                    "stage {} needs filters > 0 and odd kernel scales, got {s:?}",
                    i + 1
                ));
            }
        }
        if self.lstm_units == 0 || self.n_classes < 2 {
            return bad("lstm_units must be positive and n_classes at least 2".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if self.input_dims.contains(&0) {
            return bad(format!("input_dims {:?} must be positive", self.input_dims));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || !(self.bn_eps > 0.0) {
            return bad("bn_momentum must be in [0, 1) and bn_eps positive".into());
        }
        Ok(())
    }

    fn pool(&self) -> [usize; 3] {
        if self.conv_dim == 3 {
            [2, 2, 2]
        } else {
            [2, 2, 1]
        }
    }

    fn kernel(&self, k: usize) -> [usize; 3] {
        if self.conv_dim == 3 {
            [k, k, k]
        } else {
            [k, k, 1]
        }
    }

    /// Spatial dims and channel count of the tensor entering the CNN branch.
    fn cnn_input(&self) -> ([usize; 3], usize) {
        let [h, w, c] = self.input_dims;
        if self.conv_dim == 3 {
            ([h, w, c], 1)
        } else {
            ([h, w, 1], c)
        }
    }

    /// Spatial dims after every stage's pooling, and the final feature depth.
    pub fn cnn_output(&self) -> ([usize; 3], usize) {
        let (mut dims, _) = self.cnn_input();
        let pool = self.pool();
        for _ in &self.conv_stages {
            for (d, p) in dims.iter_mut().zip(pool) {
                *d = d.div_ceil(p);
            }
        }
        let last = self.conv_stages.last().map_or(0, |s| s.filters * s.scales.len());
        (dims, last)
    }

    pub fn cnn_flat_width(&self) -> usize {
        let (dims, depth) = self.cnn_output();
        dims.iter().product::<usize>() * depth
    }

    /// Width of the feature vector entering the head: CNN flatten + LSTM units
    /// in parallel topology, LSTM units alone in serial.
    pub fn concat_width(&self) -> usize {
        match self.topology {
            Topology::Parallel => self.cnn_flat_width() + self.lstm_units,
            Topology::Serial => self.lstm_units,
        }
    }

    /// `(steps, features)` of the sequence entering the LSTM.
    pub fn lstm_input(&self) -> (usize, usize) {
        let [h, w, c] = self.input_dims;
        match self.topology {
            Topology::Parallel => (h * w, c),
            Topology::Serial => {
                let (dims, depth) = self.cnn_output();
                (dims.iter().product(), depth)
            }
        }
    }
}

/// The three ablation variants, full model last.
pub fn build_ablation_suite(base: &ModelConfig) -> Vec<(String, ModelConfig)> {
    vec![
        (
            "2D CNN | CNN-LSTM parallel".to_string(),
            ModelConfig {
                conv_dim: 2,
                topology: Topology::Parallel,
                ..base.clone()
            },
        ),
        (
            "3D CNN | CNN-LSTM serial".to_string(),
            ModelConfig {
                conv_dim: 3,
                topology: Topology::Serial,
                ..base.clone()
            },
        ),
        (
            "3D CNN | CNN-LSTM parallel".to_string(),
            ModelConfig {
                conv_dim: 3,
                topology: Topology::Parallel,
                ..base.clone()
            },
        ),
    ]
}

struct StageIds {
    convs: Vec<(ParamId, ParamId)>,
    gamma: ParamId,
    beta: ParamId,
}

struct Ids {
    stages: Vec<StageIds>,
    lstm: [ParamId; 3],
    attn: Option<[ParamId; 3]>,
    bn5: [ParamId; 2],
    head: [ParamId; 2],
}

/// One forward pass: values copied out of the graph.
#[derive(Debug, Clone)]
pub struct Pass {
    /// Pre-softmax scores `(B, n_classes)`.
    pub logits: Tensor,
    /// Post-concat, pre-dropout features `(B, concat_width)`.
    pub features: Tensor,
    /// Mean cross-entropy, when labels were given.
    pub loss: Option<f64>,
    /// `(layer, output shape)` in execution order.
    pub trace: Vec<(String, Vec<usize>)>,
}

pub struct Model {
    cfg: ModelConfig,
    params: ParamStore,
    /// One per conv stage, then the post-attention norm.
    bn: Vec<BatchNormState>,
    ids: Ids,
    adam: AdamConfig,
}

fn names(stage: usize) -> (String, String) {
    (format!("cnn.s{stage}.bn.gamma"), format!("cnn.s{stage}.bn.beta"))
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ParamStore::new();
        let mut bn = Vec::new();

        let (_, mut cin) = cfg.cnn_input();
        let mut stage_ids = Vec::new();
        for (s, stage) in cfg.conv_stages.iter().enumerate() {
            let s = s + 1;
            let mut convs = Vec::new();
            for &k in &stage.scales {
                let kern = cfg.kernel(k);
                let taps: usize = kern.iter().product();
                let w = glorot_uniform(
                    &[kern[0], kern[1], kern[2], cin, stage.filters],
                    taps * cin,
                    taps * stage.filters,
                    &mut rng,
                );
                let wid = params.add(format!("cnn.s{s}.k{k}.w"), w)?;
                let bid = params.add(format!("cnn.s{s}.k{k}.b"), Tensor::zeros(&[stage.filters]))?;
                convs.push((wid, bid));
            }
            let width = stage.filters * stage.scales.len();
            let (g, b) = names(s);
            let gamma = params.add(g, Tensor::full(&[width], 1.0))?;
            let beta = params.add(b, Tensor::zeros(&[width]))?;
            bn.push(BatchNormState::new(width, cfg.bn_momentum, cfg.bn_eps));
            stage_ids.push(StageIds { convs, gamma, beta });
            cin = width;
        }

        let h = cfg.lstm_units;
        let (_, feat) = cfg.lstm_input();
        let wx = params.add("lstm.wx", glorot_uniform(&[feat, 4 * h], feat, 4 * h, &mut rng))?;
        let wh = params.add("lstm.wh", glorot_uniform(&[h, 4 * h], h, 4 * h, &mut rng))?;
        // gate order i, f, g, o; forget gate starts open
        let lb = Tensor::from_fn(&[4 * h], |j| if (h..2 * h).contains(&j) { 1.0 } else { 0.0 });
        let lb = params.add("lstm.b", lb)?;

        let attn = if cfg.attention {
            Some([
                params.add("attn.w", glorot_uniform(&[h, h], h, h, &mut rng))?,
                params.add("attn.b", Tensor::zeros(&[h]))?,
                params.add("attn.v", glorot_uniform(&[h], h, 1, &mut rng))?,
            ])
        } else {
            None
        };
        let bn5 = [
            params.add("bn5.gamma", Tensor::full(&[h], 1.0))?,
            params.add("bn5.beta", Tensor::zeros(&[h]))?,
        ];
        bn.push(BatchNormState::new(h, cfg.bn_momentum, cfg.bn_eps));

        let cw = cfg.concat_width();
        let k = cfg.n_classes;
        let head = [
            params.add("head.w", glorot_uniform(&[cw, k], cw, k, &mut rng))?,
            params.add("head.b", Tensor::zeros(&[k]))?,
        ];

        Ok(Self {
            cfg,
            params,
            bn,
            ids: Ids {
                stages: stage_ids,
                lstm: [wx, wh, lb],
                attn,
                bn5,
                head,
            },
            adam: AdamConfig::default(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.numel()
    }

    pub fn batch_norm_states(&self) -> &[BatchNormState] {
        &self.bn
    }

    /// Parameter names grouped by the branch that owns them.
    pub fn is_cnn_param(name: &str) -> bool {
        name.starts_with("cnn.")
    }

    pub fn is_lstm_param(name: &str) -> bool {
        name.starts_with("lstm.") || name.starts_with("attn.") || name.starts_with("bn5.")
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let s = input.shape();
        if s.len() != 4 || s[1..] != self.cfg.input_dims || s[0] == 0 {
            return Err(ModelError::ShapeMismatch(format!(
                "batch {:?} does not match input dims {:?}",
                s, self.cfg.input_dims
            )));
        }
        Ok(s[0])
    }

    /// Forward pass over a `(B, H, W, C)` batch. Train mode updates the
    /// batch-norm running statistics and draws a dropout mask from `rng`.
    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut impl Rng) -> Result<Pass> {
        Ok(self.run(input, mode, None, rng)?.0)
    }

    /// Logits in infer mode.
    pub fn predict(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(input, Mode::Infer, &mut rng)?.logits)
    }

    /// Cross-entropy gradients of one batch, accumulated into the parameter
    /// store, without an optimizer step. Returns the pass.
    pub fn backward_batch(&mut self, input: &Tensor, labels: &[usize], rng: &mut impl Rng) -> Result<Pass> {
        let (pass, grads) = self.run(input, Mode::Train, Some(labels), rng)?;
        if let Some(g) = grads {
            self.params.zero_grads();
            g.apply_to(&mut self.params);
        }
        Ok(pass)
    }

    /// One Adam step on one batch; returns the train-mode pass (loss and
    /// logits from before the update).
    pub fn train_step(&mut self, input: &Tensor, labels: &[usize], lr: f64, rng: &mut impl Rng) -> Result<Pass> {
        let pass = self.backward_batch(input, labels, rng)?;
        adam_step(&mut self.params, lr, self.adam)?;
        Ok(pass)
    }

    fn run(
        &mut self,
        input: &Tensor,
        mode: Mode,
        labels: Option<&[usize]>,
        rng: &mut impl Rng,
    ) -> Result<(Pass, Option<clmi_autodiff::Gradients>)> {
        let batch = self.check_input(input)?;
        let cfg = &self.cfg;
        let ids = &self.ids;
        let bn = &mut self.bn;
        let mut g = Graph::with_params(&self.params);
        let mut trace: Vec<(String, Vec<usize>)> = Vec::new();
        macro_rules! rec {
            ($name:expr, $v:expr) => {{
                let v: Var = $v;
                trace.push(($name.to_string(), g.shape(v).to_vec()));
                v
            }};
        }
        let [h, w, c] = cfg.input_dims;
        let x = g.input(input.clone());

        // CNN branch
        let (dims, cin) = cfg.cnn_input();
        let mut cur = rec!("Input", g.reshape(x, &[batch, dims[0], dims[1], dims[2], cin])?);
        for (s, sid) in ids.stages.iter().enumerate() {
            let n = s + 1;
            let mut outs = Vec::new();
            for (j, &(wid, bid)) in sid.convs.iter().enumerate() {
                let (wv, bv) = (g.param(wid)?, g.param(bid)?);
                let suffix = (b'a' + j as u8) as char;
                outs.push(rec!(format!("Conv3d_{n}{suffix}"), g.conv3d(cur, wv, bv)?));
            }
            let merged = rec!(format!("Conv3d_{n}"), g.concat(&outs)?);
            let (gm, bt) = (g.param(sid.gamma)?, g.param(sid.beta)?);
            let normed = rec!(format!("BN Layer_{n}"), g.batch_norm(merged, gm, bt, &mut bn[s], mode)?);
            let act = g.relu(normed)?;
            cur = rec!(format!("MaxPooling_{n}"), g.maxpool3d(act, cfg.pool())?);
        }
        let pooled = cur;

        // LSTM branch
        let (steps, feat) = cfg.lstm_input();
        let seq = match cfg.topology {
            Topology::Parallel => {
                trace.push(("Input".into(), vec![batch, h, w, c, 1]));
                rec!("Reshape Layer", g.reshape(x, &[batch, steps, feat])?)
            }
            Topology::Serial => rec!("Reshape Layer", g.reshape(pooled, &[batch, steps, feat])?),
        };
        let [wx, wh, lb] = ids.lstm.map(|id| g.param(id));
        let hs = rec!("LSTM", g.lstm(seq, wx?, wh?, lb?)?);
        let units = cfg.lstm_units;
        let att = match ids.attn {
            Some(a) => {
                let [aw, ab, av] = a.map(|id| g.param(id));
                g.attention_pool(hs, aw?, ab?, av?)?
            }
            None => {
                // constant zero scores: uniform weights, i.e. the mean over time
                let aw = g.input(Tensor::zeros(&[units, 1]));
                let ab = g.input(Tensor::zeros(&[1]));
                let av = g.input(Tensor::zeros(&[1]));
                g.attention_pool(hs, aw, ab, av)?
            }
        };
        let att = rec!("Attention", att);
        let [gm, bt] = ids.bn5.map(|id| g.param(id));
        let last = bn.len() - 1;
        let lstm_out = rec!("BN Layer_5", g.batch_norm(att, gm?, bt?, &mut bn[last], mode)?);

        let features = match cfg.topology {
            Topology::Parallel => {
                let cnn_flat = rec!("Flatten Layer_1", g.flatten(pooled)?);
                let lstm_flat = rec!("Flatten Layer_2", g.flatten(lstm_out)?);
                rec!("Concatenate", g.concat(&[cnn_flat, lstm_flat])?)
            }
            Topology::Serial => rec!("Flatten Layer_2", g.flatten(lstm_out)?),
        };
        let dropped = rec!("Dropout", g.dropout(features, cfg.dropout_p, mode, rng)?);
        let [hw, hb] = ids.head.map(|id| g.param(id));
        let logits = rec!("Fully Connected Layer", g.dense(dropped, hw?, hb?)?);

        let logits_t = g.value(logits).clone();
        let features_t = g.value(features).clone();
        let (loss, grads) = match labels {
            Some(l) => {
                let loss = g.cross_entropy(logits, l)?;
                let value = g.value(loss).item();
                let grads = if mode == Mode::Train {
                    Some(g.backward(loss)?)
                } else {
                    None
                };
                (Some(value), grads)
            }
            None => (None, None),
        };
        Ok((
            Pass {
                logits: logits_t,
                features: features_t,
                loss,
                trace,
            },
            grads,
        ))
    }

    /// Parameters followed by batch-norm running statistics.
    pub fn checkpoint_entries(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> = self.params.iter().map(|p| (p.name.clone(), p.tensor.clone())).collect();
        for (i, st) in self.bn.iter().enumerate() {
            let n = st.running_mean.len();
            let mean = Tensor::new(&[n], st.running_mean.clone()).expect("length matches");
            let var = Tensor::new(&[n], st.running_var.clone()).expect("length matches");
            out.push((format!("bn_state.{i}.running_mean"), mean));
            out.push((format!("bn_state.{i}.running_var"), var));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(path, &self.checkpoint_entries())?;
        Ok(())
    }

    /// Builds `cfg` and overwrites every tensor from the checkpoint, which
    /// must list exactly the model's parameters and statistics.
    pub fn load(cfg: ModelConfig, path: impl AsRef<Path>) -> Result<Self> {
        let entries = checkpoint::load(path)?;
        let mut model = Model::new(cfg)?;
        model.load_entries(entries)?;
        Ok(model)
    }

    pub fn load_entries(&mut self, entries: Vec<(String, Tensor)>) -> Result<()> {
        let expected = self.params.len() + 2 * self.bn.len();
        if entries.len() != expected {
            return Err(ModelError::Checkpoint(format!(
                "{} entries, model has {expected}",
                entries.len()
            )));
        }
        for (name, t) in entries {
            if let Some(rest) = name.strip_prefix("bn_state.") {
                let (idx, field) = rest
                    .split_once('.')
                    .ok_or_else(|| ModelError::Checkpoint(format!("bad entry {name}")))?;
                let st = idx
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| self.bn.get_mut(i))
                    .ok_or_else(|| ModelError::Checkpoint(format!("bad entry {name}")))?;
                let slot = match field {
                    "running_mean" => &mut st.running_mean,
                    "running_var" => &mut st.running_var,
                    _ => return Err(ModelError::Checkpoint(format!("bad entry {name}"))),
                };
                if t.shape() != [slot.len()] {
                    return Err(ModelError::Checkpoint(format!("{name}: shape {:?}", t.shape())));
                }
                *slot = t.into_data();
            } else {
                self.params.load(&name, t)?;
            }
        }
        Ok(())
    }
}

/// Packs equally sized `(H, W, C)` volumes into one `(B, H, W, C)` tensor.
pub fn stack_volumes(volumes: &[&crate::preprocess::Volume3D]) -> Result<Tensor> {
    let first = volumes
        .first()
        .ok_or_else(|| ModelError::ShapeMismatch("empty batch".into()))?;
    let (h, w, c) = first.dims();
    let mut data = Vec::with_capacity(volumes.len() * h * w * c);
    for v in volumes {
        if v.dims() != (h, w, c) {
            return Err(ModelError::ShapeMismatch(format!("{:?} vs {:?}", v.dims(), (h, w, c))));
        }
        data.extend_from_slice(v.data());
    }
    Ok(Tensor::new(&[volumes.len(), h, w, c], data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(cfg: &ModelConfig, b: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [h, w, c] = cfg.input_dims;
        Tensor::from_fn(&[b, h, w, c], |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn widths() {
        let d = ModelConfig::default();
        assert_eq!(d.cnn_flat_width(), 3072);
        assert_eq!(d.concat_width(), 3328);
        let ci = ModelConfig::ci();
        // 10 -> 5 -> 3, 8 -> 4 -> 2, 24 features
        assert_eq!(ci.cnn_output(), ([3, 3, 2], 24));
        assert_eq!(ci.concat_width(), 18 * 24 + 16);
    }

    #[test]
    fn bad_configs() {
        for cfg in [
            ModelConfig {
                conv_dim: 1,
                ..ModelConfig::ci()
            },
            ModelConfig {
                dropout_p: 1.0,
                ..ModelConfig::ci()
            },
            ModelConfig {
                conv_stages: vec![],
                ..ModelConfig::ci()
            },
            ModelConfig {
                conv_stages: stages(&[4])
                    .into_iter()
                    .map(|s| ConvStage { scales: vec![4], ..s })
                    .collect(),
                ..ModelConfig::ci()
            },
        ] {
            assert!(matches!(Model::new(cfg), Err(ModelError::BadConfig(_))));
        }
    }

    #[test]
    fn softmax_rows_and_infer_determinism() {
        let cfg = ModelConfig::ci();
        let mut m = Model::new(cfg.clone()).unwrap();
        let x = random_batch(&cfg, 3, 1);
        let a = m.predict(&x).unwrap();
        let b = m.predict(&x).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), &[3, 4]);
        for row in a.data().chunks(4) {
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            let s: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let p: f64 = row.iter().map(|v| (v - max).exp() / s).sum();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_input() {
        let mut m = Model::new(ModelConfig::ci()).unwrap();
        let x = Tensor::zeros(&[1, 10, 10, 7]);
        assert!(matches!(m.predict(&x), Err(ModelError::ShapeMismatch(_))));
    }

    #[test]
    fn ablation_suite_shape() {
        let base = ModelConfig::default();
        let s = build_ablation_suite(&base);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].1.conv_dim, s[0].1.topology), (2, Topology::Parallel));
        assert_eq!((s[1].1.conv_dim, s[1].1.topology), (3, Topology::Serial));
        assert_eq!(s[2].1, base);
        assert_eq!(s[0].0, "2D CNN | CNN-LSTM parallel");
        assert_eq!(s[1].0, "3D CNN | CNN-LSTM serial");
        assert_eq!(s[2].0, "3D CNN | CNN-LSTM parallel");
    }
}
