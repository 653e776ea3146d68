//! Network configuration, parameter initialization, and the forward graph.

use std::collections::HashMap;

use ndarray::{Array3, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{PadMode, ParamSet, Tape, Var};
use crate::error::{Error, Result};

use super::attention::attention_on_tape;
use super::embed::timestep_embedding;

/// Architecture hyperparameters.
///
/// `input_size` fixes the nominal square input resolution; together with
/// `channel_multipliers` it determines the resolution ladder
/// `input_size / 2^level`, which `attention_resolutions` entries must match.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserConfig {
    /// Trunk width at full resolution.
    pub base_channels: usize,
    /// Per-level width multipliers; the number of entries is the number of
    /// resolution levels.
    pub channel_multipliers: Vec<usize>,
    /// Residual blocks per level in both encoder and decoder.
    pub num_res_blocks: usize,
    /// Spatial resolutions at which self/cross-attention runs.
    pub attention_resolutions: Vec<usize>,
    /// Attend to conditioning features at every attended resolution.
    pub use_cross_attention: bool,
    /// Residual dense blocks instead of plain double-conv blocks.
    pub use_rdb: bool,
    /// Concatenate all same-resolution encoder features in the decoder
    /// instead of only the mirror feature.
    pub dense_skips: bool,
    /// Concatenate the conditioning image onto the network input (the
    /// conventional conditioning pathway; used by the ablation baseline).
    pub concat_condition: bool,
    /// Convolution layers inside each RDB.
    pub rdb_layers: usize,
    /// Channels added by each RDB layer.
    pub rdb_growth: usize,
    /// Width of the timestep embedding and its MLP.
    pub time_embed_dim: usize,
    /// Attention heads; must divide the channel count at attended levels.
    pub head_count: usize,
    /// Nominal square input resolution.
    pub input_size: usize,
    /// Group count for group normalization; must divide every level width.
    pub groups: usize,
    /// Boundary handling for all convolutions.
    pub pad_mode: PadMode,
}

impl DenoiserConfig {
    /// Small configuration for tests and CPU experiments: 32x32 inputs,
    /// three levels (32/16/8), attention at 16 and 8.
    pub fn desk() -> Self {
        Self {
            base_channels: 16,
            channel_multipliers: vec![1, 2, 4],
            num_res_blocks: 2,
            attention_resolutions: vec![16, 8],
            use_cross_attention: true,
            use_rdb: true,
            dense_skips: true,
            concat_condition: false,
            rdb_layers: 2,
            rdb_growth: 8,
            time_embed_dim: 64,
            head_count: 1,
            input_size: 32,
            groups: 8,
            pad_mode: PadMode::Zeros,
        }
    }

    /// Full-scale configuration: 256x256 inputs, five levels
    /// (256/128/64/32/16), attention at 32 and 16.
    pub fn paper() -> Self {
        Self {
            base_channels: 64,
            channel_multipliers: vec![1, 2, 4, 8, 16],
            num_res_blocks: 3,
            attention_resolutions: vec![32, 16],
            use_cross_attention: true,
            use_rdb: true,
            dense_skips: true,
            concat_condition: false,
            rdb_layers: 4,
            rdb_growth: 32,
            time_embed_dim: 256,
            head_count: 4,
            input_size: 256,
            groups: 8,
            pad_mode: PadMode::Zeros,
        }
    }

    /// Conventional U-Net baseline at desk scale: no RDBs, mirror-only
    /// skips, no attention, conditioning by input concatenation.
    pub fn desk_baseline() -> Self {
        Self {
            use_rdb: false,
            dense_skips: false,
            attention_resolutions: vec![],
            use_cross_attention: false,
            concat_condition: true,
            ..Self::desk()
        }
    }

    /// Number of resolution levels.
    pub fn levels(&self) -> usize {
        self.channel_multipliers.len()
    }

    /// Channel width at `level`.
    pub fn channels_at(&self, level: usize) -> usize {
        self.base_channels * self.channel_multipliers[level]
    }

    /// Spatial resolution at `level`.
    pub fn resolution_at(&self, level: usize) -> usize {
        self.input_size >> level
    }

    /// Whether attention runs at `level`.
    pub fn attends(&self, level: usize) -> bool {
        self.attention_resolutions
            .contains(&self.resolution_at(level))
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 {
            return Err(Error::param("base_channels must be positive".to_string()));
        }
        if self.channel_multipliers.is_empty() {
            return Err(Error::param("need at least one channel multiplier".to_string()));
        }
        if self.channel_multipliers.iter().any(|&m| m == 0) {
            return Err(Error::param("channel multipliers must be positive".to_string()));
        }
        if self.num_res_blocks == 0 {
            return Err(Error::param("num_res_blocks must be positive".to_string()));
        }
        let levels = self.levels();
        let factor = 1usize << (levels - 1);
        if self.input_size == 0 || self.input_size % factor != 0 {
            return Err(Error::param(format!(
                "input size {} must be divisible by 2^(levels-1) = {factor}",
                self.input_size
            )));
        }
        if self.resolution_at(levels - 1) < 2 {
            return Err(Error::param(format!(
                "bottom resolution {} is too small",
                self.resolution_at(levels - 1)
            )));
        }
        let ladder: Vec<usize> = (0..levels).map(|l| self.resolution_at(l)).collect();
        for r in &self.attention_resolutions {
            if !ladder.contains(r) {
                return Err(Error::param(format!(
                    "attention resolution {r} not in ladder {ladder:?}"
                )));
            }
        }
        if self.groups == 0 {
            return Err(Error::param("groups must be positive".to_string()));
        }
        for l in 0..levels {
            let ch = self.channels_at(l);
            if ch % self.groups != 0 {
                return Err(Error::param(format!(
                    "level {l} width {ch} not divisible by {} norm groups",
                    self.groups
                )));
            }
            if self.attends(l) && ch % self.head_count.max(1) != 0 {
                return Err(Error::param(format!(
                    "level {l} width {ch} not divisible by {} heads",
                    self.head_count
                )));
            }
        }
        if self.head_count == 0 {
            return Err(Error::param("head_count must be positive".to_string()));
        }
        if self.time_embed_dim < 4 || self.time_embed_dim % 2 != 0 {
            return Err(Error::param(format!(
                "time_embed_dim must be even and >= 4, got {}",
                self.time_embed_dim
            )));
        }
        if self.use_rdb && (self.rdb_layers == 0 || self.rdb_growth == 0) {
            return Err(Error::param(
                "rdb_layers and rdb_growth must be positive when RDBs are enabled".to_string(),
            ));
        }
        Ok(())
    }
}

struct Init {
    rng: ChaCha20Rng,
    params: ParamSet,
}

impl Init {
    fn normal(&mut self, name: &str, shape: &[usize], std: f64) {
        let rng = &mut self.rng;
        let arr = ArrayD::from_shape_fn(IxDyn(shape), |_| {
            std * rng.sample::<f64, _>(StandardNormal)
        });
        self.params.insert(name, arr);
    }

    /// Normal scaled by 1/sqrt(fan_in); the usual choice for conv/linear
    /// weights feeding nonlinearities.
    fn fan_in(&mut self, name: &str, shape: &[usize], fan_in: usize) {
        self.normal(name, shape, 1.0 / (fan_in as f64).sqrt());
    }

    /// Truncated normal (resample outside 2 std): attention projections.
    fn trunc(&mut self, name: &str, shape: &[usize], std: f64) {
        let rng = &mut self.rng;
        let arr = ArrayD::from_shape_fn(IxDyn(shape), |_| loop {
            let v: f64 = rng.sample::<f64, _>(StandardNormal);
            if v.abs() <= 2.0 {
                break std * v;
            }
        });
        self.params.insert(name, arr);
    }

    fn zeros(&mut self, name: &str, shape: &[usize]) {
        self.params.insert(name, ArrayD::zeros(IxDyn(shape)));
    }

    fn ones(&mut self, name: &str, shape: &[usize]) {
        self.params.insert(name, ArrayD::from_elem(IxDyn(shape), 1.0));
    }

    fn conv(&mut self, prefix: &str, cout: usize, cin: usize, k: usize) {
        self.fan_in(&format!("{prefix}.w"), &[cout, cin, k, k], cin * k * k);
        self.zeros(&format!("{prefix}.b"), &[cout]);
    }

    fn conv_zero(&mut self, prefix: &str, cout: usize, cin: usize, k: usize) {
        self.zeros(&format!("{prefix}.w"), &[cout, cin, k, k]);
        self.zeros(&format!("{prefix}.b"), &[cout]);
    }

    fn norm(&mut self, prefix: &str, ch: usize) {
        self.ones(&format!("{prefix}.gain"), &[ch]);
        self.zeros(&format!("{prefix}.bias"), &[ch]);
    }
}

/// Conditional noise-prediction network: configuration plus parameters.
pub struct Denoiser {
    config: DenoiserConfig,
    params: ParamSet,
}

/// Tape handles for every parameter, produced by [`Denoiser::bind`].
pub struct BoundParams {
    vars: HashMap<String, Var>,
}

impl BoundParams {
    fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name:?} missing from bound set"))
    }

    /// Tape handles in parameter-set order.
    pub fn ordered(&self, params: &ParamSet) -> Vec<Var> {
        (0..params.len())
            .map(|i| self.var(params.name_at(i)))
            .collect()
    }
}

impl Denoiser {
    /// Initializes a network with seeded random weights.
    pub fn new(config: DenoiserConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Init {
            rng: ChaCha20Rng::seed_from_u64(seed),
            params: ParamSet::new(),
        };
        build_params(&config, &mut init);
        Ok(Self {
            config,
            params: init.params,
        })
    }

    /// Reassembles a network from existing parameters (for example after
    /// loading a checkpoint). The parameter set must match the architecture
    /// exactly.
    pub fn from_parts(config: DenoiserConfig, params: ParamSet) -> Result<Self> {
        let fresh = Self::new(config.clone(), 0)?;
        fresh.params.compatible_with(&params)?;
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.params.element_count()
    }

    /// Registers every parameter on `tape`; with `trainable` set the
    /// subsequent backward pass accumulates gradients for all of them.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let mut vars = HashMap::with_capacity(self.params.len());
        for (name, value) in self.params.iter() {
            vars.insert(name.to_string(), tape.leaf(value.clone(), trainable));
        }
        BoundParams { vars }
    }

    /// Builds the noise-prediction graph for one input. `x_t` and `y` must
    /// be `[3, s, s]` with `s = config.input_size`; `t` is the 1-based
    /// timestep.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        x_t: &Array3<f64>,
        y: &Array3<f64>,
        t: usize,
    ) -> Result<Var> {
        let s = self.config.input_size;
        if x_t.dim() != (3, s, s) || y.dim() != (3, s, s) {
            return Err(Error::dim(format!(
                "denoiser expects [3, {s}, {s}] inputs, got {:?} and {:?}",
                x_t.dim(),
                y.dim()
            )));
        }
        let x_var = tape.constant(x_t.clone().into_dyn());
        let y_var = tape.constant(y.clone().into_dyn());
        self.forward_vars(tape, bound, x_var, y_var, t)
    }

    /// Forward pass on nodes already present on the tape (used when the
    /// input itself needs gradients, e.g. in gradient checks).
    pub fn forward_vars(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        x_t: Var,
        y: Var,
        t: usize,
    ) -> Result<Var> {
        let cfg = &self.config;
        let emb = timestep_embedding(t, cfg.time_embed_dim)?;
        let mut b = Builder { tape, bound, cfg };
        Ok(b.forward(x_t, y, emb))
    }

    /// Convenience inference: predicts the noise component for one input
    /// without tracking gradients.
    pub fn denoise(&self, x_t: &Array3<f64>, y: &Array3<f64>, t: usize) -> Result<Array3<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let out = self.forward(&mut tape, &bound, x_t, y, t)?;
        Ok(tape
            .value(out)
            .clone()
            .into_dimensionality::<ndarray::Ix3>()
            .expect("rank-3 network output"))
    }
}

/// Registers all parameters in a fixed order mirroring the forward pass.
fn build_params(cfg: &DenoiserConfig, init: &mut Init) {
    let levels = cfg.levels();
    let d = cfg.time_embed_dim;
    let cin = if cfg.concat_condition { 6 } else { 3 };

    init.conv("stem", cfg.channels_at(0), cin, 3);

    init.fan_in("temb.w1", &[d, d], d);
    init.zeros("temb.b1", &[d]);
    init.fan_in("temb.w2", &[d, d], d);
    init.zeros("temb.b2", &[d]);

    if cfg.use_cross_attention {
        for l in 0..levels {
            let cin = if l == 0 { 3 } else { cfg.channels_at(l - 1) };
            init.conv(&format!("yenc.{l}"), cfg.channels_at(l), cin, 3);
        }
    }

    let block = |init: &mut Init, prefix: &str, ch: usize| {
        init.norm(&format!("{prefix}.norm1"), ch);
        init.zeros(&format!("{prefix}.temb.ws"), &[d, ch]);
        init.zeros(&format!("{prefix}.temb.bs"), &[ch]);
        init.zeros(&format!("{prefix}.temb.wb"), &[d, ch]);
        init.zeros(&format!("{prefix}.temb.bb"), &[ch]);
        if cfg.use_rdb {
            for i in 0..cfg.rdb_layers {
                let cin = ch + i * cfg.rdb_growth;
                init.conv(&format!("{prefix}.rdb{i}"), cfg.rdb_growth, cin, 3);
            }
            let cat = ch + cfg.rdb_layers * cfg.rdb_growth;
            init.conv_zero(&format!("{prefix}.proj"), ch, cat, 1);
        } else {
            init.conv(&format!("{prefix}.conv1"), ch, ch, 3);
            init.conv_zero(&format!("{prefix}.conv2"), ch, ch, 3);
        }
    };

    let attn = |init: &mut Init, prefix: &str, ch: usize| {
        init.norm(&format!("{prefix}.attn.norm"), ch);
        init.trunc(&format!("{prefix}.attn.wq"), &[ch, ch], 0.02);
        init.trunc(&format!("{prefix}.attn.wk"), &[ch, ch], 0.02);
        init.trunc(&format!("{prefix}.attn.wv"), &[ch, ch], 0.02);
        init.zeros(&format!("{prefix}.attn.wo"), &[ch, ch]);
        if cfg.use_cross_attention {
            init.norm(&format!("{prefix}.xattn.normq"), ch);
            init.norm(&format!("{prefix}.xattn.normy"), ch);
            init.trunc(&format!("{prefix}.xattn.wq"), &[ch, ch], 0.02);
            init.trunc(&format!("{prefix}.xattn.wk"), &[ch, ch], 0.02);
            init.trunc(&format!("{prefix}.xattn.wv"), &[ch, ch], 0.02);
            init.zeros(&format!("{prefix}.xattn.wo"), &[ch, ch]);
        }
    };

    for l in 0..levels {
        let ch = cfg.channels_at(l);
        if l > 0 {
            init.conv(&format!("enc{l}.down"), ch, cfg.channels_at(l - 1), 3);
        }
        for bi in 0..cfg.num_res_blocks {
            block(init, &format!("enc{l}.block{bi}"), ch);
        }
        if cfg.attends(l) {
            attn(init, &format!("enc{l}"), ch);
        }
    }

    let bottom = cfg.channels_at(levels - 1);
    block(init, "mid.block0", bottom);
    if cfg.attends(levels - 1) {
        attn(init, "mid", bottom);
    }
    block(init, "mid.block1", bottom);

    for l in (0..levels).rev() {
        let ch = cfg.channels_at(l);
        if l < levels - 1 {
            init.conv(&format!("dec{l}.up"), ch, cfg.channels_at(l + 1), 3);
        }
        let skips = if cfg.dense_skips {
            // Level entry plus every block output, plus the attention output
            // where attention ran.
            1 + cfg.num_res_blocks + usize::from(cfg.attends(l))
        } else {
            1
        };
        init.conv(&format!("dec{l}.fuse"), ch, ch * (1 + skips), 1);
        for bi in 0..cfg.num_res_blocks {
            block(init, &format!("dec{l}.block{bi}"), ch);
        }
        if cfg.attends(l) {
            attn(init, &format!("dec{l}"), ch);
        }
    }

    init.norm("out.norm", cfg.channels_at(0));
    init.conv_zero("out.conv", 3, cfg.channels_at(0), 3);
}

struct Builder<'a, 't> {
    tape: &'t mut Tape,
    bound: &'a BoundParams,
    cfg: &'a DenoiserConfig,
}

impl Builder<'_, '_> {
    fn p(&self, name: &str) -> Var {
        self.bound.var(name)
    }

    fn conv(&mut self, prefix: &str, x: Var, stride: usize, k: usize) -> Var {
        let w = self.p(&format!("{prefix}.w"));
        let b = self.p(&format!("{prefix}.b"));
        let pad = (k - 1) / 2;
        self.tape.conv2d(x, w, Some(b), stride, pad, self.cfg.pad_mode)
    }

    fn norm(&mut self, prefix: &str, x: Var) -> Var {
        let gain = self.p(&format!("{prefix}.gain"));
        let bias = self.p(&format!("{prefix}.bias"));
        self.tape.group_norm(x, gain, bias, self.cfg.groups, 1e-6)
    }

    /// `[c, h, w]` -> `[h * w, c]` position matrix.
    fn flatten(&mut self, x: Var) -> (Var, usize, usize, usize) {
        let shape = self.tape.value(x).shape().to_vec();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let flat = self.tape.reshape(x, &[c, h * w]);
        (self.tape.transpose2(flat), c, h, w)
    }

    fn unflatten(&mut self, x: Var, c: usize, h: usize, w: usize) -> Var {
        let t = self.tape.transpose2(x);
        self.tape.reshape(t, &[c, h, w])
    }

    fn resblock(&mut self, prefix: &str, h: Var, temb: Var) -> Var {
        let n1 = self.norm(&format!("{prefix}.norm1"), h);
        let ws = self.p(&format!("{prefix}.temb.ws"));
        let bs = self.p(&format!("{prefix}.temb.bs"));
        let wb = self.p(&format!("{prefix}.temb.wb"));
        let bb = self.p(&format!("{prefix}.temb.bb"));
        let scale = self.tape.linear_vec(temb, ws, bs);
        let shift = self.tape.linear_vec(temb, wb, bb);
        let modulated = self.tape.channel_affine(n1, scale, shift);
        let a = self.tape.silu(modulated);
        let out = if self.cfg.use_rdb {
            let mut feats = vec![a];
            for i in 0..self.cfg.rdb_layers {
                let cat = if feats.len() == 1 {
                    feats[0]
                } else {
                    self.tape.concat_channels(&feats)
                };
                let g = self.conv(&format!("{prefix}.rdb{i}"), cat, 1, 3);
                feats.push(self.tape.silu(g));
            }
            let cat = self.tape.concat_channels(&feats);
            self.conv(&format!("{prefix}.proj"), cat, 1, 1)
        } else {
            let c1 = self.conv(&format!("{prefix}.conv1"), a, 1, 3);
            let c1 = self.tape.silu(c1);
            self.conv(&format!("{prefix}.conv2"), c1, 1, 3)
        };
        self.tape.add(h, out)
    }

    fn self_attention(&mut self, prefix: &str, h: Var) -> Var {
        let n = self.norm(&format!("{prefix}.attn.norm"), h);
        let (flat, c, hh, ww) = self.flatten(n);
        let out = attention_on_tape(
            self.tape,
            flat,
            flat,
            self.p(&format!("{prefix}.attn.wq")),
            self.p(&format!("{prefix}.attn.wk")),
            self.p(&format!("{prefix}.attn.wv")),
            self.p(&format!("{prefix}.attn.wo")),
            self.cfg.head_count,
        );
        let back = self.unflatten(out, c, hh, ww);
        self.tape.add(h, back)
    }

    fn cross_attention(&mut self, prefix: &str, h: Var, y_feat: Var) -> Var {
        let nq = self.norm(&format!("{prefix}.xattn.normq"), h);
        let ny = self.norm(&format!("{prefix}.xattn.normy"), y_feat);
        let (qflat, c, hh, ww) = self.flatten(nq);
        let (yflat, _, _, _) = self.flatten(ny);
        let out = attention_on_tape(
            self.tape,
            qflat,
            yflat,
            self.p(&format!("{prefix}.xattn.wq")),
            self.p(&format!("{prefix}.xattn.wk")),
            self.p(&format!("{prefix}.xattn.wv")),
            self.p(&format!("{prefix}.xattn.wo")),
            self.cfg.head_count,
        );
        let back = self.unflatten(out, c, hh, ww);
        self.tape.add(h, back)
    }

    fn attention_pair(&mut self, prefix: &str, h: Var, y_feats: &[Var], level: usize) -> Var {
        let mut h = self.self_attention(prefix, h);
        if self.cfg.use_cross_attention {
            h = self.cross_attention(prefix, h, y_feats[level]);
        }
        h
    }

    fn forward(&mut self, x_t: Var, y: Var, emb: ndarray::Array1<f64>) -> Var {
        let cfg = self.cfg;
        let levels = cfg.levels();

        // Timestep embedding MLP.
        let e = self.tape.constant(emb.into_dyn());
        let w1 = self.p("temb.w1");
        let b1 = self.p("temb.b1");
        let w2 = self.p("temb.w2");
        let b2 = self.p("temb.b2");
        let h1 = self.tape.linear_vec(e, w1, b1);
        let h1 = self.tape.silu(h1);
        let temb = self.tape.linear_vec(h1, w2, b2);

        // Conditioning pyramid.
        let mut y_feats = Vec::new();
        if cfg.use_cross_attention {
            let mut yf = y;
            for l in 0..levels {
                let stride = if l == 0 { 1 } else { 2 };
                yf = self.conv(&format!("yenc.{l}"), yf, stride, 3);
                yf = self.tape.silu(yf);
                y_feats.push(yf);
            }
        }

        // Encoder.
        let stem_in = if cfg.concat_condition {
            self.tape.concat_channels(&[x_t, y])
        } else {
            x_t
        };
        let mut h = self.conv("stem", stem_in, 1, 3);
        let mut enc_feats: Vec<Vec<Var>> = Vec::with_capacity(levels);
        for l in 0..levels {
            if l > 0 {
                h = self.conv(&format!("enc{l}.down"), h, 2, 3);
            }
            let mut feats = vec![h];
            for bi in 0..cfg.num_res_blocks {
                h = self.resblock(&format!("enc{l}.block{bi}"), h, temb);
                feats.push(h);
            }
            if cfg.attends(l) {
                h = self.attention_pair(&format!("enc{l}"), h, &y_feats, l);
                feats.push(h);
            }
            enc_feats.push(feats);
        }

        // Middle.
        h = self.resblock("mid.block0", h, temb);
        if cfg.attends(levels - 1) {
            h = self.attention_pair("mid", h, &y_feats, levels - 1);
        }
        h = self.resblock("mid.block1", h, temb);

        // Decoder.
        for l in (0..levels).rev() {
            if l < levels - 1 {
                let up = self.tape.upsample_nearest2(h);
                h = self.conv(&format!("dec{l}.up"), up, 1, 3);
            }
            let mut cat = vec![h];
            if cfg.dense_skips {
                cat.extend(enc_feats[l].iter().copied());
            } else {
                cat.push(*enc_feats[l].last().expect("nonempty level features"));
            }
            let joined = self.tape.concat_channels(&cat);
            h = self.conv(&format!("dec{l}.fuse"), joined, 1, 1);
            for bi in 0..cfg.num_res_blocks {
                h = self.resblock(&format!("dec{l}.block{bi}"), h, temb);
            }
            if cfg.attends(l) {
                h = self.attention_pair(&format!("dec{l}"), h, &y_feats, l);
            }
        }

        // Output head.
        let n = self.norm("out.norm", h);
        let act = self.tape.silu(n);
        self.conv("out.conv", act, 1, 3)
    }
}
