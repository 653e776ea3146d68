//! Fixed feature extractors for the perceptual loss term.

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{PadMode, ParamSet, Tape, Var};
use crate::error::{Error, Result};

/// A frozen feature pyramid: exposes activations at numbered layers.
///
/// Implementations must be deterministic, and activation shapes must depend
/// only on the input shape so per-layer normalizations are well defined.
pub trait FeatureExtractor {
    /// Activations for the requested layer ids, in request order.
    fn features(&self, tape: &mut Tape, x: Var, layers: &[usize]) -> Result<Vec<Var>>;

    /// Largest valid layer id.
    fn max_layer(&self) -> usize;
}

/// Stride and width of one convolution layer in [`ConvStackExtractor`].
#[derive(Debug, Clone, Copy)]
struct LayerSpec {
    cin: usize,
    cout: usize,
    stride: usize,
}

/// A fixed, seeded 16-layer convolution stack organized in three resolution
/// stages (full, half, quarter). Layer ids are 1-based convolution counts,
/// so the customary feature taps 2, 7, and 16 land on the last activation
/// of each stage. Weights are frozen at construction; the stack stands in
/// for a large pre-trained feature network while keeping runs hermetic,
/// and [`ConvStackExtractor::from_params`] accepts externally supplied
/// weights with the same layout.
pub struct ConvStackExtractor {
    params: ParamSet,
    specs: Vec<LayerSpec>,
}

fn stack_specs() -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(16);
    let mut push = |cin, cout, stride| specs.push(LayerSpec { cin, cout, stride });
    push(3, 8, 1); // layer 1
    push(8, 8, 1); // layer 2: end of stage 1
    push(8, 16, 2); // layer 3
    for _ in 4..=7 {
        push(16, 16, 1); // layers 4-7: stage 2
    }
    push(16, 24, 2); // layer 8
    for _ in 9..=16 {
        push(24, 24, 1); // layers 9-16: stage 3
    }
    specs
}

impl ConvStackExtractor {
    /// Builds the stack with seeded fan-in-scaled Gaussian weights.
    pub fn new(seed: u64) -> Self {
        let specs = stack_specs();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (i, spec) in specs.iter().enumerate() {
            let id = i + 1;
            let fan_in = spec.cin * 9;
            let std = 1.0 / (fan_in as f64).sqrt();
            let w = ArrayD::from_shape_fn(IxDyn(&[spec.cout, spec.cin, 3, 3]), |_| {
                std * rng.sample::<f64, _>(StandardNormal)
            });
            params.insert(format!("feat.l{id}.w"), w);
            params.insert(format!("feat.l{id}.b"), ArrayD::zeros(IxDyn(&[spec.cout])));
        }
        Self { params, specs }
    }

    /// Rebuilds the stack from externally supplied weights (for example a
    /// checkpoint holding distilled features). The parameter set must match
    /// the canonical 16-layer layout exactly.
    pub fn from_params(params: ParamSet) -> Result<Self> {
        let reference = Self::new(0);
        reference.params.compatible_with(&params)?;
        Ok(Self {
            params,
            specs: reference.specs,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }
}

impl FeatureExtractor for ConvStackExtractor {
    fn features(&self, tape: &mut Tape, x: Var, layers: &[usize]) -> Result<Vec<Var>> {
        for &id in layers {
            if id == 0 || id > self.specs.len() {
                return Err(Error::param(format!(
                    "unknown feature layer id {id}; valid ids are 1..={}",
                    self.specs.len()
                )));
            }
        }
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 3 || shape[0] != 3 {
            return Err(Error::dim(format!(
                "feature extractor expects a [3, h, w] input, got {shape:?}"
            )));
        }
        let deepest = layers.iter().copied().max().unwrap_or(0);
        let mut taps: Vec<Option<Var>> = vec![None; deepest + 1];
        let mut h = x;
        for (i, spec) in self.specs.iter().take(deepest).enumerate() {
            let id = i + 1;
            let w = tape.leaf(self.params.get(&format!("feat.l{id}.w"))?.clone(), false);
            let b = tape.leaf(self.params.get(&format!("feat.l{id}.b"))?.clone(), false);
            let conv = tape.conv2d(h, w, Some(b), spec.stride, 1, PadMode::Zeros);
            h = tape.silu(conv);
            taps[id] = Some(h);
        }
        Ok(layers
            .iter()
            .map(|&id| taps[id].expect("layer computed above"))
            .collect())
    }

    fn max_layer(&self) -> usize {
        self.specs.len()
    }
}
