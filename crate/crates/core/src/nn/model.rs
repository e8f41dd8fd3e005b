use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::tape::{GradientTape, TapeEntry};
use super::{
    Activation, GruLayer, Linear, ModelRng, NormKind, S4dBlock, S4dBlockStream, SequenceTensor,
};
use crate::error::{invalid, Error, Result};
use crate::ssm::Discretization;
use crate::Scalar;

/// Model families: the S4D network and the three baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    S4d,
    Gru,
    MlpShallow,
    MlpDeep,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::S4d,
        ModelKind::Gru,
        ModelKind::MlpShallow,
        ModelKind::MlpDeep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::S4d => "s4d",
            ModelKind::Gru => "gru",
            ModelKind::MlpShallow => "mlp_shallow",
            ModelKind::MlpDeep => "mlp_deep",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown model kind {s:?}; valid kinds: s4d, gru, mlp_shallow, mlp_deep"
                ))
            })
    }
}

/// Architecture hyperparameters shared by all model kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub hidden_dim: usize,
    pub out_channels: usize,
    pub n_blocks: usize,
    /// State dimension N per SSM (stored as N/2 conjugate-pair modes).
    pub n_state: usize,
    pub dropout: f64,
    pub norm_kind: NormKind,
    pub discretization: Discretization,
    pub seed: u64,
    pub feedthrough: bool,
    pub activation: Activation,
    pub shared_a: bool,
    pub dt_min: f64,
    pub dt_max: f64,
    pub gru_layers: usize,
    /// Hidden layers of the MLP baselines (the shallow variant always uses 1).
    pub mlp_depth: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 130,
            hidden_dim: 256,
            out_channels: 70,
            n_blocks: 1,
            n_state: 64,
            dropout: 0.0,
            norm_kind: NormKind::BatchOverTime,
            discretization: Discretization::Zoh,
            seed: 0,
            feedthrough: true,
            activation: Activation::Gelu,
            shared_a: false,
            dt_min: 1e-2,
            dt_max: 1.0,
            gru_layers: 1,
            mlp_depth: 3,
        }
    }
}

impl ModelConfig {
    /// Returns every violated invariant, or `Ok` when the config is usable.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.in_channels == 0 {
            problems.push("in_channels must be >= 1".to_string());
        }
        if self.hidden_dim == 0 {
            problems.push("hidden_dim must be >= 1".to_string());
        }
        if self.out_channels == 0 {
            problems.push("out_channels must be >= 1".to_string());
        }
        if !(1..=6).contains(&self.n_blocks) {
            problems.push(format!("n_blocks must be in [1, 6], got {}", self.n_blocks));
        }
        if self.n_state < 2 || self.n_state % 2 != 0 {
            problems.push(format!("n_state must be even and >= 2, got {}", self.n_state));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
            problems.push(format!(
                "timestep range must satisfy 0 < dt_min <= dt_max, got [{}, {}]",
                self.dt_min, self.dt_max
            ));
        }
        if self.gru_layers == 0 {
            problems.push("gru_layers must be >= 1".to_string());
        }
        if self.mlp_depth == 0 {
            problems.push("mlp_depth must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            invalid(problems.join("; "))
        }
    }
}

/// Encoder -> S4D blocks -> decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct S4dModel<T> {
    pub encoder: Linear<T>,
    pub blocks: Vec<S4dBlock<T>>,
    pub decoder: Linear<T>,
}

/// Stacked GRU with a per-frame linear readout.
#[derive(Clone, Debug, PartialEq)]
pub struct GruModel<T> {
    pub layers: Vec<GruLayer<T>>,
    pub readout: Linear<T>,
    pub dropout: f64,
}

/// Framewise fully connected stack.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel<T> {
    pub hidden: Vec<Linear<T>>,
    pub output: Linear<T>,
    pub activation: Activation,
    pub dropout: f64,
}

/// Any trainable model. Gradients are represented by a value of the same
/// shape produced by [`Model::zeros_like`].
#[derive(Clone, Debug, PartialEq)]
pub enum Model<T> {
    S4d(S4dModel<T>),
    Gru(GruModel<T>),
    Mlp(MlpModel<T>),
}

impl<T: Scalar> Model<T> {
    /// Seeded initialization from `config.seed`.
    pub fn new(kind: ModelKind, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ModelRng::seed_from_u64(config.seed);
        let (i, h, o) = (config.in_channels, config.hidden_dim, config.out_channels);
        Ok(match kind {
            ModelKind::S4d => {
                let encoder = Linear::init(i, h, &mut rng);
                let blocks = (0..config.n_blocks).map(|_| S4dBlock::init(config, &mut rng)).collect();
                let decoder = Linear::init(h, o, &mut rng);
                Model::S4d(S4dModel {
                    encoder,
                    blocks,
                    decoder,
                })
            }
            ModelKind::Gru => {
                let layers = (0..config.gru_layers)
                    .map(|l| GruLayer::init(if l == 0 { i } else { h }, h, &mut rng))
                    .collect();
                Model::Gru(GruModel {
                    layers,
                    readout: Linear::init(h, o, &mut rng),
                    dropout: config.dropout,
                })
            }
            ModelKind::MlpShallow | ModelKind::MlpDeep => {
                let depth = if kind == ModelKind::MlpShallow { 1 } else { config.mlp_depth };
                let hidden = (0..depth)
                    .map(|l| Linear::init(if l == 0 { i } else { h }, h, &mut rng))
                    .collect();
                Model::Mlp(MlpModel {
                    hidden,
                    output: Linear::init(h, o, &mut rng),
                    activation: config.activation,
                    dropout: config.dropout,
                })
            }
        })
    }

    pub fn in_channels(&self) -> usize {
        match self {
            Model::S4d(m) => m.encoder.in_dim,
            Model::Gru(m) => m.layers[0].in_dim,
            Model::Mlp(m) => m.hidden[0].in_dim,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            Model::S4d(m) => m.decoder.out_dim,
            Model::Gru(m) => m.readout.out_dim,
            Model::Mlp(m) => m.output.out_dim,
        }
    }

    /// Forward pass that records a tape for [`Model::backward`].
    pub fn forward_recorded(
        &self,
        x: &SequenceTensor<T>,
        training: bool,
        rng: &mut ModelRng,
    ) -> Result<(SequenceTensor<T>, GradientTape<T>)> {
        x.check_channels(self.in_channels(), "model input")?;
        let mut tape = GradientTape::new();
        let y = match self {
            Model::S4d(m) => {
                let mut h = m.encoder.forward_recorded(x, &mut tape)?;
                for block in &m.blocks {
                    h = block.forward_recorded(&h, training, rng, &mut tape)?;
                }
                m.decoder.forward_recorded(&h, &mut tape)?
            }
            Model::Gru(m) => {
                let mut h = x.clone();
                for (l, layer) in m.layers.iter().enumerate() {
                    h = layer.forward_recorded(&h, &mut tape)?;
                    if l + 1 < m.layers.len() {
                        h = super::dropout_recorded(&h, m.dropout, training, rng, &mut tape);
                    }
                }
                m.readout.forward_recorded(&h, &mut tape)?
            }
            Model::Mlp(m) => {
                let mut h = x.clone();
                for layer in &m.hidden {
                    h = layer.forward_recorded(&h, &mut tape)?;
                    h = super::activation_recorded(m.activation, &h, &mut tape);
                    h = super::dropout_recorded(&h, m.dropout, training, rng, &mut tape);
                }
                m.output.forward_recorded(&h, &mut tape)?
            }
        };
        Ok((y, tape))
    }

    /// Inference (`training = false`); deterministic.
    pub fn predict(&self, x: &SequenceTensor<T>) -> Result<SequenceTensor<T>> {
        let mut rng = ModelRng::seed_from_u64(0);
        Ok(self.forward_recorded(x, false, &mut rng)?.0)
    }

    /// Reverse pass: returns parameter gradients (same shape as `self`) and `dL/dx`.
    pub fn backward(
        &self,
        mut tape: GradientTape<T>,
        dy: &SequenceTensor<T>,
    ) -> Result<(Self, SequenceTensor<T>)> {
        if tape.is_empty() {
            return Err(Error::State("backward called without a recorded forward pass".into()));
        }
        if dy.channels() != self.out_channels() {
            return crate::error::shape("output gradient channel mismatch");
        }
        let mut grad = self.zeros_like();
        let dx = match (self, &mut grad) {
            (Model::S4d(m), Model::S4d(g)) => {
                let mut d = m.decoder.backward(&mut tape, dy, &mut g.decoder)?;
                for (block, gb) in m.blocks.iter().zip(g.blocks.iter_mut()).rev() {
                    d = block.backward(&mut tape, &d, gb)?;
                }
                m.encoder.backward(&mut tape, &d, &mut g.encoder)?
            }
            (Model::Gru(m), Model::Gru(g)) => {
                let mut d = m.readout.backward(&mut tape, dy, &mut g.readout)?;
                let n = m.layers.len();
                for l in (0..n).rev() {
                    if l + 1 < n {
                        d = super::dropout_backward(&mut tape, &d)?;
                    }
                    d = m.layers[l].backward(&mut tape, &d, &mut g.layers[l])?;
                }
                d
            }
            (Model::Mlp(m), Model::Mlp(g)) => {
                let mut d = m.output.backward(&mut tape, dy, &mut g.output)?;
                for l in (0..m.hidden.len()).rev() {
                    d = super::dropout_backward(&mut tape, &d)?;
                    d = super::activation_backward(m.activation, &mut tape, &d)?;
                    d = m.hidden[l].backward(&mut tape, &d, &mut g.hidden[l])?;
                }
                d
            }
            _ => unreachable!("gradient shape mirrors model"),
        };
        if !tape.is_empty() {
            return Err(Error::State(format!(
                "{} tape entries left after backward",
                tape.len()
            )));
        }
        Ok((grad, dx))
    }

    /// Same structure with every parameter and buffer set to zero.
    pub fn zeros_like(&self) -> Self {
        match self {
            Model::S4d(m) => Model::S4d(S4dModel {
                encoder: m.encoder.zeros_like(),
                blocks: m.blocks.iter().map(|b| b.zeros_like()).collect(),
                decoder: m.decoder.zeros_like(),
            }),
            Model::Gru(m) => Model::Gru(GruModel {
                layers: m.layers.iter().map(|l| l.zeros_like()).collect(),
                readout: m.readout.zeros_like(),
                dropout: m.dropout,
            }),
            Model::Mlp(m) => Model::Mlp(MlpModel {
                hidden: m.hidden.iter().map(|l| l.zeros_like()).collect(),
                output: m.output.zeros_like(),
                activation: m.activation,
                dropout: m.dropout,
            }),
        }
    }

    /// Trainable parameter groups in a fixed order.
    pub fn params(&self) -> Vec<&[T]> {
        match self {
            Model::S4d(m) => {
                let mut v = m.encoder.params();
                v.extend(m.blocks.iter().flat_map(|b| b.params()));
                v.extend(m.decoder.params());
                v
            }
            Model::Gru(m) => {
                let mut v: Vec<&[T]> = m.layers.iter().flat_map(|l| l.params()).collect();
                v.extend(m.readout.params());
                v
            }
            Model::Mlp(m) => {
                let mut v: Vec<&[T]> = m.hidden.iter().flat_map(|l| l.params()).collect();
                v.extend(m.output.params());
                v
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Model::S4d(m) => {
                let mut v = m.encoder.params_mut();
                v.extend(m.blocks.iter_mut().flat_map(|b| b.params_mut()));
                v.extend(m.decoder.params_mut());
                v
            }
            Model::Gru(m) => {
                let mut v: Vec<&mut [T]> = m.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
                v.extend(m.readout.params_mut());
                v
            }
            Model::Mlp(m) => {
                let mut v: Vec<&mut [T]> = m.hidden.iter_mut().flat_map(|l| l.params_mut()).collect();
                v.extend(m.output.params_mut());
                v
            }
        }
    }

    /// Names and shapes aligned with [`Model::params`].
    pub fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        match self {
            Model::S4d(m) => {
                let mut v = m.encoder.param_specs("encoder");
                for (i, b) in m.blocks.iter().enumerate() {
                    v.extend(b.param_specs(&format!("blocks.{i}")));
                }
                v.extend(m.decoder.param_specs("decoder"));
                v
            }
            Model::Gru(m) => {
                let mut v = Vec::new();
                for (i, l) in m.layers.iter().enumerate() {
                    v.extend(l.param_specs(&format!("gru.{i}")));
                }
                v.extend(m.readout.param_specs("readout"));
                v
            }
            Model::Mlp(m) => {
                let mut v = Vec::new();
                for (i, l) in m.hidden.iter().enumerate() {
                    v.extend(l.param_specs(&format!("hidden.{i}")));
                }
                v.extend(m.output.param_specs("output"));
                v
            }
        }
    }

    /// Non-trainable state (normalization running statistics).
    pub fn buffers(&self) -> Vec<&[T]> {
        match self {
            Model::S4d(m) => m.blocks.iter().flat_map(|b| b.buffers()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Model::S4d(m) => m.blocks.iter_mut().flat_map(|b| b.buffers_mut()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn buffer_specs(&self) -> Vec<(String, Vec<usize>)> {
        match self {
            Model::S4d(m) => m
                .blocks
                .iter()
                .enumerate()
                .flat_map(|(i, b)| b.buffer_specs(&format!("blocks.{i}")))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Folds batch statistics recorded on a training tape into running buffers.
    pub fn absorb_batch_stats(&mut self, tape: &GradientTape<T>) {
        let Model::S4d(m) = self else { return };
        let stats = tape.entries().iter().filter_map(|e| match e {
            TapeEntry::Norm {
                batch_stats: Some((mean, var)),
                ..
            } => Some((mean, var)),
            _ => None,
        });
        for (block, (mean, var)) in m.blocks.iter_mut().zip(stats) {
            block.norm.absorb(mean, var);
        }
    }

    /// Recurrent-mode inference state; only the S4D path supports streaming.
    pub fn stream(&self) -> Result<ModelStream<T>> {
        let Model::S4d(m) = self else {
            return Err(Error::Incompatible(
                "streaming inference requires an s4d model (recurrent SSM path)".into(),
            ));
        };
        let width = m.encoder.out_dim;
        Ok(ModelStream {
            blocks: m.blocks.iter().map(|b| b.stream()).collect(),
            buf_a: vec![T::zero(); width],
            buf_b: vec![T::zero(); width],
        })
    }

    /// Advances the stream by one frame and writes `out_channels` predictions.
    pub fn step(&self, stream: &mut ModelStream<T>, x: &[T], out: &mut [T]) -> Result<()> {
        let Model::S4d(m) = self else {
            return Err(Error::Incompatible("streaming requires an s4d model".into()));
        };
        if x.len() != m.encoder.in_dim || out.len() != m.decoder.out_dim {
            return crate::error::shape("stream step: frame width mismatch");
        }
        m.encoder.forward_frame(x, &mut stream.buf_a);
        for (block, bs) in m.blocks.iter().zip(stream.blocks.iter_mut()) {
            block.step(bs, &stream.buf_a, &mut stream.buf_b);
            std::mem::swap(&mut stream.buf_a, &mut stream.buf_b);
        }
        m.decoder.forward_frame(&stream.buf_a, out);
        Ok(())
    }
}

/// Recurrent state of an S4D model.
#[derive(Clone, Debug)]
pub struct ModelStream<T> {
    blocks: Vec<S4dBlockStream<T>>,
    buf_a: Vec<T>,
    buf_b: Vec<T>,
}
