//! The recognition model: a three-block convolutional encoder feeding an
//! embedding head and a category head.
//!
//! Each encoder block is Conv -> BatchNorm -> ReLU -> MaxPool; both heads
//! are FC -> ReLU -> FC, with the category head ending in a row softmax.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::nn::{self, Mode, RunningStats};
use crate::autodiff::{no_grad, Tensor};
use crate::error::{Error, Result};
use crate::rng::RngState;

/// Architecture hyper-parameters. The defaults give a 1024-point input,
/// channels 16/32/64 with kernels 7/5/3, pool 4 after every block
/// (so the flattened representation is 64 x 16 = 1024 wide), and 256-wide
/// head hidden layers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub input_length: usize,
    pub class_count: usize,
    pub conv_channels: Vec<usize>,
    pub conv_kernels: Vec<usize>,
    pub pool_window: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_length: 1024,
            class_count: 2,
            conv_channels: vec![16, 32, 64],
            conv_kernels: vec![7, 5, 3],
            pool_window: 4,
            hidden_dim: 256,
            embed_dim: 128,
        }
    }
}

/// The architecture knobs exposed in experiment configs; input length and
/// class count are filled in from the preprocessing config and the data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureConfig {
    pub conv_channels: Vec<usize>,
    pub conv_kernels: Vec<usize>,
    pub pool_window: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        ArchitectureConfig {
            conv_channels: m.conv_channels,
            conv_kernels: m.conv_kernels,
            pool_window: m.pool_window,
            hidden_dim: m.hidden_dim,
            embed_dim: m.embed_dim,
        }
    }
}

impl ArchitectureConfig {
    pub fn into_model_config(self, input_length: usize, class_count: usize) -> ModelConfig {
        ModelConfig {
            input_length,
            class_count,
            conv_channels: self.conv_channels,
            conv_kernels: self.conv_kernels,
            pool_window: self.pool_window,
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::config("class_count must be >= 2"));
        }
        if self.conv_channels.is_empty() || self.conv_channels.len() != self.conv_kernels.len() {
            return Err(Error::config(
                "conv_channels and conv_kernels must be equal-length and non-empty",
            ));
        }
        if self.conv_kernels.iter().any(|k| k % 2 == 0) {
            return Err(Error::config("conv kernels must be odd for same-padding"));
        }
        if self.pool_window < 1 {
            return Err(Error::config("pool_window must be >= 1"));
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 {
            return Err(Error::config("head widths must be positive"));
        }
        let mut l = self.input_length;
        for _ in &self.conv_channels {
            l /= self.pool_window;
            if l == 0 {
                return Err(Error::config(format!(
                    "input_length {} too short for {} pool-{} stages",
                    self.input_length,
                    self.conv_channels.len(),
                    self.pool_window
                )));
            }
        }
        Ok(())
    }

    /// Flattened encoder output width.
    pub fn representation_dim(&self) -> usize {
        let mut l = self.input_length;
        for _ in &self.conv_channels {
            l /= self.pool_window;
        }
        self.conv_channels.last().unwrap() * l
    }
}

struct ConvBlock {
    weight: Tensor,
    bias: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running: RunningStats,
    kernel: usize,
}

struct Head {
    fc1_weight: Tensor,
    fc1_bias: Tensor,
    fc2_weight: Tensor,
    fc2_bias: Tensor,
}

impl Head {
    fn forward(&self, h: &Tensor) -> Tensor {
        let hidden = nn::relu(&nn::linear(h, &self.fc1_weight, &self.fc1_bias));
        nn::linear(&hidden, &self.fc2_weight, &self.fc2_bias)
    }
}

/// Encoder + embedding head + category head with their parameters.
pub struct ScdcModel {
    config: ModelConfig,
    blocks: Vec<ConvBlock>,
    embed: Head,
    category: Head,
}

fn uniform_init(rng: &mut crate::rng::Stream, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl ScdcModel {
    /// Fresh model with uniform fan-in-scaled initialization, deterministic
    /// under the given rng state.
    pub fn new(config: ModelConfig, rng: &RngState) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::new();
        let mut cin = 1usize;
        for (i, (&cout, &k)) in config.conv_channels.iter().zip(&config.conv_kernels).enumerate() {
            let mut stream = rng.stream("init-conv", i as u64);
            let fan_in = cin * k;
            blocks.push(ConvBlock {
                weight: Tensor::parameter(
                    vec![cout, cin, k],
                    uniform_init(&mut stream, cout * cin * k, fan_in),
                ),
                bias: Tensor::parameter(vec![cout], uniform_init(&mut stream, cout, fan_in)),
                gamma: Tensor::parameter(vec![cout], vec![1.0; cout]),
                beta: Tensor::parameter(vec![cout], vec![0.0; cout]),
                running: RunningStats::new(cout),
                kernel: k,
            });
            cin = cout;
        }
        let d = config.representation_dim();
        let mk_head = |tag: &str, out_dim: usize| {
            let mut stream = rng.stream(tag, 0);
            Head {
                fc1_weight: Tensor::parameter(
                    vec![d, config.hidden_dim],
                    uniform_init(&mut stream, d * config.hidden_dim, d),
                ),
                fc1_bias: Tensor::parameter(
                    vec![config.hidden_dim],
                    uniform_init(&mut stream, config.hidden_dim, d),
                ),
                fc2_weight: Tensor::parameter(
                    vec![config.hidden_dim, out_dim],
                    uniform_init(&mut stream, config.hidden_dim * out_dim, config.hidden_dim),
                ),
                fc2_bias: Tensor::parameter(
                    vec![out_dim],
                    uniform_init(&mut stream, out_dim, config.hidden_dim),
                ),
            }
        };
        let embed = mk_head("init-embed", config.embed_dim);
        let category = mk_head("init-category", config.class_count);
        Ok(ScdcModel { config, blocks, embed, category })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Wraps a batch of preprocessed spectra as the [B, 1, L] input tensor.
    pub fn input_from_rows(&self, rows: &[Vec<f64>]) -> Result<Tensor> {
        let l = self.config.input_length;
        let b = rows.len();
        if b == 0 {
            return Err(Error::shape("empty batch"));
        }
        let mut buf = Vec::with_capacity(b * l);
        for row in rows {
            if row.len() != l {
                return Err(Error::shape(format!("input length {} != expected {l}", row.len())));
            }
            buf.extend_from_slice(row);
        }
        Ok(Tensor::constant(vec![b, 1, l], buf))
    }

    /// Encoder forward: [B, 1, L] -> flattened representation [B, D].
    pub fn encode(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let shape = x.shape();
        if shape.len() != 3 || shape[1] != 1 || shape[2] != self.config.input_length {
            return Err(Error::shape(format!(
                "encode expects [B, 1, {}], got {shape:?}",
                self.config.input_length
            )));
        }
        let mut h = x.clone();
        let pool = self.config.pool_window;
        for block in &mut self.blocks {
            let padding = (block.kernel - 1) / 2;
            let c = nn::conv1d(&h, &block.weight, &block.bias, 1, padding)?;
            let b = nn::batchnorm1d(&c, &block.gamma, &block.beta, &mut block.running, mode)?;
            // MaxPool(ReLU(x)) == ReLU(MaxPool(x)) in values and gradient
            // routing (ReLU is monotone); pooling first runs the activation
            // on the already-reduced tensor.
            let p = nn::maxpool1d(&b, pool)?;
            h = nn::relu(&p);
        }
        let b = h.shape()[0];
        let flat = h.len() / b;
        Ok(nn::reshape(&h, vec![b, flat]))
    }

    /// Embedding head: representation [B, D] -> [B, embed_dim].
    /// No normalization here; cosine similarity downstream normalizes.
    pub fn embed_head(&self, h: &Tensor) -> Tensor {
        self.embed.forward(h)
    }

    /// Category head: representation [B, D] -> probabilities [B, C].
    pub fn category_head(&self, h: &Tensor) -> Tensor {
        nn::softmax_rows(&self.category.forward(h))
    }

    /// Eval-mode class prediction: (label, confidence) per row, argmax with
    /// lowest-index tie-break.
    pub fn predict_class(&mut self, rows: &[Vec<f64>]) -> Result<Vec<(usize, f64)>> {
        let _guard = no_grad();
        let x = self.input_from_rows(rows)?;
        let h = self.encode(&x, Mode::Eval)?;
        let probs = self.category_head(&h);
        let c = self.config.class_count;
        let out = probs.with_values(|p| {
            p.chunks_exact(c)
                .map(|row| {
                    let mut best = (0usize, row[0]);
                    for (j, &v) in row.iter().enumerate().skip(1) {
                        if v > best.1 {
                            best = (j, v);
                        }
                    }
                    best
                })
                .collect::<Vec<_>>()
        });
        Ok(out)
    }

    /// Eval-mode category probabilities, one row per input.
    pub fn predict_proba(&mut self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let _guard = no_grad();
        let x = self.input_from_rows(rows)?;
        let h = self.encode(&x, Mode::Eval)?;
        let probs = self.category_head(&h);
        let c = self.config.class_count;
        Ok(probs.with_values(|p| p.chunks_exact(c).map(|r| r.to_vec()).collect()))
    }

    /// Eval-mode embeddings for export.
    pub fn embed_rows(&mut self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let _guard = no_grad();
        let x = self.input_from_rows(rows)?;
        let h = self.encode(&x, Mode::Eval)?;
        let z = self.embed_head(&h);
        let e = self.config.embed_dim;
        Ok(z.with_values(|v| v.chunks_exact(e).map(|r| r.to_vec()).collect()))
    }

    /// Trainable parameters in a stable order.
    pub fn parameters(&self) -> Vec<Tensor> {
        self.named_parameters().into_iter().map(|(_, t)| t).collect()
    }

    /// `(name, tensor)` pairs; the order is the checkpoint layout order.
    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("encoder.block{i}.conv.weight"), b.weight.clone()));
            out.push((format!("encoder.block{i}.conv.bias"), b.bias.clone()));
            out.push((format!("encoder.block{i}.bn.gamma"), b.gamma.clone()));
            out.push((format!("encoder.block{i}.bn.beta"), b.beta.clone()));
        }
        for (tag, head) in [("embed_head", &self.embed), ("category_head", &self.category)] {
            out.push((format!("{tag}.fc1.weight"), head.fc1_weight.clone()));
            out.push((format!("{tag}.fc1.bias"), head.fc1_bias.clone()));
            out.push((format!("{tag}.fc2.weight"), head.fc2_weight.clone()));
            out.push((format!("{tag}.fc2.bias"), head.fc2_bias.clone()));
        }
        out
    }

    /// Non-trainable state (batch-norm running statistics), named like
    /// parameters for checkpointing.
    pub fn named_buffers(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let c = b.running.mean.len();
            out.push((
                format!("encoder.block{i}.bn.running_mean"),
                vec![c],
                b.running.mean.clone(),
            ));
            out.push((
                format!("encoder.block{i}.bn.running_var"),
                vec![c],
                b.running.var.clone(),
            ));
        }
        out
    }

    /// Restores a named buffer written by [`Self::named_buffers`].
    pub fn load_buffer(&mut self, name: &str, values: &[f64]) -> Result<()> {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            if name == format!("encoder.block{i}.bn.running_mean") {
                if values.len() != b.running.mean.len() {
                    return Err(Error::Checkpoint(format!("buffer {name} has wrong length")));
                }
                b.running.mean.copy_from_slice(values);
                return Ok(());
            }
            if name == format!("encoder.block{i}.bn.running_var") {
                if values.len() != b.running.var.len() {
                    return Err(Error::Checkpoint(format!("buffer {name} has wrong length")));
                }
                b.running.var.copy_from_slice(values);
                return Ok(());
            }
        }
        Err(Error::Checkpoint(format!("unknown buffer {name}")))
    }

}
