//! Layers and the two-branch generator/discriminator.
//!
//! Generator: latent `z` feeds a shared dense trunk. The tabular branch has
//! one small MLP head per schema variable (softmax for one-hot blocks,
//! sigmoid rescaled to `[-1, 1]` for numeric columns). The sequence branch
//! repeats the trunk output for `max_len` steps and runs it through an LSTM
//! stack ending in a 5-wide LSTM whose hidden state is the per-step output.
//!
//! Discriminator: a dense tabular branch and a bidirectional-LSTM sequence
//! branch followed by a unidirectional LSTM; the tabular features and the
//! last LSTM state are concatenated and mapped to one logit per example.

mod discriminator;
mod generator;
mod layers;

use serde::{Deserialize, Serialize};

pub use discriminator::{discriminator_forward, DiscriminatorParams, DiscriminatorVars};
pub use generator::{generator_forward, GeneratorParams, GeneratorVars, OutputHead};
pub use layers::{
    bidirectional_lstm_forward, glorot_bound, lstm_cell_step, Binder, DenseLayer, DenseVars,
    LstmCellParams, LstmVars,
};

use crate::error::{Error, Result};
use crate::numcore::SeededRng;

/// Features per sequence step: origin x/y, destination x/y, purpose.
pub const SEQ_FEATURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    /// Cross-entropy GAN loss; discriminator scores are probabilities.
    #[default]
    Standard,
    /// Critic with weight clipping; scores are unbounded critic values.
    Wasserstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// One-hot block produced by a softmax.
    Categorical,
    /// Single column in `[-1, 1]` produced by a rescaled sigmoid.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub kind: HeadKind,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub latent_dim: usize,
    pub trunk_width: usize,
    pub head_hidden: usize,
    /// Hidden LSTM widths of the generator sequence branch, before the
    /// 5-wide output LSTM.
    pub gen_lstm: Vec<usize>,
    pub disc_tabular: Vec<usize>,
    /// Per-direction width of the discriminator bidirectional LSTM.
    pub disc_bilstm: usize,
    pub disc_lstm: usize,
    /// Sequence length `T` (repeat count of the generator).
    pub max_len: usize,
    pub heads: Vec<HeadSpec>,
}

impl NetConfig {
    /// Published widths: generator LSTM 500/500/500 + 5, discriminator
    /// dense 500/200, BiLSTM 500, LSTM 100, output 1.
    pub fn paper(heads: Vec<HeadSpec>, max_len: usize) -> Self {
        Self {
            latent_dim: 100,
            trunk_width: 256,
            head_hidden: 100,
            gen_lstm: vec![500, 500, 500],
            disc_tabular: vec![500, 200],
            disc_bilstm: 500,
            disc_lstm: 100,
            max_len,
            heads,
        }
    }

    /// Desk-scale widths used by tests and quick experiments.
    pub fn compact(heads: Vec<HeadSpec>, max_len: usize) -> Self {
        Self {
            latent_dim: 16,
            trunk_width: 48,
            head_hidden: 24,
            gen_lstm: vec![24],
            disc_tabular: vec![48, 24],
            disc_bilstm: 12,
            disc_lstm: 8,
            max_len,
            heads,
        }
    }

    pub fn tabular_width(&self) -> usize {
        self.heads.iter().map(|h| h.width).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.latent_dim,
            self.trunk_width,
            self.head_hidden,
            self.disc_bilstm,
            self.disc_lstm,
        ];
        if widths.contains(&0)
            || self.gen_lstm.contains(&0)
            || self.disc_tabular.is_empty()
            || self.disc_tabular.contains(&0)
        {
            return Err(Error::Parameter("network widths must be >= 1".into()));
        }
        if self.max_len < 3 {
            return Err(Error::Parameter(format!(
                "max sequence length must be >= 3, got {}",
                self.max_len
            )));
        }
        if self.heads.is_empty() {
            return Err(Error::Parameter("at least one tabular head is required".into()));
        }
        for h in &self.heads {
            let ok = match h.kind {
                HeadKind::Categorical => h.width >= 1,
                HeadKind::Numeric => h.width == 1,
            };
            if !ok {
                return Err(Error::schema(&h.name, format!("invalid head width {}", h.width)));
            }
        }
        Ok(())
    }
}

/// Fresh generator and discriminator weights: Glorot-uniform matrices and
/// zero biases, drawn in a fixed order from `rng`.
pub fn init_params(config: &NetConfig, rng: &mut SeededRng) -> Result<(GeneratorParams, DiscriminatorParams)> {
    config.validate()?;
    let g = GeneratorParams::init(config, rng);
    let d = DiscriminatorParams::init(config, rng);
    Ok((g, d))
}

/// Flattened L2 norm across a list of tensors.
pub fn global_norm<'a>(tensors: impl IntoIterator<Item = &'a crate::numcore::Tensor>) -> f64 {
    tensors.into_iter().map(|t| t.norm_sq()).sum::<f64>().sqrt()
}
