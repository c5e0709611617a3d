use serde::{Deserialize, Serialize};

use super::layers::{Binder, DenseLayer, DenseVars, LstmCellParams, LstmVars};
use super::{HeadKind, NetConfig, SEQ_FEATURES};
use crate::error::{Error, Result};
use crate::numcore::{Activation, SeededRng, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub name: String,
    pub kind: HeadKind,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub latent_dim: usize,
    pub repeat: usize,
    pub trunk: DenseLayer,
    pub heads: Vec<OutputHead>,
    pub lstm_stack: Vec<LstmCellParams>,
    pub output_lstm: LstmCellParams,
}

pub struct GeneratorVars {
    trunk: DenseVars,
    heads: Vec<(HeadKind, DenseVars, DenseVars)>,
    lstm_stack: Vec<LstmVars>,
    output_lstm: LstmVars,
    repeat: usize,
}

impl GeneratorParams {
    pub fn init(config: &NetConfig, rng: &mut SeededRng) -> Self {
        let trunk = DenseLayer::init(rng, config.latent_dim, config.trunk_width, Some(Activation::Relu));
        let heads = config
            .heads
            .iter()
            .map(|h| {
                let out_act = match h.kind {
                    HeadKind::Categorical => Activation::Softmax,
                    HeadKind::Numeric => Activation::Sigmoid,
                };
                OutputHead {
                    name: h.name.clone(),
                    kind: h.kind,
                    hidden: DenseLayer::init(rng, config.trunk_width, config.head_hidden, Some(Activation::Relu)),
                    output: DenseLayer::init(rng, config.head_hidden, h.width, Some(out_act)),
                }
            })
            .collect();
        let mut inputs = config.trunk_width;
        let mut lstm_stack = Vec::new();
        for &w in &config.gen_lstm {
            lstm_stack.push(LstmCellParams::init(rng, inputs, w));
            inputs = w;
        }
        let output_lstm = LstmCellParams::init(rng, inputs, SEQ_FEATURES);
        Self {
            latent_dim: config.latent_dim,
            repeat: config.max_len,
            trunk,
            heads,
            lstm_stack,
            output_lstm,
        }
    }

    pub fn tabular_width(&self) -> usize {
        self.heads.iter().map(|h| h.output.outputs()).sum()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.trunk.tensors();
        for h in &self.heads {
            out.extend(h.hidden.tensors());
            out.extend(h.output.tensors());
        }
        for l in &self.lstm_stack {
            out.extend(l.tensors());
        }
        out.extend(self.output_lstm.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.trunk.tensors_mut();
        for h in &mut self.heads {
            out.extend(h.hidden.tensors_mut());
            out.extend(h.output.tensors_mut());
        }
        for l in &mut self.lstm_stack {
            out.extend(l.tensors_mut());
        }
        out.extend(self.output_lstm.tensors_mut());
        out
    }

    /// Binds in the same order as [`GeneratorParams::tensors`].
    pub fn bind(&self, b: &mut Binder) -> GeneratorVars {
        GeneratorVars {
            trunk: self.trunk.bind(b),
            heads: self
                .heads
                .iter()
                .map(|h| (h.kind, h.hidden.bind(b), h.output.bind(b)))
                .collect(),
            lstm_stack: self.lstm_stack.iter().map(|l| l.bind(b)).collect(),
            output_lstm: self.output_lstm.bind(b),
            repeat: self.repeat,
        }
    }
}

impl GeneratorVars {
    /// `z: [batch, latent]` → (`[batch, W_tab]`, `[batch, T * 5]`).
    pub fn forward(&self, tape: &mut Tape, z: Var) -> Result<(Var, Var)> {
        let trunk = self.trunk.forward(tape, z)?;

        let mut blocks = Vec::with_capacity(self.heads.len());
        for (kind, hidden, output) in &self.heads {
            let h = hidden.forward(tape, trunk)?;
            let y = output.forward(tape, h)?;
            let y = match kind {
                HeadKind::Categorical => y,
                HeadKind::Numeric => {
                    let y = tape.scale(y, 2.0);
                    tape.add_scalar(y, -1.0)
                }
            };
            blocks.push(y);
        }
        let tabular = tape.concat_cols(&blocks)?;

        let mut steps = vec![trunk; self.repeat];
        for lstm in &self.lstm_stack {
            steps = lstm.run(tape, &steps, false)?;
        }
        steps = self.output_lstm.run(tape, &steps, false)?;
        let sequence = tape.concat_cols(&steps)?;
        Ok((tabular, sequence))
    }
}

/// Eager generator pass: `z: [batch, latent]` →
/// (`tabular: [batch, W_tab]`, `sequence: [batch, T, 5]`).
pub fn generator_forward(g: &GeneratorParams, z: &Tensor) -> Result<(Tensor, Tensor)> {
    if z.rank() != 2 || z.shape()[1] != g.latent_dim {
        return Err(Error::dim("generator_forward", z.shape(), &[z.rows(), g.latent_dim]));
    }
    let mut tape = Tape::new();
    let vars = g.bind(&mut Binder::new(&mut tape, false));
    let zv = tape.constant(z.clone());
    let (tab, seq) = vars.forward(&mut tape, zv)?;
    let batch = z.rows();
    let seq = tape.value(seq).reshape(&[batch, g.repeat, SEQ_FEATURES])?;
    Ok((tape.value(tab).clone(), seq))
}
