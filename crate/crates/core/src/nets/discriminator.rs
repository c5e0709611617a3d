use serde::{Deserialize, Serialize};

use super::layers::{Binder, DenseLayer, DenseVars, LstmCellParams, LstmVars};
use super::{LossVariant, NetConfig, SEQ_FEATURES};
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Activation, SeededRng, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams {
    pub tabular_width: usize,
    pub max_len: usize,
    pub tabular: Vec<DenseLayer>,
    pub seq_forward: LstmCellParams,
    pub seq_backward: LstmCellParams,
    pub seq_lstm: LstmCellParams,
    /// Merged features → one logit, no activation.
    pub output: DenseLayer,
}

pub struct DiscriminatorVars {
    tabular: Vec<DenseVars>,
    seq_forward: LstmVars,
    seq_backward: LstmVars,
    seq_lstm: LstmVars,
    output: DenseVars,
    max_len: usize,
}

impl DiscriminatorParams {
    pub fn init(config: &NetConfig, rng: &mut SeededRng) -> Self {
        let mut inputs = config.tabular_width();
        let mut tabular = Vec::new();
        for &w in &config.disc_tabular {
            tabular.push(DenseLayer::init(rng, inputs, w, Some(Activation::Relu)));
            inputs = w;
        }
        let seq_forward = LstmCellParams::init(rng, SEQ_FEATURES, config.disc_bilstm);
        let seq_backward = LstmCellParams::init(rng, SEQ_FEATURES, config.disc_bilstm);
        let seq_lstm = LstmCellParams::init(rng, 2 * config.disc_bilstm, config.disc_lstm);
        let output = DenseLayer::init(rng, inputs + config.disc_lstm, 1, None);
        Self {
            tabular_width: config.tabular_width(),
            max_len: config.max_len,
            tabular,
            seq_forward,
            seq_backward,
            seq_lstm,
            output,
        }
    }

    /// Same architecture with every weight and bias set to zero.
    pub fn zeroed(&self) -> Self {
        let mut d = self.clone();
        for t in d.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        d
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.tabular {
            out.extend(l.tensors());
        }
        out.extend(self.seq_forward.tensors());
        out.extend(self.seq_backward.tensors());
        out.extend(self.seq_lstm.tensors());
        out.extend(self.output.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.tabular {
            out.extend(l.tensors_mut());
        }
        out.extend(self.seq_forward.tensors_mut());
        out.extend(self.seq_backward.tensors_mut());
        out.extend(self.seq_lstm.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }

    /// Binds in the same order as [`DiscriminatorParams::tensors`].
    pub fn bind(&self, b: &mut Binder) -> DiscriminatorVars {
        DiscriminatorVars {
            tabular: self.tabular.iter().map(|l| l.bind(b)).collect(),
            seq_forward: self.seq_forward.bind(b),
            seq_backward: self.seq_backward.bind(b),
            seq_lstm: self.seq_lstm.bind(b),
            output: self.output.bind(b),
            max_len: self.max_len,
        }
    }

    /// Raw logits `[batch, 1]` for `tabular: [batch, W]` and a sequence batch
    /// shaped `[batch, T, 5]` or `[batch, T * 5]`.
    pub fn logits(&self, tabular: &Tensor, sequence: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut Binder::new(&mut tape, false));
        let (tab, seq) = self.input_vars(&mut tape, tabular, sequence)?;
        let out = vars.logits(&mut tape, tab, seq)?;
        Ok(tape.value(out).clone())
    }

    /// Validates shapes and records both inputs as tape constants.
    pub fn input_vars(&self, tape: &mut Tape, tabular: &Tensor, sequence: &Tensor) -> Result<(Var, Var)> {
        let batch = tabular.rows();
        if tabular.rank() != 2 || tabular.shape()[1] != self.tabular_width {
            return Err(Error::dim("discriminator tabular", tabular.shape(), &[batch, self.tabular_width]));
        }
        let seq_width = self.max_len * SEQ_FEATURES;
        if sequence.rows() != batch || sequence.cols() != seq_width {
            return Err(Error::dim("discriminator sequence", sequence.shape(), &[batch, self.max_len, SEQ_FEATURES]));
        }
        let tab = tape.constant(tabular.clone());
        let seq = tape.constant(sequence.reshape(&[batch, seq_width])?);
        Ok((tab, seq))
    }
}

impl DiscriminatorVars {
    /// `tab: [batch, W]`, `seq: [batch, T * 5]` → logits `[batch, 1]`.
    pub fn logits(&self, tape: &mut Tape, tab: Var, seq: Var) -> Result<Var> {
        let mut t_feat = tab;
        for layer in &self.tabular {
            t_feat = layer.forward(tape, t_feat)?;
        }

        let steps = (0..self.max_len)
            .map(|t| tape.slice_cols(seq, t * SEQ_FEATURES, (t + 1) * SEQ_FEATURES))
            .collect::<Result<Vec<_>>>()?;
        let hf = self.seq_forward.run(tape, &steps, false)?;
        let hb = self.seq_backward.run(tape, &steps, true)?;
        let both = hf
            .iter()
            .zip(&hb)
            .map(|(&f, &b)| tape.concat_cols(&[f, b]))
            .collect::<Result<Vec<_>>>()?;
        let hs = self.seq_lstm.run(tape, &both, false)?;
        let s_feat = *hs.last().expect("max_len >= 1");

        let merged = tape.concat_cols(&[t_feat, s_feat])?;
        self.output.forward(tape, merged)
    }
}

/// Per-example scores `[batch, 1]`: sigmoid probabilities under the
/// standard loss, raw critic values under the Wasserstein variant.
pub fn discriminator_forward(
    d: &DiscriminatorParams,
    tabular: &Tensor,
    sequence: &Tensor,
    variant: LossVariant,
) -> Result<Tensor> {
    let logits = d.logits(tabular, sequence)?;
    Ok(match variant {
        LossVariant::Standard => logits.map(sigmoid),
        LossVariant::Wasserstein => logits,
    })
}
