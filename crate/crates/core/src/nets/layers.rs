use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Activation, ParamId, SeededRng, Tape, Tensor, Var};

/// Registers parameter tensors on a tape in a fixed visiting order.
///
/// With `trainable = true` the i-th bound tensor gets `ParamId(i)`, which is
/// also its position in the owning network's `tensors()` list. Frozen binds
/// record constants, so no gradient is produced for them.
pub struct Binder<'t> {
    pub tape: &'t mut Tape,
    trainable: bool,
    next: usize,
}

impl<'t> Binder<'t> {
    pub fn new(tape: &'t mut Tape, trainable: bool) -> Self {
        Self {
            tape,
            trainable,
            next: 0,
        }
    }

    pub fn bind(&mut self, t: &Tensor) -> Var {
        let id = self.next;
        self.next += 1;
        if self.trainable {
            self.tape.param(ParamId(id), t.clone())
        } else {
            self.tape.constant(t.clone())
        }
    }

    pub fn bound(&self) -> usize {
        self.next
    }
}

/// Glorot-uniform bound for a `fan_in × fan_out` weight matrix.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot_uniform(rng: &mut SeededRng, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = glorot_bound(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("positive dims")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `[in, out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
    pub activation: Option<Activation>,
}

pub struct DenseVars {
    weight: Var,
    bias: Var,
    activation: Option<Activation>,
}

impl DenseLayer {
    pub fn init(rng: &mut SeededRng, inputs: usize, outputs: usize, activation: Option<Activation>) -> Self {
        Self {
            weight: glorot_uniform(rng, inputs, outputs),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Option<Activation>) -> Self {
        Self {
            weight: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn bind(&self, b: &mut Binder) -> DenseVars {
        DenseVars {
            weight: b.bind(&self.weight),
            bias: b.bind(&self.bias),
            activation: self.activation,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let mut binder = Binder::new(&mut tape, false);
        let vars = self.bind(&mut binder);
        let xv = tape.constant(x.clone());
        let y = vars.forward(&mut tape, xv)?;
        Ok(tape.value(y).clone())
    }
}

impl DenseVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let z = tape.matmul(x, self.weight)?;
        let z = tape.add_bias(z, self.bias)?;
        Ok(match self.activation {
            Some(kind) => tape.activate(kind, z),
            None => z,
        })
    }
}

/// Standard forget-gate LSTM cell without peepholes.
///
/// Gate blocks are packed along the column axis in the order
/// input, forget, output, candidate: `w_input` is `[d, 4h]`,
/// `w_recurrent` is `[h, 4h]` and `bias` is `[4h]`.
///
/// ```text
/// i = σ(x·Wi + h·Ui + bi)    f = σ(x·Wf + h·Uf + bf)
/// o = σ(x·Wo + h·Uo + bo)    g = tanh(x·Wg + h·Ug + bg)
/// c' = f⊙c + i⊙g             h' = o⊙tanh(c')
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub w_input: Tensor,
    pub w_recurrent: Tensor,
    pub bias: Tensor,
}

pub struct LstmVars {
    w_input: Var,
    w_recurrent: Var,
    bias: Var,
    hidden: usize,
}

impl LstmCellParams {
    pub fn init(rng: &mut SeededRng, inputs: usize, hidden: usize) -> Self {
        Self {
            w_input: glorot_uniform(rng, inputs, 4 * hidden),
            w_recurrent: glorot_uniform(rng, hidden, 4 * hidden),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            w_input: Tensor::zeros(&[inputs, 4 * hidden]),
            w_recurrent: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w_input.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w_recurrent.shape()[0]
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w_input, &self.w_recurrent, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_input, &mut self.w_recurrent, &mut self.bias]
    }

    pub fn bind(&self, b: &mut Binder) -> LstmVars {
        LstmVars {
            w_input: b.bind(&self.w_input),
            w_recurrent: b.bind(&self.w_recurrent),
            bias: b.bind(&self.bias),
            hidden: self.hidden(),
        }
    }

    fn check(&self) -> Result<()> {
        let (d, h) = (self.inputs(), self.hidden());
        if self.w_input.shape() != [d, 4 * h]
            || self.w_recurrent.shape() != [h, 4 * h]
            || self.bias.shape() != [4 * h]
        {
            return Err(Error::dim("lstm params", self.w_input.shape(), self.w_recurrent.shape()));
        }
        Ok(())
    }
}

impl LstmVars {
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// One recurrence step on `[batch, d]` input and `[batch, h]` states.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hs = self.hidden;
        let zx = tape.matmul(x, self.w_input)?;
        let zh = tape.matmul(h, self.w_recurrent)?;
        let z = tape.add(zx, zh)?;
        let z = tape.add_bias(z, self.bias)?;
        let i = tape.slice_cols(z, 0, hs)?;
        let f = tape.slice_cols(z, hs, 2 * hs)?;
        let o = tape.slice_cols(z, 2 * hs, 3 * hs)?;
        let g = tape.slice_cols(z, 3 * hs, 4 * hs)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let o = tape.sigmoid(o);
        let g = tape.tanh(g);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.tanh(c_next);
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// Runs the cell over `inputs` (one `[batch, d]` var per step) from zero
    /// states. With `reverse`, steps are consumed last to first; outputs are
    /// always returned in input order.
    pub fn run(&self, tape: &mut Tape, inputs: &[Var], reverse: bool) -> Result<Vec<Var>> {
        let batch = inputs
            .first()
            .map(|&v| tape.value(v).rows())
            .ok_or_else(|| Error::Parameter("empty sequence".into()))?;
        let mut h = tape.constant(Tensor::zeros(&[batch, self.hidden]));
        let mut c = tape.constant(Tensor::zeros(&[batch, self.hidden]));
        let mut out = vec![h; inputs.len()];
        let order: Vec<usize> = if reverse {
            (0..inputs.len()).rev().collect()
        } else {
            (0..inputs.len()).collect()
        };
        for t in order {
            let (hn, cn) = self.step(tape, inputs[t], h, c)?;
            h = hn;
            c = cn;
            out[t] = h;
        }
        Ok(out)
    }
}

/// Single LSTM step on `x_t: [d]`, `h, c: [h]`; returns `(h', c')`.
pub fn lstm_cell_step(p: &LstmCellParams, x_t: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
    p.check()?;
    let (d, hs) = (p.inputs(), p.hidden());
    if x_t.len() != d {
        return Err(Error::dim("lstm_cell_step input", x_t.shape(), &[d]));
    }
    if h.len() != hs || c.len() != hs {
        return Err(Error::dim("lstm_cell_step state", h.shape(), &[hs]));
    }
    let mut tape = Tape::new();
    let mut binder = Binder::new(&mut tape, false);
    let vars = p.bind(&mut binder);
    let x = tape.constant(x_t.reshape(&[1, d])?);
    let hv = tape.constant(h.reshape(&[1, hs])?);
    let cv = tape.constant(c.reshape(&[1, hs])?);
    let (hn, cn) = vars.step(&mut tape, x, hv, cv)?;
    Ok((tape.value(hn).reshape(&[hs])?, tape.value(cn).reshape(&[hs])?))
}

/// Bidirectional pass over `seq: [T, d]`; row `t` of the `[T, 2h]` output is
/// the forward state after step `t` followed by the backward state after
/// consuming steps `T-1 .. t`.
pub fn bidirectional_lstm_forward(p_fwd: &LstmCellParams, p_bwd: &LstmCellParams, seq: &Tensor) -> Result<Tensor> {
    p_fwd.check()?;
    p_bwd.check()?;
    if p_fwd.hidden() != p_bwd.hidden() || p_fwd.inputs() != p_bwd.inputs() {
        return Err(Error::dim("bidirectional hidden", p_fwd.w_input.shape(), p_bwd.w_input.shape()));
    }
    if seq.rank() != 2 || seq.shape()[1] != p_fwd.inputs() {
        return Err(Error::dim("bidirectional input", seq.shape(), &[p_fwd.inputs()]));
    }
    let steps = seq.shape()[0];
    let mut tape = Tape::new();
    let mut binder = Binder::new(&mut tape, false);
    let fwd = p_fwd.bind(&mut binder);
    let bwd = p_bwd.bind(&mut binder);
    let inputs = (0..steps)
        .map(|t| Ok(tape.constant(seq.select_rows(&[t])?)))
        .collect::<Result<Vec<_>>>()?;
    let hf = fwd.run(&mut tape, &inputs, false)?;
    let hb = bwd.run(&mut tape, &inputs, true)?;
    let rows = (0..steps)
        .map(|t| tape.concat_cols(&[hf[t], hb[t]]))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(steps * 2 * p_fwd.hidden());
    for r in rows {
        data.extend_from_slice(tape.value(r).data());
    }
    Tensor::new(vec![steps, 2 * p_fwd.hidden()], data)
}
