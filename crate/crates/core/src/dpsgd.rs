//! Private discriminator optimization and generator RMSProp.
//!
//! A discriminator step computes one gradient per example (microbatch size
//! one), rescales each to L2 norm at most `C` jointly across every
//! discriminator tensor, sums them in example order, adds
//! `N(0, (σ·C)² I)` to the sum and divides by the batch size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{global_norm, Binder, DiscriminatorParams, LossVariant};
use crate::numcore::{SeededRng, Tape, Tensor};

/// One tensor per parameter, in the owning network's `tensors()` order.
pub type GradMap = Vec<Tensor>;

/// Clipping and noise knobs.
///
/// A mechanism `M` is ε-differentially private when, for datasets `d`, `d'`
/// differing in one record and every output `O`,
/// `P[M(d) = O] <= e^ε · P[M(d') = O]`. This crate records `(C, σ)` together
/// with batch size and step count so that an external accountant can derive
/// ε; it does not compute ε itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    /// L2 bound `C` on every per-example gradient.
    pub clip_norm: f64,
    /// Ratio `σ` of noise standard deviation to `C`.
    pub noise_multiplier: f64,
    /// `false` is the fully non-private baseline (no clipping, no noise).
    /// `true` with `σ = 0` clips without adding noise.
    pub enabled: bool,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            clip_norm: 1.0,
            noise_multiplier: 0.0,
            enabled: true,
        }
    }
}

impl PrivacyConfig {
    pub fn new(clip_norm: f64, noise_multiplier: f64) -> Result<Self> {
        let cfg = Self {
            clip_norm,
            noise_multiplier,
            enabled: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_norm > 0.0) || !self.clip_norm.is_finite() {
            return Err(Error::Parameter(format!("clip norm must be > 0, got {}", self.clip_norm)));
        }
        if !(self.noise_multiplier >= 0.0) || !self.noise_multiplier.is_finite() {
            return Err(Error::Parameter(format!(
                "noise multiplier must be >= 0, got {}",
                self.noise_multiplier
            )));
        }
        Ok(())
    }
}

pub struct DpSgdState {
    pub learning_rate: f64,
    pub privacy: PrivacyConfig,
    pub rng: SeededRng,
}

impl DpSgdState {
    pub fn new(learning_rate: f64, privacy: PrivacyConfig, rng: SeededRng) -> Result<Self> {
        if !(learning_rate >= 0.0) {
            return Err(Error::Parameter(format!("learning rate must be >= 0, got {learning_rate}")));
        }
        privacy.validate()?;
        Ok(Self {
            learning_rate,
            privacy,
            rng,
        })
    }
}

fn check_same_structure(a: &GradMap, b: &GradMap) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim("gradient map", &[a.len()], &[b.len()]));
    }
    for (x, y) in a.iter().zip(b) {
        if x.shape() != y.shape() {
            return Err(Error::dim("gradient map", x.shape(), y.shape()));
        }
    }
    Ok(())
}

/// Rescales each example's flattened gradient to norm at most `clip_norm`.
pub fn clip_per_example(grads: Vec<GradMap>, clip_norm: f64) -> Result<Vec<GradMap>> {
    if !(clip_norm > 0.0) {
        return Err(Error::Parameter(format!("clip norm must be > 0, got {clip_norm}")));
    }
    if let Some(first) = grads.first() {
        for g in &grads[1..] {
            check_same_structure(first, g)?;
        }
    }
    Ok(grads
        .into_iter()
        .map(|mut g| {
            let norm = global_norm(g.iter());
            if norm > clip_norm {
                let factor = clip_norm / norm;
                for t in &mut g {
                    t.data_mut().iter_mut().for_each(|v| *v *= factor);
                }
            }
            g
        })
        .collect())
}

/// Element-wise sum in list order.
pub fn sum_gradients(grads: &[GradMap]) -> Result<GradMap> {
    let first = grads
        .first()
        .ok_or_else(|| Error::Parameter("empty gradient list".into()))?;
    let mut total = first.clone();
    for g in &grads[1..] {
        check_same_structure(&total, g)?;
        for (acc, t) in total.iter_mut().zip(g) {
            for (a, v) in acc.data_mut().iter_mut().zip(t.data()) {
                *a += v;
            }
        }
    }
    Ok(total)
}

/// `(Σ gᵢ + N(0, (σ·C)² I)) / B`.
pub fn privatize_sum(clipped: &[GradMap], cfg: &PrivacyConfig, batch_size: usize, rng: &mut SeededRng) -> Result<GradMap> {
    if batch_size == 0 {
        return Err(Error::Parameter("batch size must be >= 1".into()));
    }
    cfg.validate()?;
    let mut total = sum_gradients(clipped)?;
    let std = cfg.noise_multiplier * cfg.clip_norm;
    let inv_b = 1.0 / batch_size as f64;
    for t in &mut total {
        for v in t.data_mut() {
            if std > 0.0 {
                *v += std * rng.normal();
            }
            *v *= inv_b;
        }
    }
    Ok(total)
}

/// Real and generated examples scored against each other in one step.
#[derive(Debug, Clone)]
pub struct DiscriminatorBatch {
    pub real_tabular: Tensor,
    pub real_sequence: Tensor,
    pub fake_tabular: Tensor,
    pub fake_sequence: Tensor,
}

impl DiscriminatorBatch {
    pub fn len(&self) -> usize {
        self.real_tabular.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorStepStats {
    /// Mean per-example loss before the update.
    pub loss: f64,
    pub preclip_mean: f64,
    pub preclip_max: f64,
}

/// Loss and gradient for example `i` of the batch: real example `i` paired
/// with generated example `i`.
///
/// Standard: `softplus(-D(x)) + softplus(D(G(z)))` on logits, i.e.
/// `-log D(x) - log(1 - D(G(z)))`. Wasserstein: `D(G(z)) - D(x)`.
pub fn per_example_gradient(
    d: &DiscriminatorParams,
    batch: &DiscriminatorBatch,
    i: usize,
    variant: LossVariant,
) -> Result<(f64, GradMap)> {
    let n_params = d.tensors().len();
    let mut tape = Tape::new();
    let vars = d.bind(&mut Binder::new(&mut tape, true));
    let (rt, rs) = d.input_vars(
        &mut tape,
        &batch.real_tabular.select_rows(&[i])?,
        &batch.real_sequence.select_rows(&[i])?,
    )?;
    let (ft, fs) = d.input_vars(
        &mut tape,
        &batch.fake_tabular.select_rows(&[i])?,
        &batch.fake_sequence.select_rows(&[i])?,
    )?;
    let real = vars.logits(&mut tape, rt, rs)?;
    let fake = vars.logits(&mut tape, ft, fs)?;
    let loss = match variant {
        LossVariant::Standard => {
            let neg_real = tape.scale(real, -1.0);
            let a = tape.softplus(neg_real);
            let b = tape.softplus(fake);
            let s = tape.add(a, b)?;
            tape.sum(s)
        }
        LossVariant::Wasserstein => {
            let diff = tape.sub(fake, real)?;
            tape.sum(diff)
        }
    };
    let value = tape.value(loss).data()[0];
    let grads = tape.backward(loss)?.into_ordered(n_params)?;
    Ok((value, grads))
}

/// One DP-SGD update `θ ← θ − lr·ĝ` of the discriminator.
pub fn dp_discriminator_step(
    d: &DiscriminatorParams,
    batch: &DiscriminatorBatch,
    variant: LossVariant,
    state: &mut DpSgdState,
) -> Result<(DiscriminatorParams, DiscriminatorStepStats)> {
    let b = batch.len();
    if b == 0 || batch.fake_tabular.rows() != b {
        return Err(Error::Parameter("discriminator batch must be nonempty and paired".into()));
    }
    let per_example: Vec<(f64, GradMap)> = (0..b)
        .into_par_iter()
        .map(|i| per_example_gradient(d, batch, i, variant))
        .collect::<Result<_>>()?;

    let norms: Vec<f64> = per_example.iter().map(|(_, g)| global_norm(g.iter())).collect();
    let stats = DiscriminatorStepStats {
        loss: per_example.iter().map(|(l, _)| l).sum::<f64>() / b as f64,
        preclip_mean: norms.iter().sum::<f64>() / b as f64,
        preclip_max: norms.iter().cloned().fold(0.0, f64::max),
    };
    let grads: Vec<GradMap> = per_example.into_iter().map(|(_, g)| g).collect();

    let update = if state.privacy.enabled {
        let clipped = clip_per_example(grads, state.privacy.clip_norm)?;
        privatize_sum(&clipped, &state.privacy, b, &mut state.rng)?
    } else {
        let mut total = sum_gradients(&grads)?;
        let inv_b = 1.0 / b as f64;
        total
            .iter_mut()
            .for_each(|t| t.data_mut().iter_mut().for_each(|v| *v *= inv_b));
        total
    };

    let mut next = d.clone();
    apply_sgd(next.tensors_mut(), &update, state.learning_rate)?;
    Ok((next, stats))
}

pub fn apply_sgd(params: Vec<&mut Tensor>, grads: &GradMap, learning_rate: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim("sgd", &[params.len()], &[grads.len()]));
    }
    for (p, g) in params.into_iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::dim("sgd", p.shape(), g.shape()));
        }
        for (w, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= learning_rate * gv;
        }
    }
    Ok(())
}

/// Running mean of squared gradients per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmspropState {
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
    pub mean_square: Vec<Tensor>,
}

impl RmspropState {
    pub fn new(learning_rate: f64, decay: f64, shapes: &[&Tensor]) -> Self {
        Self {
            learning_rate,
            decay,
            eps: 1e-8,
            mean_square: shapes.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }
}

/// `v ← ρ·v + (1−ρ)·g²; θ ← θ − lr·g / (√v + eps)`.
pub fn rmsprop_step(state: &mut RmspropState, params: Vec<&mut Tensor>, grads: &GradMap) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.mean_square.len() {
        return Err(Error::dim("rmsprop", &[params.len()], &[grads.len(), state.mean_square.len()]));
    }
    let (rho, lr, eps) = (state.decay, state.learning_rate, state.eps);
    for ((p, g), v) in params.into_iter().zip(grads).zip(&mut state.mean_square) {
        if p.shape() != g.shape() || v.shape() != g.shape() {
            return Err(Error::dim("rmsprop", p.shape(), g.shape()));
        }
        for ((w, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vv = rho * *vv + (1.0 - rho) * gv * gv;
            *w -= lr * gv / (vv.sqrt() + eps);
        }
    }
    Ok(())
}
