//! Adversarial training loop, sampling and checkpoints.
//!
//! One iteration runs `k` private discriminator steps, each on the next real
//! batch against a fresh generated batch, then one RMSProp generator step
//! that sees only discriminator outputs. Batches walk a permutation of the
//! dataset that is reshuffled every epoch; the last batch may be short.

mod checkpoint;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::data::{Codec, Dataset, EncodedAgent, RawRecord};
use crate::dpsgd::{
    dp_discriminator_step, rmsprop_step, DiscriminatorBatch, DpSgdState, GradMap, PrivacyConfig, RmspropState,
};
use crate::error::{Error, Result};
use crate::nets::{
    generator_forward, init_params, Binder, DiscriminatorParams, GeneratorParams, LossVariant, NetConfig, SEQ_FEATURES,
};
use crate::numcore::{gaussian, SeededRng, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Discriminator steps per generator step.
    pub d_steps: usize,
    pub loss: LossVariant,
    /// Per-tensor bound applied to critic weights after each critic step
    /// (Wasserstein variant only).
    pub weight_clip: f64,
    pub privacy: PrivacyConfig,
    pub lr_discriminator: f64,
    pub lr_generator: f64,
    pub rmsprop_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            d_steps: 1,
            loss: LossVariant::Standard,
            weight_clip: 0.01,
            privacy: PrivacyConfig::default(),
            lr_discriminator: 5e-4,
            lr_generator: 5e-4,
            rmsprop_decay: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.d_steps == 0 {
            return Err(Error::Parameter("epochs, batch size and k must all be >= 1".into()));
        }
        if !(self.weight_clip > 0.0) {
            return Err(Error::Parameter(format!("weight clip must be > 0, got {}", self.weight_clip)));
        }
        for (name, lr) in [("discriminator", self.lr_discriminator), ("generator", self.lr_generator)] {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(Error::Parameter(format!("{name} learning rate must be > 0, got {lr}")));
            }
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return Err(Error::Parameter(format!("RMSProp decay must be in [0, 1), got {}", self.rmsprop_decay)));
        }
        self.privacy.validate()
    }
}

/// One record per generator step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Generator step index, starting at 1.
    pub step: u64,
    /// Mean discriminator loss over the iteration's `k` steps.
    pub d_loss: f64,
    pub g_loss: f64,
    pub preclip_mean: f64,
    pub preclip_max: f64,
    /// Wall-clock milliseconds since the trainer was created or resumed.
    pub millis: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
}

impl TrainHistory {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["step", "d_loss", "g_loss", "preclip_mean", "preclip_max", "millis"])?;
        for r in &self.records {
            w.write_record([
                r.step.to_string(),
                r.d_loss.to_string(),
                r.g_loss.to_string(),
                r.preclip_mean.to_string(),
                r.preclip_max.to_string(),
                r.millis.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Position of the training loop inside the data stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cursor {
    pub epoch: usize,
    pub batch: usize,
    pub permutation: Vec<usize>,
    pub d_steps: u64,
    pub g_steps: u64,
}

/// Generator loss and its gradient for latent batch `z`.
///
/// The discriminator enters the tape as constants, and no real data is an
/// input, so the update depends on real records only through `d`.
/// Standard: `mean softplus(-D(G(z)))` on logits, i.e. `-mean log D(G(z))`.
/// Wasserstein: `-mean D(G(z))`.
pub fn generator_step(
    g: &GeneratorParams,
    d: &DiscriminatorParams,
    z: &Tensor,
    variant: LossVariant,
) -> Result<(f64, GradMap)> {
    let n_params = g.tensors().len();
    let mut tape = Tape::new();
    let gv = g.bind(&mut Binder::new(&mut tape, true));
    let dv = d.bind(&mut Binder::new(&mut tape, false));
    let zv = tape.constant(z.clone());
    let (tab, seq) = gv.forward(&mut tape, zv)?;
    let logits = dv.logits(&mut tape, tab, seq)?;
    let loss = match variant {
        LossVariant::Standard => {
            let neg = tape.scale(logits, -1.0);
            let sp = tape.softplus(neg);
            tape.mean(sp)
        }
        LossVariant::Wasserstein => {
            let m = tape.mean(logits);
            tape.scale(m, -1.0)
        }
    };
    let value = tape.value(loss).data()[0];
    let grads = tape.backward(loss)?.into_ordered(n_params)?;
    Ok((value, grads))
}

/// Clamps every discriminator weight and bias into `[-bound, bound]`.
pub fn clip_weights(d: &mut DiscriminatorParams, bound: f64) {
    for t in d.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
    }
}

pub struct Trainer {
    pub net: NetConfig,
    pub config: TrainConfig,
    pub generator: GeneratorParams,
    pub discriminator: DiscriminatorParams,
    pub rmsprop: RmspropState,
    dp: DpSgdState,
    rng: SeededRng,
    cursor: Cursor,
    pub history: TrainHistory,
    started: Instant,
}

fn check_dataset(net: &NetConfig, ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Parameter("training dataset is empty".into()));
    }
    ds.validate()?;
    let (w, t) = (ds.codec.tabular_width(), ds.codec.max_len());
    if w != net.tabular_width() || t != net.max_len {
        return Err(Error::dim("dataset vs network", &[w, t], &[net.tabular_width(), net.max_len]));
    }
    Ok(())
}

impl Trainer {
    /// Fresh weights drawn from the main stream of `config.seed`; the DP
    /// noise uses a separate stream of the same seed.
    pub fn new(dataset: &Dataset, net: NetConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        net.validate()?;
        check_dataset(&net, dataset)?;
        let mut rng = SeededRng::with_stream(config.seed, 0);
        let (generator, discriminator) = init_params(&net, &mut rng)?;
        let rmsprop = RmspropState::new(config.lr_generator, config.rmsprop_decay, &generator.tensors());
        let dp = DpSgdState::new(config.lr_discriminator, config.privacy, SeededRng::with_stream(config.seed, 1))?;
        Ok(Self {
            net,
            config,
            generator,
            discriminator,
            rmsprop,
            dp,
            rng,
            cursor: Cursor {
                epoch: 0,
                batch: 0,
                permutation: (0..dataset.len()).collect(),
                d_steps: 0,
                g_steps: 0,
            },
            history: TrainHistory::default(),
            started: Instant::now(),
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint, dataset: &Dataset) -> Result<Self> {
        check_dataset(&ckpt.net, dataset)?;
        if ckpt.cursor.permutation.len() != dataset.len() {
            return Err(Error::Parameter(format!(
                "checkpoint was trained on {} agents, dataset has {}",
                ckpt.cursor.permutation.len(),
                dataset.len()
            )));
        }
        let dp = DpSgdState::new(
            ckpt.train.lr_discriminator,
            ckpt.train.privacy,
            SeededRng::from_state(ckpt.noise_rng),
        )?;
        Ok(Self {
            net: ckpt.net,
            config: ckpt.train,
            generator: ckpt.generator,
            discriminator: ckpt.discriminator,
            rmsprop: ckpt.rmsprop,
            dp,
            rng: SeededRng::from_state(ckpt.main_rng),
            cursor: ckpt.cursor,
            history: TrainHistory::default(),
            started: Instant::now(),
        })
    }

    pub fn checkpoint(&self, codec: &Codec) -> Checkpoint {
        Checkpoint {
            net: self.net.clone(),
            schema: codec.schema().clone(),
            train: self.config.clone(),
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
            rmsprop: self.rmsprop.clone(),
            main_rng: self.rng.state(),
            noise_rng: self.dp.rng.state(),
            cursor: self.cursor.clone(),
        }
    }

    pub fn cursor(&self) -> &Cursor {
        &self.cursor
    }

    fn batches_per_epoch(&self) -> usize {
        self.cursor.permutation.len().div_ceil(self.config.batch_size)
    }

    pub fn total_d_steps(&self) -> u64 {
        (self.config.epochs * self.batches_per_epoch()) as u64
    }

    pub fn is_finished(&self) -> bool {
        self.cursor.d_steps >= self.total_d_steps()
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor.batch == 0 {
            self.cursor.permutation.sort_unstable();
            self.rng.shuffle(&mut self.cursor.permutation);
        }
        let b = self.config.batch_size;
        let n = self.cursor.permutation.len();
        let start = self.cursor.batch * b;
        let idx = self.cursor.permutation[start..(start + b).min(n)].to_vec();
        self.cursor.batch += 1;
        if self.cursor.batch == self.batches_per_epoch() {
            self.cursor.batch = 0;
            self.cursor.epoch += 1;
        }
        idx
    }

    fn latent(&mut self, rows: usize) -> Result<Tensor> {
        gaussian(&mut self.rng, &[rows, self.net.latent_dim], 0.0, 1.0)
    }

    fn discriminator_step(&mut self, ds: &Dataset) -> Result<crate::dpsgd::DiscriminatorStepStats> {
        let idx = self.next_batch();
        let (real_tabular, real_sequence) = ds.batch(&idx)?;
        let z = self.latent(idx.len())?;
        let (fake_tabular, fake_sequence) = generator_forward(&self.generator, &z)?;
        let fake_sequence = fake_sequence.reshape(&[idx.len(), self.net.max_len * SEQ_FEATURES])?;
        let batch = DiscriminatorBatch {
            real_tabular,
            real_sequence,
            fake_tabular,
            fake_sequence,
        };
        let (mut next, stats) = dp_discriminator_step(&self.discriminator, &batch, self.config.loss, &mut self.dp)?;
        self.cursor.d_steps += 1;
        if !stats.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: self.cursor.d_steps,
                phase: "discriminator",
            });
        }
        if self.config.loss == LossVariant::Wasserstein {
            clip_weights(&mut next, self.config.weight_clip);
        }
        self.discriminator = next;
        Ok(stats)
    }

    /// Runs one iteration: up to `k` discriminator steps, then a generator
    /// step if all `k` ran. Returns the generator step's record, or `None`
    /// when training ended before a generator step.
    pub fn step(&mut self, ds: &Dataset) -> Result<Option<StepRecord>> {
        if ds.len() != self.cursor.permutation.len() {
            return Err(Error::Parameter("dataset changed during training".into()));
        }
        let mut stats = Vec::with_capacity(self.config.d_steps);
        while stats.len() < self.config.d_steps && !self.is_finished() {
            stats.push(self.discriminator_step(ds)?);
        }
        if stats.len() < self.config.d_steps {
            return Ok(None);
        }
        let z = self.latent(self.config.batch_size)?;
        let (g_loss, grads) = generator_step(&self.generator, &self.discriminator, &z, self.config.loss)?;
        self.cursor.g_steps += 1;
        if !g_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: self.cursor.g_steps,
                phase: "generator",
            });
        }
        rmsprop_step(&mut self.rmsprop, self.generator.tensors_mut(), &grads)?;
        let k = stats.len() as f64;
        let record = StepRecord {
            step: self.cursor.g_steps,
            d_loss: stats.iter().map(|s| s.loss).sum::<f64>() / k,
            g_loss,
            preclip_mean: stats.iter().map(|s| s.preclip_mean).sum::<f64>() / k,
            preclip_max: stats.iter().map(|s| s.preclip_max).fold(0.0, f64::max),
            millis: self.started.elapsed().as_millis() as u64,
        };
        self.history.records.push(record.clone());
        Ok(Some(record))
    }

    /// Runs at most `n` iterations.
    pub fn run_iterations(&mut self, ds: &Dataset, n: usize) -> Result<()> {
        for _ in 0..n {
            if self.is_finished() {
                break;
            }
            self.step(ds)?;
        }
        Ok(())
    }

    pub fn run(&mut self, ds: &Dataset) -> Result<()> {
        while !self.is_finished() {
            self.step(ds)?;
        }
        Ok(())
    }
}

/// Trains from scratch for `cfg.epochs` epochs.
pub fn train(
    dataset: &Dataset,
    net: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(GeneratorParams, DiscriminatorParams, TrainHistory)> {
    let mut t = Trainer::new(dataset, net.clone(), cfg.clone())?;
    t.run(dataset)?;
    Ok((t.generator, t.discriminator, t.history))
}

const SAMPLE_CHUNK: usize = 512;

/// Draws `n` latent vectors from `N(0, I)` under `seed` and decodes the
/// generator output into records with ids `S000001…`.
pub fn sample(g: &GeneratorParams, codec: &Codec, n: usize, seed: u64) -> Result<Vec<RawRecord>> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be >= 1".into()));
    }
    if g.tabular_width() != codec.tabular_width() || g.repeat != codec.max_len() {
        return Err(Error::dim(
            "sample",
            &[g.tabular_width(), g.repeat],
            &[codec.tabular_width(), codec.max_len()],
        ));
    }
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::with_capacity(n);
    let width = g.repeat * SEQ_FEATURES;
    while out.len() < n {
        let rows = (n - out.len()).min(SAMPLE_CHUNK);
        let z = gaussian(&mut rng, &[rows, g.latent_dim], 0.0, 1.0)?;
        let (tab, seq) = generator_forward(g, &z)?;
        for i in 0..rows {
            let agent = EncodedAgent {
                id: format!("S{:06}", out.len() + 1),
                tabular: tab.row(i).to_vec(),
                sequence: seq.data()[i * width..(i + 1) * width].to_vec(),
                seq_len: 0,
            };
            out.push(codec.decode(&agent)?);
        }
    }
    Ok(out)
}
