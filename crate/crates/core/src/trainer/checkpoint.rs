//! Checkpoint file (magic `DPCT`, version 1). Sections in order:
//!
//! - `config`: UTF-8 JSON object with `net`, `train`, `schema` and `cursor`;
//! - `rng`: main then noise stream, each u64 seed, u64 stream, u64 low and
//!   u64 high word of the word position, u32 spare flag, f64 spare;
//! - `generator`, `discriminator`: tensor lists in `tensors()` order;
//! - `rmsprop`: f64 learning rate, f64 decay, f64 eps, tensor list.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cursor, TrainConfig};
use crate::container::{Container, PayloadReader, PayloadWriter};
use crate::data::SurveySchema;
use crate::dpsgd::RmspropState;
use crate::error::{Error, Result};
use crate::nets::{init_params, DiscriminatorParams, GeneratorParams, NetConfig};
use crate::numcore::{RngState, SeededRng, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"DPCT";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: NetConfig,
    pub schema: SurveySchema,
    pub train: TrainConfig,
    pub generator: GeneratorParams,
    pub discriminator: DiscriminatorParams,
    pub rmsprop: RmspropState,
    pub main_rng: RngState,
    pub noise_rng: RngState,
    pub cursor: Cursor,
}

#[derive(Serialize, Deserialize)]
struct ConfigSection {
    net: NetConfig,
    train: TrainConfig,
    schema: SurveySchema,
    cursor: Cursor,
}

fn write_rng(w: &mut PayloadWriter, s: &RngState) {
    w.u64(s.seed)
        .u64(s.stream)
        .u64(s.word_pos as u64)
        .u64((s.word_pos >> 64) as u64)
        .u32(u32::from(s.spare.is_some()))
        .f64(s.spare.unwrap_or(0.0));
}

fn read_rng(r: &mut PayloadReader) -> Result<RngState> {
    let seed = r.u64()?;
    let stream = r.u64()?;
    let lo = r.u64()? as u128;
    let hi = r.u64()? as u128;
    let has_spare = r.u32()?;
    let spare = r.f64()?;
    Ok(RngState {
        seed,
        stream,
        word_pos: lo | (hi << 64),
        spare: (has_spare != 0).then_some(spare),
    })
}

fn fill(target: Vec<&mut Tensor>, source: Vec<Tensor>, what: &str) -> Result<()> {
    if target.len() != source.len() {
        return Err(Error::Integrity {
            offset: 0,
            message: format!("{what}: {} tensors stored, network has {}", source.len(), target.len()),
        });
    }
    for (t, s) in target.into_iter().zip(source) {
        if t.shape() != s.shape() {
            return Err(Error::Integrity {
                offset: 0,
                message: format!("{what}: stored shape {:?}, network expects {:?}", s.shape(), t.shape()),
            });
        }
        *t = s;
    }
    Ok(())
}

impl Checkpoint {
    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        let config = ConfigSection {
            net: self.net.clone(),
            train: self.train.clone(),
            schema: self.schema.clone(),
            cursor: self.cursor.clone(),
        };
        c.push("config", serde_json::to_vec(&config)?);
        let mut w = PayloadWriter::new();
        write_rng(&mut w, &self.main_rng);
        write_rng(&mut w, &self.noise_rng);
        c.push("rng", w.finish());
        let mut w = PayloadWriter::new();
        w.tensors(self.generator.tensors());
        c.push("generator", w.finish());
        let mut w = PayloadWriter::new();
        w.tensors(self.discriminator.tensors());
        c.push("discriminator", w.finish());
        let mut w = PayloadWriter::new();
        w.f64(self.rmsprop.learning_rate)
            .f64(self.rmsprop.decay)
            .f64(self.rmsprop.eps)
            .tensors(&self.rmsprop.mean_square);
        c.push("rmsprop", w.finish());
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let config: ConfigSection = serde_json::from_slice(c.section("config")?)?;
        config.net.validate()?;
        config.schema.validate()?;
        let mut r = PayloadReader::new(c.section("rng")?);
        let main_rng = read_rng(&mut r)?;
        let noise_rng = read_rng(&mut r)?;

        let (mut generator, mut discriminator) = init_params(&config.net, &mut SeededRng::new(0))?;
        fill(generator.tensors_mut(), PayloadReader::new(c.section("generator")?).tensors()?, "generator")?;
        fill(
            discriminator.tensors_mut(),
            PayloadReader::new(c.section("discriminator")?).tensors()?,
            "discriminator",
        )?;
        let mut r = PayloadReader::new(c.section("rmsprop")?);
        let learning_rate = r.f64()?;
        let decay = r.f64()?;
        let eps = r.f64()?;
        let mean_square = r.tensors()?;
        let mut rmsprop = RmspropState::new(learning_rate, decay, &generator.tensors());
        rmsprop.eps = eps;
        fill(rmsprop.mean_square.iter_mut().collect(), mean_square, "rmsprop")?;
        Ok(Self {
            net: config.net,
            schema: config.schema,
            train: config.train,
            generator,
            discriminator,
            rmsprop,
            main_rng,
            noise_rng,
            cursor: config.cursor,
        })
    }
}

/// Writes atomically: a truncated or failed write never replaces `path`.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.to_container()?.write_atomic(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let c = Container::read(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    Checkpoint::from_container(&c)
}
