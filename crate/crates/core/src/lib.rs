//! Differentially private synthesis of activity diaries.
//!
//! A composite GAN learns person-level socioeconomic attributes (tabular
//! branch) together with home-based trip chains (sequence branch). The
//! discriminator is trained with per-example gradient clipping and Gaussian
//! noise; the generator with RMSProp. Synthetic populations are audited with
//! binned-distribution SRMSE, PCA, tour-length histograms and a white-box
//! membership-inference attack on the discriminator.
//!
//! Module map:
//!
//! - [`numcore`]: dense tensors, define-by-run reverse-mode tape, seeded RNG.
//! - [`nets`]: dense/LSTM layers and the two-branch generator/discriminator.
//! - [`dpsgd`]: per-example clipping, noise injection, DP-SGD and RMSProp.
//! - [`data`]: survey schema, reversible codec, tour filtering, fixtures, files.
//! - [`trainer`]: adversarial loop, sampling, checkpoints.
//! - [`eval`]: marginals, conditionals, joints, SRMSE, PCA, tour lengths.
//! - [`attack`]: membership-inference scores and separability.
//! - [`cli`]: the `diarygan` command-line front end.

pub mod attack;
pub mod cli;
pub mod container;
pub mod data;
pub mod dpsgd;
pub mod error;
pub mod eval;
pub mod nets;
pub mod numcore;
pub mod trainer;

pub use error::{Error, Result};
