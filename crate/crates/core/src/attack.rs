//! White-box membership inference on a trained discriminator.
//!
//! The adversary scores each candidate record with the discriminator and
//! compares the score distributions of training members and held-out
//! records. Separation is summarized by the AUC of train versus validation
//! scores and by the shared-bin histograms.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nets::{DiscriminatorParams, LossVariant};
use crate::numcore::sigmoid;

pub const ATTACK_BINS: usize = 50;
const SCORE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub variant: LossVariant,
    pub train_scores: Vec<f64>,
    pub validation_scores: Vec<f64>,
    /// `ATTACK_BINS + 1` edges over the pooled score range.
    pub bin_edges: Vec<f64>,
    pub train_histogram: Vec<u64>,
    pub validation_histogram: Vec<u64>,
    pub auc: f64,
    pub train_peaks: usize,
    pub validation_peaks: usize,
    /// Share of the candidate pool that was used for training. Recorded for
    /// the report only; scoring does not use it.
    pub training_fraction: f64,
}

fn raw_scores(d: &DiscriminatorParams, ds: &Dataset, variant: LossVariant) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let chunks: Vec<Vec<f64>> = idx
        .par_chunks(SCORE_CHUNK)
        .map(|c| {
            let (tab, seq) = ds.batch(c)?;
            let logits = d.logits(&tab, &seq)?;
            Ok(match variant {
                LossVariant::Standard => logits.data().iter().map(|&l| sigmoid(l)).collect(),
                LossVariant::Wasserstein => logits.into_data(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Scores both sets and builds the report. Wasserstein critic values are
/// min-max rescaled to `[0, 1]` over the pooled scores.
pub fn mia_scores(
    d: &DiscriminatorParams,
    train: &Dataset,
    validation: &Dataset,
    variant: LossVariant,
) -> Result<AttackReport> {
    let mut t = raw_scores(d, train, variant)?;
    let mut v = raw_scores(d, validation, variant)?;
    if variant == LossVariant::Wasserstein {
        let (lo, hi) = t
            .iter()
            .chain(&v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let span = hi - lo;
        for s in t.iter_mut().chain(v.iter_mut()) {
            *s = if span > 0.0 { (*s - lo) / span } else { 0.5 };
        }
    }
    report_from_scores(variant, t, v)
}

pub fn report_from_scores(variant: LossVariant, train: Vec<f64>, validation: Vec<f64>) -> Result<AttackReport> {
    let auc = separability(&train, &validation)?;
    let (bin_edges, th, vh) = shared_histograms(&train, &validation, ATTACK_BINS);
    let n = (train.len() + validation.len()) as f64;
    Ok(AttackReport {
        variant,
        training_fraction: train.len() as f64 / n,
        train_peaks: peak_count(&th),
        validation_peaks: peak_count(&vh),
        train_histogram: th,
        validation_histogram: vh,
        bin_edges,
        auc,
        train_scores: train,
        validation_scores: validation,
    })
}

/// `P(train score > validation score)` with ties counted one half.
///
/// Counted exactly in half-units over all pairs.
pub fn separability(train: &[f64], validation: &[f64]) -> Result<f64> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Parameter("separability needs two nonempty score lists".into()));
    }
    if train.iter().chain(validation).any(|s| s.is_nan()) {
        return Err(Error::Parameter("scores contain NaN".into()));
    }
    let mut v = validation.to_vec();
    v.sort_by(f64::total_cmp);
    let mut half_units: u128 = 0;
    for &t in train {
        let less = v.partition_point(|&x| x < t);
        let not_greater = v.partition_point(|&x| x <= t);
        half_units += 2 * less as u128 + (not_greater - less) as u128;
    }
    Ok(half_units as f64 / (2 * train.len() as u128 * validation.len() as u128) as f64)
}

/// Equal-width bins over the pooled range. A degenerate range puts every
/// score in the first bin.
pub fn shared_histograms(a: &[f64], b: &[f64], bins: usize) -> (Vec<f64>, Vec<u64>, Vec<u64>) {
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(x, y), &s| (x.min(s), y.max(s)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * width }).collect();
    let count = |xs: &[f64]| {
        let mut c = vec![0u64; bins];
        for &x in xs {
            let i = if width > 0.0 { ((x - lo) / width).floor() as usize } else { 0 };
            c[i.min(bins - 1)] += 1;
        }
        c
    };
    (edges, count(a), count(b))
}

/// Number of local maxima, treating runs of equal counts as one bin.
pub fn peak_count(counts: &[u64]) -> usize {
    let mut runs: Vec<u64> = Vec::new();
    for &c in counts {
        if runs.last() != Some(&c) {
            runs.push(c);
        }
    }
    (0..runs.len())
        .filter(|&i| {
            runs[i] > 0
                && (i == 0 || runs[i - 1] < runs[i])
                && (i + 1 == runs.len() || runs[i + 1] < runs[i])
        })
        .count()
}

impl AttackReport {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["bin_lo", "bin_hi", "train_count", "validation_count"])?;
        for i in 0..self.train_histogram.len() {
            w.write_record([
                self.bin_edges[i].to_string(),
                self.bin_edges[i + 1].to_string(),
                self.train_histogram[i].to_string(),
                self.validation_histogram[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(separability(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(separability(&[0.1, 0.4, 0.7], &[0.1, 0.4, 0.7]).unwrap(), 0.5);
        assert_eq!(separability(&[0.5], &[0.5]).unwrap(), 0.5);
        assert!(separability(&[], &[0.5]).is_err());
    }

    #[test]
    fn constant_scores_collapse() {
        let r = report_from_scores(LossVariant::Standard, vec![0.5; 4], vec![0.5; 3]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.train_histogram[0], 4);
        assert_eq!(r.validation_histogram[0], 3);
        assert_eq!(r.train_histogram.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!((r.train_peaks, r.validation_peaks), (1, 1));
    }

    #[test]
    fn peaks() {
        assert_eq!(peak_count(&[0, 3, 1, 0, 2, 2, 0]), 2);
        assert_eq!(peak_count(&[1, 2, 3]), 1);
        assert_eq!(peak_count(&[0, 0]), 0);
    }
}
