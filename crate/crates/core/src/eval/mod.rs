//! Distributional utility audit of a synthetic population against a
//! reference: binned marginals, conditionals and joints compared by SRMSE,
//! Pearson correlation and R²; PCA of the encoded attributes; tour-segment
//! length distributions.

mod pca;
mod tours;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use pca::{pca, pca_records, PcaResult};
pub use tours::{tour_histogram, tour_lengths, TourLengthReport, TOUR_BIN_KM, TOUR_MAX_KM};

use crate::data::{RawRecord, SurveySchema, Value, Variable, VariableKind};
use crate::error::{Error, Result};

/// Default ceiling on the number of cells of a joint table.
pub const JOINT_BIN_CAP: usize = 1_000_000;

/// Binned counts. `probabilities` is `None` when the total count is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub variables: Vec<String>,
    /// One label per bin; tuple bins are joined with `|`.
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    pub probabilities: Option<Vec<f64>>,
}

impl Histogram {
    pub fn from_counts(variables: Vec<String>, labels: Vec<String>, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let probabilities =
            (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect());
        Self {
            variables,
            labels,
            counts,
            probabilities,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn probs(&self) -> Result<&[f64]> {
        self.probabilities
            .as_deref()
            .ok_or_else(|| Error::Parameter(format!("histogram over {:?} is empty", self.variables)))
    }

    fn check_same_bins(&self, other: &Histogram) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::Structural(format!(
                "bins of {:?} ({} bins) differ from {:?} ({} bins)",
                self.variables,
                self.n_bins(),
                other.variables,
                other.n_bins()
            )));
        }
        Ok(())
    }
}

/// Divisor `N_b` of the SRMSE formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SrmseNormalizer {
    /// Number of bins.
    #[default]
    Bins,
    /// A caller-supplied count, e.g. the number of agents.
    Fixed(usize),
}

impl SrmseNormalizer {
    fn value(self, bins: usize) -> f64 {
        match self {
            SrmseNormalizer::Bins => bins as f64,
            SrmseNormalizer::Fixed(n) => n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmseReport {
    pub srmse: f64,
    /// `None` when either count vector is constant.
    pub pearson: Option<f64>,
    /// `None` when the reference counts are constant.
    pub r_squared: Option<f64>,
    pub bins: usize,
}

/// `sqrt(Σ(π̂ − π)² / N_b) / (Σπ / N_b)` over probability vectors.
pub fn srmse_probs(estimated: &[f64], reference: &[f64], normalizer: SrmseNormalizer) -> Result<f64> {
    if estimated.len() != reference.len() {
        return Err(Error::Structural(format!(
            "{} estimated bins vs {} reference bins",
            estimated.len(),
            reference.len()
        )));
    }
    let nb = normalizer.value(reference.len());
    let mean = reference.iter().sum::<f64>() / nb;
    if !(nb > 0.0) || !(mean > 0.0) {
        return Err(Error::Parameter("SRMSE undefined for an empty reference".into()));
    }
    let sq: f64 = estimated.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / nb).sqrt() / mean)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `1 − SS_res / SS_tot` of `predicted` against `observed`.
pub fn r_squared(predicted: &[f64], observed: &[f64]) -> Option<f64> {
    if predicted.len() != observed.len() || observed.is_empty() {
        return None;
    }
    let m = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|o| (o - m) * (o - m)).sum();
    let ss_res: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot)
}

/// Compares two histograms with identical bins. Pearson and R² use counts,
/// with the estimated counts rescaled to the reference total.
pub fn srmse(estimated: &Histogram, reference: &Histogram) -> Result<SrmseReport> {
    srmse_with(estimated, reference, SrmseNormalizer::Bins)
}

pub fn srmse_with(estimated: &Histogram, reference: &Histogram, normalizer: SrmseNormalizer) -> Result<SrmseReport> {
    estimated.check_same_bins(reference)?;
    let value = srmse_probs(estimated.probs()?, reference.probs()?, normalizer)?;
    let factor = reference.total() as f64 / estimated.total() as f64;
    let est: Vec<f64> = estimated.counts.iter().map(|&c| c as f64 * factor).collect();
    let obs: Vec<f64> = reference.counts.iter().map(|&c| c as f64).collect();
    Ok(SrmseReport {
        srmse: value,
        pearson: pearson(&est, &obs),
        r_squared: r_squared(&est, &obs),
        bins: reference.n_bins(),
    })
}

/// Bin labels of an attribute: categories, or the declared numeric bins.
pub fn bin_labels(var: &Variable) -> Result<Vec<String>> {
    var.bin_labels()
        .ok_or_else(|| Error::schema(&var.name, "variable is neither categorical nor binned"))
}

fn bin_index(var: &Variable, value: &Value) -> Result<usize> {
    match (&var.kind, value) {
        (VariableKind::Binary { labels } | VariableKind::Categorical { labels }, Value::Label(l)) => labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::schema(&var.name, format!("unknown label `{l}`"))),
        (VariableKind::Numeric { bins, .. }, Value::Number(x)) if bins.len() >= 2 => {
            let last = bins.len() - 2;
            if *x < bins[0] || *x > bins[last + 1] || !x.is_finite() {
                return Err(Error::schema(&var.name, format!("value {x} outside the binned range")));
            }
            Ok(bins.windows(2).position(|w| *x < w[1]).unwrap_or(last))
        }
        _ => Err(Error::schema(&var.name, "variable is neither categorical nor binned")),
    }
}

fn resolve<'a>(schema: &'a SurveySchema, names: &[&str]) -> Result<Vec<(usize, &'a Variable, Vec<String>)>> {
    names
        .iter()
        .map(|n| {
            let (i, v) = schema.attribute(n)?;
            Ok((i, v, bin_labels(v)?))
        })
        .collect()
}

/// One bin per category (or declared numeric bin) of `variable`.
pub fn marginal(schema: &SurveySchema, records: &[RawRecord], variable: &str) -> Result<Histogram> {
    joint_with_cap(schema, records, &[variable], usize::MAX)
}

/// Full cross-product table over `variables`, zero cells included, in
/// row-major order (last variable fastest).
pub fn joint(schema: &SurveySchema, records: &[RawRecord], variables: &[&str]) -> Result<Histogram> {
    joint_with_cap(schema, records, variables, JOINT_BIN_CAP)
}

pub fn joint_with_cap(
    schema: &SurveySchema,
    records: &[RawRecord],
    variables: &[&str],
    cap: usize,
) -> Result<Histogram> {
    if variables.is_empty() {
        return Err(Error::Parameter("joint needs at least one variable".into()));
    }
    let vars = resolve(schema, variables)?;
    let bins: u128 = vars.iter().map(|(_, _, l)| l.len() as u128).product();
    if bins > cap as u128 {
        return Err(Error::CombinatorialBlowup { bins, cap });
    }
    let dims: Vec<usize> = vars.iter().map(|(_, _, l)| l.len()).collect();
    let mut counts = vec![0u64; bins as usize];
    for r in records {
        let mut flat = 0;
        for ((i, v, _), d) in vars.iter().zip(&dims) {
            let value = r
                .attributes
                .get(*i)
                .ok_or_else(|| Error::schema(&v.name, "record is missing this attribute"))?;
            flat = flat * d + bin_index(v, value)?;
        }
        counts[flat] += 1;
    }
    let mut labels = Vec::with_capacity(counts.len());
    for mut flat in 0..counts.len() {
        let mut parts = vec![""; dims.len()];
        for d in (0..dims.len()).rev() {
            parts[d] = vars[d].2[flat % dims[d]].as_str();
            flat /= dims[d];
        }
        labels.push(parts.join("|"));
    }
    Ok(Histogram::from_counts(
        variables.iter().map(|s| s.to_string()).collect(),
        labels,
        counts,
    ))
}

/// `p(a | b)`: one column per value of `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditional {
    pub target: String,
    pub given: String,
    pub target_labels: Vec<String>,
    pub given_labels: Vec<String>,
    /// `counts[b][a]`.
    pub counts: Vec<Vec<u64>>,
    /// `None` for a conditioning value without support.
    pub columns: Vec<Option<Vec<f64>>>,
}

pub fn conditional(schema: &SurveySchema, records: &[RawRecord], target: &str, given: &str) -> Result<Conditional> {
    let h = joint(schema, records, &[given, target])?;
    let vars = resolve(schema, &[target, given])?;
    let (na, nb) = (vars[0].2.len(), vars[1].2.len());
    let counts: Vec<Vec<u64>> = h.counts.chunks(na).map(<[u64]>::to_vec).collect();
    let columns = counts
        .iter()
        .map(|c| {
            let total: u64 = c.iter().sum();
            (total > 0).then(|| c.iter().map(|&x| x as f64 / total as f64).collect())
        })
        .collect();
    debug_assert_eq!(counts.len(), nb);
    Ok(Conditional {
        target: target.into(),
        given: given.into(),
        target_labels: vars[0].2.clone(),
        given_labels: vars[1].2.clone(),
        counts,
        columns,
    })
}

/// SRMSE over the stacked `p(a | b)` columns that have support in both
/// tables. Columns without support on either side are skipped.
pub fn srmse_conditional(estimated: &Conditional, reference: &Conditional) -> Result<SrmseReport> {
    if estimated.target_labels != reference.target_labels || estimated.given_labels != reference.given_labels {
        return Err(Error::Structural(format!(
            "p({}|{}) tables have different bins",
            reference.target, reference.given
        )));
    }
    let (mut est, mut refp, mut est_c, mut ref_c) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for b in 0..reference.columns.len() {
        if let (Some(e), Some(r)) = (&estimated.columns[b], &reference.columns[b]) {
            est.extend_from_slice(e);
            refp.extend_from_slice(r);
            let r_total: u64 = reference.counts[b].iter().sum();
            est_c.extend(e.iter().map(|p| p * r_total as f64));
            ref_c.extend(reference.counts[b].iter().map(|&c| c as f64));
        }
    }
    if refp.is_empty() {
        return Err(Error::Parameter("no conditioning value has support in both tables".into()));
    }
    Ok(SrmseReport {
        srmse: srmse_probs(&est, &refp, SrmseNormalizer::Bins)?,
        pearson: pearson(&est_c, &ref_c),
        r_squared: r_squared(&est_c, &ref_c),
        bins: refp.len(),
    })
}

/// `bin,reference_count,synthetic_count,reference_p,synthetic_p` rows.
pub fn write_comparison_csv<W: Write>(writer: W, reference: &Histogram, synthetic: &Histogram) -> Result<()> {
    reference.check_same_bins(synthetic)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["bin", "reference_count", "synthetic_count", "reference_p", "synthetic_p"])?;
    let p = |h: &Histogram, i: usize| h.probabilities.as_ref().map_or(String::new(), |v| v[i].to_string());
    for i in 0..reference.n_bins() {
        w.write_record([
            reference.labels[i].clone(),
            reference.counts[i].to_string(),
            synthetic.counts[i].to_string(),
            p(reference, i),
            p(synthetic, i),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Names of the attributes that can be binned.
pub fn binnable_attributes(schema: &SurveySchema) -> Vec<String> {
    schema
        .attributes
        .iter()
        .filter(|v| v.bin_labels().is_some())
        .map(|v| v.name.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_fixture;

    fn h(probs: &[f64]) -> Histogram {
        let counts = probs.iter().map(|p| (p * 1000.0).round() as u64).collect();
        Histogram::from_counts(
            vec!["v".into()],
            (0..probs.len()).map(|i| i.to_string()).collect(),
            counts,
        )
    }

    #[test]
    fn srmse_hand_values() {
        let r = srmse(&h(&[0.5, 0.5]), &h(&[0.5, 0.5])).unwrap();
        assert_eq!(r.srmse, 0.0);
        assert_eq!(r.pearson, None);
        let r = srmse(&h(&[0.6, 0.4]), &h(&[0.5, 0.5])).unwrap();
        assert!((r.srmse - 0.2).abs() < 1e-12);
        let r = srmse(&h(&[0.0, 1.0]), &h(&[1.0, 0.0])).unwrap();
        assert!((r.srmse - 2.0).abs() < 1e-12);
        let r = srmse(&h(&[0.2, 0.3, 0.5]), &h(&[0.2, 0.3, 0.5])).unwrap();
        assert_eq!((r.srmse, r.pearson, r.r_squared), (0.0, Some(1.0), Some(1.0)));
    }

    #[test]
    fn agent_normalizer() {
        let v = srmse_probs(&[0.6, 0.4], &[0.5, 0.5], SrmseNormalizer::Fixed(4)).unwrap();
        let oracle = ((0.01 + 0.01) / 4.0f64).sqrt() / (1.0 / 4.0);
        assert!((v - oracle).abs() < 1e-15);
    }

    #[test]
    fn bin_mismatch_is_structural() {
        assert!(matches!(srmse(&h(&[0.5, 0.5]), &h(&[1.0])), Err(Error::Structural(_))));
    }

    #[test]
    fn marginal_counting() {
        let f = synth_fixture(1, 4).unwrap();
        let mut recs = f.records.clone();
        for (r, s) in recs.iter_mut().zip(["M", "M", "F", "M"]) {
            r.attributes[1] = Value::Label(s.into());
        }
        let m = marginal(&f.schema, &recs, "P_SEXE").unwrap();
        assert_eq!(m.labels, vec!["M", "F"]);
        assert_eq!(m.probabilities.unwrap(), vec![0.75, 0.25]);
        let empty = marginal(&f.schema, &[], "P_SEXE").unwrap();
        assert_eq!(empty.counts, vec![0, 0]);
        assert!(empty.probabilities.is_none());
        assert!(matches!(marginal(&f.schema, &recs, "NOPE"), Err(Error::Schema { .. })));
    }

    #[test]
    fn joint_and_conditional_shapes() {
        let f = synth_fixture(2, 300).unwrap();
        let j = joint(&f.schema, &f.records, &["P_SEXE", "PERMIT"]).unwrap();
        assert_eq!(j.n_bins(), 4);
        assert_eq!(j.total(), 300);
        assert_eq!(j.labels[1], "M|Licence");
        let single = joint(&f.schema, &f.records, &["P_STATUT"]).unwrap();
        assert_eq!(single, marginal(&f.schema, &f.records, "P_STATUT").unwrap());
        let c = conditional(&f.schema, &f.records, "PERMIT", "P_AGE").unwrap();
        for col in c.columns.iter().flatten() {
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            joint_with_cap(&f.schema, &f.records, &["P_AGE", "P_STATUT"], 10),
            Err(Error::CombinatorialBlowup { bins: 36, cap: 10 })
        ));
    }

    #[test]
    fn functional_dependence_gives_unit_columns() {
        let f = synth_fixture(3, 200).unwrap();
        let mut recs = f.records.clone();
        for r in &mut recs {
            let sex = r.attributes[1].as_label().unwrap().to_string();
            r.attributes[4] = Value::Label(if sex == "M" { "Licence" } else { "None" }.into());
        }
        let c = conditional(&f.schema, &recs, "PERMIT", "P_SEXE").unwrap();
        for col in c.columns.iter().flatten() {
            assert!(col.iter().filter(|&&p| p == 1.0).count() == 1);
        }
    }
}
