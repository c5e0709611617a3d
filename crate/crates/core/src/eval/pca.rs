use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{Codec, RawRecord};
use crate::error::{Error, Result};

/// Components are unit eigenvectors of the correlation matrix in descending
/// eigenvalue order, signed so the largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Columns kept after dropping zero-variance ones.
    pub columns: Vec<String>,
    pub dropped: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalue shares over every component; sums to 1.
    pub explained_variance_ratio: Vec<f64>,
    /// `k` rows of length `columns.len()`.
    pub components: Vec<Vec<f64>>,
    /// `loadings[c][j] = components[c][j] · sqrt(eigenvalue c)`.
    pub loadings: Vec<Vec<f64>>,
    /// Standardized rows projected on the `k` components.
    pub scores: Vec<Vec<f64>>,
}

/// PCA of `rows` (one observation per row) on standardized columns, using
/// the sample standard deviation.
pub fn pca(rows: &[Vec<f64>], names: &[String], k: usize) -> Result<PcaResult> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Parameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    let p_all = names.len();
    if let Some(r) = rows.iter().find(|r| r.len() != p_all) {
        return Err(Error::dim("pca rows", &[r.len()], &[p_all]));
    }
    let mut keep = Vec::new();
    let (mut means, mut stds, mut dropped) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..p_all {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / (n - 1) as f64;
        let s = var.sqrt();
        if s > 1e-12 * (1.0 + m.abs()) {
            keep.push(j);
            means.push(m);
            stds.push(s);
        } else {
            dropped.push(names[j].clone());
        }
    }
    let p = keep.len();
    if k == 0 || k > p {
        return Err(Error::Parameter(format!(
            "requested {k} components from {p} non-constant columns"
        )));
    }
    let z = DMatrix::from_fn(n, p, |i, c| (rows[i][keep[c]] - means[c]) / stds[c]);
    let corr = (z.transpose() * &z) / (n - 1) as f64;
    let eig = SymmetricEigen::new(corr);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_variance_ratio = eigenvalues.iter().map(|e| e / total).collect();

    let mut components = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let lead = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
    }
    let loadings = components
        .iter()
        .zip(&eigenvalues)
        .map(|(v, e)| v.iter().map(|x| x * e.sqrt()).collect())
        .collect();
    let scores = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|v| v.iter().enumerate().map(|(c, x)| x * z[(i, c)]).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult {
        columns: keep.iter().map(|&j| names[j].clone()).collect(),
        dropped,
        means,
        stds,
        eigenvalues,
        explained_variance_ratio,
        components,
        loadings,
        scores,
    })
}

/// PCA on the encoded tabular block (one-hot attributes, scaled numerics
/// and residence) of `records`.
pub fn pca_records(codec: &Codec, records: &[RawRecord], k: usize) -> Result<PcaResult> {
    let rows = records.iter().map(|r| codec.encode_tabular(r)).collect::<Result<Vec<_>>>()?;
    pca(&rows, &codec.tabular_columns(), k)
}

impl PcaResult {
    fn write_matrix<W: Write>(writer: W, first: &str, header: &[String], rows: &[Vec<f64>], tag: &str) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut h = vec![first.to_string()];
        h.extend(header.iter().cloned());
        w.write_record(&h)?;
        for (i, r) in rows.iter().enumerate() {
            let mut row = vec![format!("{tag}{}", i + 1)];
            row.extend(r.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_components<W: Write>(&self, writer: W) -> Result<()> {
        Self::write_matrix(writer, "component", &self.columns, &self.components, "PC")
    }

    pub fn write_loadings<W: Write>(&self, writer: W) -> Result<()> {
        Self::write_matrix(writer, "component", &self.columns, &self.loadings, "PC")
    }

    pub fn write_scores<W: Write>(&self, writer: W) -> Result<()> {
        let header: Vec<String> = (1..=self.components.len()).map(|i| format!("PC{i}")).collect();
        Self::write_matrix(writer, "row", &header, &self.scores, "")
    }
}
