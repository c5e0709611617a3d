//! Python bindings for `diarygan`.
//!
//! ```python
//! import diarygan_py as dg
//! ds = dg.Dataset.fixture(seed=1, count=500, kind="toy")
//! t = dg.Trainer(ds, net="compact", noise_multiplier=1.0, epochs=2)
//! t.run()
//! t.save("model.dpct")
//! csv_text = dg.sample_csv("model.dpct", 100, seed=0)
//! ```

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use diarygan::data::{self, Codec, SurveySchema};
use diarygan::dpsgd::PrivacyConfig;
use diarygan::eval::{self, SrmseNormalizer};
use diarygan::nets::{LossVariant, NetConfig};
use diarygan::trainer::{self, StepRecord, TrainConfig};
use diarygan::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        Error::Integrity { .. } | Error::Version { .. } | Error::NonFiniteLoss { .. } | Error::Csv(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn schema_from(name: &str, max_len: usize) -> PyResult<SurveySchema> {
    match name {
        "survey" => Ok(SurveySchema::survey(max_len)),
        "toy" => Ok(data::toy_schema(max_len)),
        json => serde_json::from_str(json).map_err(|e| PyValueError::new_err(format!("schema: {e}"))),
    }
}

fn parse_loss(s: &str) -> PyResult<LossVariant> {
    match s {
        "standard" => Ok(LossVariant::Standard),
        "wasserstein" => Ok(LossVariant::Wasserstein),
        _ => Err(PyValueError::new_err(format!("unknown loss `{s}`"))),
    }
}

fn csv_string(schema: &SurveySchema, records: &[data::RawRecord]) -> PyResult<String> {
    let mut buf = Vec::new();
    data::write_csv(&mut buf, schema, records).map_err(py_err)?;
    String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// An encoded population of persons.
#[pyclass(module = "diarygan_py", skip_from_py_object)]
#[derive(Clone)]
pub struct Dataset {
    inner: data::Dataset,
}

#[pymethods]
impl Dataset {
    /// Reads a dataset file written by `save` or the CLI.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: data::read_dataset(&path).map_err(py_err)? })
    }

    /// Reads a diary CSV, keeps home-based tours and encodes them.
    /// `schema` is `"survey"`, `"toy"` or a schema JSON string.
    #[staticmethod]
    #[pyo3(signature = (path, schema = "survey", max_len = 20))]
    fn from_csv(path: PathBuf, schema: &str, max_len: usize) -> PyResult<Self> {
        let codec = Codec::new(schema_from(schema, max_len)?).map_err(py_err)?;
        let f = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let records = data::filter_home_based(data::read_csv(f, codec.schema()).map_err(py_err)?);
        let inner = data::Dataset::from_records(codec, &records, path.display().to_string()).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Synthetic survey (`kind="survey"`) or toy population (`kind="toy"`).
    #[staticmethod]
    #[pyo3(signature = (seed, count, kind = "survey"))]
    fn fixture(seed: u64, count: usize, kind: &str) -> PyResult<Self> {
        let f = match kind {
            "survey" => data::synth_fixture(seed, count).map_err(py_err)?,
            "toy" => data::toy_fixture(seed, count),
            _ => return Err(PyValueError::new_err(format!("unknown fixture kind `{kind}`"))),
        };
        let codec = Codec::new(f.schema).map_err(py_err)?;
        let inner = data::Dataset::from_records(codec, &f.records, format!("fixture seed {seed}")).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        data::write_dataset(&path, &self.inner).map_err(py_err)
    }

    /// Returns `(train, validation)`.
    fn split(&self, fraction: f64, seed: u64) -> PyResult<(Dataset, Dataset)> {
        let (a, b) = self.inner.split(fraction, seed).map_err(py_err)?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    fn to_csv(&self) -> PyResult<String> {
        let records = self.inner.records().map_err(py_err)?;
        csv_string(self.inner.schema(), &records)
    }

    fn schema_json(&self) -> PyResult<String> {
        serde_json::to_string(self.inner.schema()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn tabular_width(&self) -> usize {
        self.inner.codec.tabular_width()
    }

    #[getter]
    fn max_len(&self) -> usize {
        self.inner.codec.max_len()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(len={}, provenance={:?})", self.inner.len(), self.inner.provenance)
    }
}

fn step_dict<'py>(py: Python<'py>, r: &StepRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", r.step)?;
    d.set_item("d_loss", r.d_loss)?;
    d.set_item("g_loss", r.g_loss)?;
    d.set_item("preclip_mean", r.preclip_mean)?;
    d.set_item("preclip_max", r.preclip_max)?;
    d.set_item("millis", r.millis)?;
    Ok(d)
}

/// Private GAN training loop bound to one dataset.
#[pyclass(module = "diarygan_py")]
pub struct Trainer {
    inner: trainer::Trainer,
    dataset: data::Dataset,
}

#[pymethods]
impl Trainer {
    #[new]
    #[pyo3(signature = (
        dataset, *, net = "compact", noise_multiplier = 0.0, clip = 1.0, private = true,
        loss = "standard", epochs = 200, batch = 64, d_steps = 1, lr_d = 5e-4, lr_g = 5e-4,
        weight_clip = 0.01, seed = 0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        dataset: &Dataset,
        net: &str,
        noise_multiplier: f64,
        clip: f64,
        private: bool,
        loss: &str,
        epochs: usize,
        batch: usize,
        d_steps: usize,
        lr_d: f64,
        lr_g: f64,
        weight_clip: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let ds = dataset.inner.clone();
        let heads = ds.codec.head_specs();
        let net = match net {
            "paper" => NetConfig::paper(heads, ds.codec.max_len()),
            "compact" => NetConfig::compact(heads, ds.codec.max_len()),
            _ => return Err(PyValueError::new_err(format!("unknown net preset `{net}`"))),
        };
        let privacy = if private {
            PrivacyConfig::new(clip, noise_multiplier).map_err(py_err)?
        } else {
            PrivacyConfig::disabled()
        };
        let cfg = TrainConfig {
            epochs,
            batch_size: batch,
            d_steps,
            loss: parse_loss(loss)?,
            weight_clip,
            privacy,
            lr_discriminator: lr_d,
            lr_generator: lr_g,
            seed,
            ..TrainConfig::default()
        };
        let inner = trainer::Trainer::new(&ds, net, cfg).map_err(py_err)?;
        Ok(Self { inner, dataset: ds })
    }

    /// Continues a saved run on the dataset it was trained on.
    #[staticmethod]
    fn resume(path: PathBuf, dataset: &Dataset) -> PyResult<Self> {
        let ckpt = trainer::load_checkpoint(&path).map_err(py_err)?;
        let ds = dataset.inner.clone();
        let inner = trainer::Trainer::from_checkpoint(ckpt, &ds).map_err(py_err)?;
        Ok(Self { inner, dataset: ds })
    }

    /// One generator iteration; `None` once all epochs are done.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        match self.inner.step(&self.dataset).map_err(py_err)? {
            Some(r) => Ok(Some(step_dict(py, &r)?)),
            None => Ok(None),
        }
    }

    fn run_iterations(&mut self, n: usize) -> PyResult<()> {
        self.inner.run_iterations(&self.dataset, n).map_err(py_err)
    }

    fn run(&mut self) -> PyResult<()> {
        self.inner.run(&self.dataset).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        trainer::save_checkpoint(&path, &self.inner.checkpoint(&self.dataset.codec)).map_err(py_err)
    }

    fn history<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.history.records.iter().map(|r| step_dict(py, r)).collect()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.is_finished()
    }

    /// Synthetic persons from the current generator, as diary CSV text.
    fn sample_csv(&self, count: usize, seed: u64) -> PyResult<String> {
        let records = trainer::sample(&self.inner.generator, &self.dataset.codec, count, seed).map_err(py_err)?;
        csv_string(self.dataset.schema(), &records)
    }
}

/// Synthetic persons from a checkpoint file, as diary CSV text.
#[pyfunction]
#[pyo3(signature = (checkpoint, count, seed = 0))]
fn sample_csv(checkpoint: PathBuf, count: usize, seed: u64) -> PyResult<String> {
    let ckpt = trainer::load_checkpoint(&checkpoint).map_err(py_err)?;
    let codec = Codec::new(ckpt.schema.clone()).map_err(py_err)?;
    let records = trainer::sample(&ckpt.generator, &codec, count, seed).map_err(py_err)?;
    csv_string(codec.schema(), &records)
}

/// SRMSE between two probability vectors, normalized by the bin count.
#[pyfunction]
fn srmse(estimated: Vec<f64>, reference: Vec<f64>) -> PyResult<f64> {
    eval::srmse_probs(&estimated, &reference, SrmseNormalizer::Bins).map_err(py_err)
}

/// Marginal SRMSE per binnable attribute of a synthetic CSV against a
/// reference dataset.
#[pyfunction]
fn marginal_srmse<'py>(py: Python<'py>, real: &Dataset, synthetic_csv: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let schema = real.inner.schema();
    let reference = real.inner.records().map_err(py_err)?;
    let f = std::fs::File::open(&synthetic_csv).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let synthetic = data::read_csv(f, schema).map_err(py_err)?;
    let out = PyDict::new(py);
    for v in eval::binnable_attributes(schema) {
        let est = eval::marginal(schema, &synthetic, &v).map_err(py_err)?;
        let refh = eval::marginal(schema, &reference, &v).map_err(py_err)?;
        out.set_item(&v, eval::srmse(&est, &refh).map_err(py_err)?.srmse)?;
    }
    Ok(out)
}

/// PCA on standardized columns. Returns components, eigenvalues and
/// explained-variance ratios.
#[pyfunction]
fn pca<'py>(py: Python<'py>, rows: Vec<Vec<f64>>, names: Vec<String>, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = eval::pca(&rows, &names, k).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("columns", r.columns)?;
    d.set_item("dropped", r.dropped)?;
    d.set_item("components", r.components)?;
    d.set_item("eigenvalues", r.eigenvalues)?;
    d.set_item("explained_variance_ratio", r.explained_variance_ratio)?;
    d.set_item("scores", r.scores)?;
    Ok(d)
}

/// `P(train score > validation score)`, ties counted one half.
#[pyfunction]
fn separability(train: Vec<f64>, validation: Vec<f64>) -> PyResult<f64> {
    diarygan::attack::separability(&train, &validation).map_err(py_err)
}

/// Membership inference with a checkpoint's discriminator.
#[pyfunction]
fn attack<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    train: &Dataset,
    validation: &Dataset,
) -> PyResult<Bound<'py, PyDict>> {
    let ckpt = trainer::load_checkpoint(&checkpoint).map_err(py_err)?;
    let r = diarygan::attack::mia_scores(&ckpt.discriminator, &train.inner, &validation.inner, ckpt.train.loss)
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("auc", r.auc)?;
    d.set_item("train_scores", r.train_scores)?;
    d.set_item("validation_scores", r.validation_scores)?;
    d.set_item("bin_edges", r.bin_edges)?;
    d.set_item("train_histogram", r.train_histogram)?;
    d.set_item("validation_histogram", r.validation_histogram)?;
    Ok(d)
}

#[pymodule]
fn diarygan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Trainer>()?;
    m.add_function(wrap_pyfunction!(sample_csv, m)?)?;
    m.add_function(wrap_pyfunction!(srmse, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_srmse, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    m.add_function(wrap_pyfunction!(separability, m)?)?;
    m.add_function(wrap_pyfunction!(attack, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
