//! `diarygan` command-line front end.
//!
//! Every subcommand writes into an output directory and leaves a
//! `manifest.json` beside its outputs. Options can also come from a
//! `key = value` file given with `--config`; flags on the command line win.
//! `DIARYGAN_THREADS` sets the worker thread count.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 runtime or
//! integrity error.

mod config;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attack::mia_scores;
use crate::data::{
    filter_home_based, read_csv, read_dataset, synth_fixture, toy_fixture, write_csv, write_dataset, Codec, Dataset,
    SurveySchema,
};
use crate::dpsgd::PrivacyConfig;
use crate::error::Error;
use crate::eval::{
    binnable_attributes, conditional, joint, marginal, pca_records, srmse_conditional, srmse_with, tour_lengths,
    write_comparison_csv, Histogram, SrmseNormalizer, SrmseReport,
};
use crate::nets::{LossVariant, NetConfig};
use crate::trainer::{load_checkpoint, sample, save_checkpoint, TrainConfig, Trainer};

pub const THREADS_ENV: &str = "DIARYGAN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "diarygan", version, about = "Private synthesis of activity-diary populations")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate the synthetic stand-in survey with its exact joint.
    Fixture(FixtureArgs),
    /// Filter and encode a diary CSV into a dataset file.
    Preprocess(PreprocessArgs),
    /// Train the private GAN on a dataset file.
    Train(TrainArgs),
    /// Draw synthetic persons from a checkpoint.
    Sample(SampleArgs),
    /// Compare a synthetic CSV with a reference dataset.
    Evaluate(EvaluateArgs),
    /// Membership inference against a checkpoint's discriminator.
    Attack(AttackArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKind {
    Survey,
    Toy,
}

#[derive(Debug, Args, Serialize)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = FixtureKind::Survey)]
    pub kind: FixtureKind,
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` option file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    /// Diary CSV, one row per trip.
    #[arg(long)]
    pub input: PathBuf,
    /// `survey`, `toy`, or a schema JSON file.
    #[arg(long, default_value = "survey")]
    pub schema: String,
    #[arg(long, default_value_t = 20)]
    pub max_len: usize,
    /// Also write a train/validation split with this training fraction.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Standard,
    Wasserstein,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NetPreset {
    /// Published layer widths.
    Paper,
    /// Small widths for desk runs.
    Compact,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Noise standard deviation as a multiple of the clipping bound.
    #[arg(long, default_value_t = 0.0)]
    pub noise_multiplier: f64,
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    /// Train without clipping or noise.
    #[arg(long)]
    pub no_privacy: bool,
    #[arg(long, value_enum, default_value_t = LossArg::Standard)]
    pub loss: LossArg,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// Discriminator steps per generator step.
    #[arg(long, default_value_t = 1)]
    pub d_steps: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub lr_d: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub lr_g: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_clip: f64,
    #[arg(long, value_enum, default_value_t = NetPreset::Paper)]
    pub net: NetPreset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continue from a checkpoint trained on the same dataset.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many generator iterations in this invocation.
    #[arg(long)]
    pub stop_after: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Marginals,
    Conditionals,
    Joint,
    Pca,
    Tours,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerArg {
    /// Divide by the number of bins.
    Bins,
    /// Divide by the number of reference agents.
    Agents,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Reference dataset file (carries the schema).
    #[arg(long)]
    pub real: PathBuf,
    /// Synthetic diary CSV in the same schema.
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Metric::Marginals, Metric::Conditionals, Metric::Joint, Metric::Pca, Metric::Tours])]
    pub metrics: Vec<Metric>,
    /// Variables of the joint table; defaults to every binnable attribute.
    #[arg(long, value_delimiter = ',')]
    pub joint_vars: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub pca_components: usize,
    #[arg(long, value_enum, default_value_t = NormalizerArg::Bins)]
    pub normalizer: NormalizerArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AttackArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset file of training members.
    #[arg(long)]
    pub train: PathBuf,
    /// Dataset file of held-out records.
    #[arg(long)]
    pub validation: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a Command,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
    started_unix_ms: u128,
    finished_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(usage(format!("{THREADS_ENV} must be >= 1")));
        }
        // A pool built earlier in the same process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and maps the
/// outcome to an exit code, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: &Command) -> CliResult<()> {
    configure_threads()?;
    let started = now_ms();
    let (out, inputs, outputs, seed) = match command {
        Command::Fixture(a) => (&a.out, vec![], cmd_fixture(a)?, Some(a.seed)),
        Command::Preprocess(a) => (&a.out, vec![a.input.clone()], cmd_preprocess(a)?, Some(a.seed)),
        Command::Train(a) => {
            let mut inputs = vec![a.data.clone()];
            inputs.extend(a.resume.clone());
            (&a.out, inputs, cmd_train(a)?, Some(a.seed))
        }
        Command::Sample(a) => (&a.out, vec![a.checkpoint.clone()], cmd_sample(a)?, Some(a.seed)),
        Command::Evaluate(a) => (&a.out, vec![a.real.clone(), a.synthetic.clone()], cmd_evaluate(a)?, None),
        Command::Attack(a) => (
            &a.out,
            vec![a.checkpoint.clone(), a.train.clone(), a.validation.clone()],
            cmd_attack(a)?,
            None,
        ),
    };
    let manifest = RunManifest {
        tool: "diarygan",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: command,
        inputs,
        outputs,
        seed,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
    };
    let f = File::create(out.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest).map_err(Error::from)?;
    Ok(())
}

fn out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_schema(spec: &str, max_len: usize) -> CliResult<SurveySchema> {
    match spec {
        "survey" => Ok(SurveySchema::survey(max_len)),
        "toy" => Ok(crate::data::toy_schema(max_len)),
        path => {
            let text = fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text).map_err(Error::from)?)
        }
    }
}

fn cmd_fixture(a: &FixtureArgs) -> CliResult<Vec<PathBuf>> {
    if a.count == 0 {
        return Err(usage("--count must be >= 1"));
    }
    out_dir(&a.out)?;
    let f = match a.kind {
        FixtureKind::Survey => synth_fixture(a.seed, a.count)?,
        FixtureKind::Toy => toy_fixture(a.seed, a.count),
    };
    let csv_path = a.out.join("fixture.csv");
    write_csv(create(&csv_path)?, &f.schema, &f.records)?;
    let truth_path = a.out.join("truth.json");
    fs::write(&truth_path, f.truth.to_json()?)?;
    let ds = Dataset::from_records(Codec::new(f.schema)?, &f.records, format!("fixture seed {}", a.seed))?;
    let ds_path = a.out.join("dataset.dpds");
    write_dataset(&ds_path, &ds)?;
    Ok(vec![csv_path, truth_path, ds_path])
}

fn cmd_preprocess(a: &PreprocessArgs) -> CliResult<Vec<PathBuf>> {
    if let Some(f) = a.split {
        if !(f > 0.0 && f < 1.0) {
            return Err(usage("--split must be in (0, 1)"));
        }
    }
    let schema = load_schema(&a.schema, a.max_len)?;
    let codec = Codec::new(schema).map_err(|e| usage(e.to_string()))?;
    let records = read_csv(File::open(&a.input)?, codec.schema())?;
    let total = records.len();
    let kept = filter_home_based(records);
    if kept.is_empty() {
        return Err(CliError::Runtime(Error::Parameter(format!(
            "no home-based tours among {total} persons"
        ))));
    }
    let ds = Dataset::from_records(codec, &kept, a.input.display().to_string())?;
    out_dir(&a.out)?;
    let mut outputs = vec![a.out.join("dataset.dpds")];
    write_dataset(&outputs[0], &ds)?;
    if let Some(f) = a.split {
        let (train, val) = ds.split(f, a.seed)?;
        for (name, part) in [("train.dpds", train), ("validation.dpds", val)] {
            let p = a.out.join(name);
            write_dataset(&p, &part)?;
            outputs.push(p);
        }
    }
    eprintln!("kept {} of {total} persons", ds.len());
    Ok(outputs)
}

fn cmd_train(a: &TrainArgs) -> CliResult<Vec<PathBuf>> {
    let ds = read_dataset(&a.data)?;
    if ds.is_empty() {
        return Err(usage("dataset is empty"));
    }
    let mut trainer = match &a.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if &ckpt.schema != ds.schema() {
                return Err(CliError::Runtime(Error::Parameter(
                    "checkpoint schema differs from the dataset schema".into(),
                )));
            }
            let mut t = Trainer::from_checkpoint(ckpt, &ds)?;
            if let Some(e) = a.epochs {
                t.config.epochs = e;
            }
            t
        }
        None => {
            let privacy = if a.no_privacy {
                PrivacyConfig::disabled()
            } else {
                PrivacyConfig::new(a.clip, a.noise_multiplier).map_err(|e| usage(e.to_string()))?
            };
            let cfg = TrainConfig {
                epochs: a.epochs.unwrap_or(200),
                batch_size: a.batch,
                d_steps: a.d_steps,
                loss: match a.loss {
                    LossArg::Standard => LossVariant::Standard,
                    LossArg::Wasserstein => LossVariant::Wasserstein,
                },
                weight_clip: a.weight_clip,
                privacy,
                lr_discriminator: a.lr_d,
                lr_generator: a.lr_g,
                rmsprop_decay: 0.9,
                seed: a.seed,
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let heads = ds.codec.head_specs();
            let net = match a.net {
                NetPreset::Paper => NetConfig::paper(heads, ds.codec.max_len()),
                NetPreset::Compact => NetConfig::compact(heads, ds.codec.max_len()),
            };
            Trainer::new(&ds, net, cfg)?
        }
    };
    out_dir(&a.out)?;
    let history_path = a.out.join("history.csv");
    let result = match a.stop_after {
        Some(n) => trainer.run_iterations(&ds, n),
        None => trainer.run(&ds),
    };
    trainer.history.write_csv(create(&history_path)?)?;
    result?;
    let ckpt_path = a.out.join("checkpoint.dpct");
    save_checkpoint(&ckpt_path, &trainer.checkpoint(&ds.codec))?;
    Ok(vec![ckpt_path, history_path])
}

fn cmd_sample(a: &SampleArgs) -> CliResult<Vec<PathBuf>> {
    if a.count == 0 {
        return Err(usage("--count must be >= 1"));
    }
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let codec = Codec::new(ckpt.schema.clone())?;
    let records = sample(&ckpt.generator, &codec, a.count, a.seed)?;
    out_dir(&a.out)?;
    let path = a.out.join("synthetic.csv");
    write_csv(create(&path)?, codec.schema(), &records)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct Comparison {
    name: String,
    #[serde(flatten)]
    report: SrmseReport,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn write_summary(path: &Path, rows: &[Comparison]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    let to_err = |e: csv::Error| CliError::Runtime(e.into());
    w.write_record(["name", "srmse", "pearson", "r_squared", "bins"]).map_err(to_err)?;
    for c in rows {
        w.write_record([
            c.name.clone(),
            c.report.srmse.to_string(),
            fmt_opt(c.report.pearson),
            fmt_opt(c.report.r_squared),
            c.report.bins.to_string(),
        ])
        .map_err(to_err)?;
    }
    if !rows.is_empty() {
        let mean = rows.iter().map(|c| c.report.srmse).sum::<f64>() / rows.len() as f64;
        w.write_record(["mean".into(), mean.to_string(), String::new(), String::new(), String::new()])
            .map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}

fn safe_name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '-' }).collect()
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<Vec<PathBuf>> {
    let real = read_dataset(&a.real)?;
    let schema = real.schema().clone();
    let reference = real.records()?;
    let synthetic = read_csv(File::open(&a.synthetic)?, &schema)?;
    let codec = real.codec.clone();
    for r in &synthetic {
        codec.check_record(r)?;
    }
    let normalizer = match a.normalizer {
        NormalizerArg::Bins => SrmseNormalizer::Bins,
        NormalizerArg::Agents => SrmseNormalizer::Fixed(reference.len()),
    };
    out_dir(&a.out)?;
    let mut outputs = Vec::new();
    let mut report = serde_json::Map::new();
    let binnable = binnable_attributes(&schema);

    let compare = |name: &str, est: &Histogram, refh: &Histogram, path: PathBuf, outputs: &mut Vec<PathBuf>| {
        write_comparison_csv(create(&path)?, refh, est)?;
        outputs.push(path);
        Ok::<_, CliError>(Comparison {
            name: name.to_string(),
            report: srmse_with(est, refh, normalizer)?,
        })
    };

    for metric in &a.metrics {
        match metric {
            Metric::Marginals => {
                let mut rows = Vec::new();
                for v in &binnable {
                    let est = marginal(&schema, &synthetic, v)?;
                    let refh = marginal(&schema, &reference, v)?;
                    let path = a.out.join(format!("marginal_{}.csv", safe_name(v)));
                    rows.push(compare(v, &est, &refh, path, &mut outputs)?);
                }
                let p = a.out.join("marginals_summary.csv");
                write_summary(&p, &rows)?;
                outputs.push(p);
                report.insert("marginals".into(), serde_json::to_value(&rows).map_err(Error::from)?);
            }
            Metric::Conditionals => {
                let mut rows = Vec::new();
                for t in &binnable {
                    for g in &binnable {
                        if t == g {
                            continue;
                        }
                        let est = conditional(&schema, &synthetic, t, g)?;
                        let refc = conditional(&schema, &reference, t, g)?;
                        let name = format!("p({t}|{g})");
                        match srmse_conditional(&est, &refc) {
                            Ok(rep) => rows.push(Comparison { name, report: rep }),
                            Err(Error::Parameter(_)) => continue,
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
                let p = a.out.join("conditionals_summary.csv");
                write_summary(&p, &rows)?;
                outputs.push(p);
                report.insert("conditionals".into(), serde_json::to_value(&rows).map_err(Error::from)?);
            }
            Metric::Joint => {
                let vars: Vec<&str> = if a.joint_vars.is_empty() {
                    binnable.iter().map(String::as_str).collect()
                } else {
                    a.joint_vars.iter().map(String::as_str).collect()
                };
                let est = joint(&schema, &synthetic, &vars)?;
                let refh = joint(&schema, &reference, &vars)?;
                let c = compare(&vars.join("|"), &est, &refh, a.out.join("joint.csv"), &mut outputs)?;
                report.insert("joint".into(), serde_json::to_value(&c).map_err(Error::from)?);
            }
            Metric::Pca => {
                for (tag, recs) in [("real", &reference), ("synthetic", &synthetic)] {
                    let res = pca_records(&codec, recs, a.pca_components).map_err(|e| match e {
                        Error::Parameter(m) => usage(m),
                        other => other.into(),
                    })?;
                    for (kind, path) in [
                        ("components", a.out.join(format!("pca_{tag}_components.csv"))),
                        ("loadings", a.out.join(format!("pca_{tag}_loadings.csv"))),
                        ("scores", a.out.join(format!("pca_{tag}_scores.csv"))),
                    ] {
                        let w = create(&path)?;
                        match kind {
                            "components" => res.write_components(w)?,
                            "loadings" => res.write_loadings(w)?,
                            _ => res.write_scores(w)?,
                        }
                        outputs.push(path);
                    }
                    report.insert(
                        format!("pca_{tag}"),
                        serde_json::json!({
                            "columns": res.columns,
                            "dropped": res.dropped,
                            "eigenvalues": res.eigenvalues,
                            "explained_variance_ratio": res.explained_variance_ratio,
                        }),
                    );
                }
            }
            Metric::Tours => {
                let est = tour_lengths(&synthetic, None)?.histogram;
                let refh = tour_lengths(&reference, None)?.histogram;
                if est.total() == 0 || refh.total() == 0 {
                    eprintln!("tours: no trips on one side, skipped");
                    report.insert("tours".into(), serde_json::json!({ "skipped": "no trips on one side" }));
                    continue;
                }
                let c = compare("segment_km", &est, &refh, a.out.join("tours.csv"), &mut outputs)?;
                report.insert("tours".into(), serde_json::to_value(&c).map_err(Error::from)?);
            }
        }
    }
    let p = a.out.join("report.json");
    fs::write(&p, serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    outputs.push(p);
    Ok(outputs)
}

fn cmd_attack(a: &AttackArgs) -> CliResult<Vec<PathBuf>> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let train = read_dataset(&a.train)?;
    let val = read_dataset(&a.validation)?;
    for (name, ds) in [("training", &train), ("validation", &val)] {
        if ds.schema() != &ckpt.schema {
            return Err(CliError::Runtime(Error::Parameter(format!(
                "{name} dataset schema differs from the checkpoint schema"
            ))));
        }
        if ds.is_empty() {
            return Err(usage(format!("{name} dataset is empty")));
        }
    }
    let report = mia_scores(&ckpt.discriminator, &train, &val, ckpt.train.loss)?;
    out_dir(&a.out)?;
    let json = a.out.join("attack.json");
    report.write_json(create(&json)?)?;
    let hist = a.out.join("attack_histogram.csv");
    report.write_histogram_csv(create(&hist)?)?;
    eprintln!("auc = {}", report.auc);
    Ok(vec![json, hist])
}
