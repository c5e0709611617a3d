//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! `cargo test -p diarygan --test acceptance -- 6 7` runs a subset. The
//! process exits non-zero on a failed criterion only when
//! `ACCEPTANCE_STRICT=1` is set.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use diarygan::data::{synth_fixture, write_csv, Codec};
use diarygan::dpsgd::{clip_per_example, dp_discriminator_step, per_example_gradient, DpSgdState, GradMap, PrivacyConfig};
use diarygan::nets::{global_norm, LossVariant, NetConfig};
use diarygan::numcore::SeededRng;
use diarygan::trainer::{save_checkpoint, TrainConfig, Trainer};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit_s: u64, elapsed: Duration) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (p, f) = dense_instance(&mut rng);
        worst = worst.max(gradcheck(f, &p));
        let (p, f) = softmax_instance(&mut rng);
        worst = worst.max(gradcheck(f, &p));
        let (p, f) = lstm_instance(&mut rng);
        worst = worst.max(gradcheck(f, &p));
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-4 && within(10, t),
        format!("30 instances, worst relative error {worst:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn dp_mechanics() -> Outcome {
    let start = Instant::now();
    // (a) clipping bound on real per-example discriminator gradients
    let (d, batch) = disc_setup(11, 16);
    let grads: Vec<GradMap> = (0..16)
        .map(|i| per_example_gradient(&d, &batch, i, LossVariant::Standard).unwrap().1)
        .collect();
    let mut worst_excess = f64::NEG_INFINITY;
    for c in [1e-3, 0.1, 1.0] {
        for g in clip_per_example(grads.clone(), c).unwrap() {
            worst_excess = worst_excess.max(global_norm(g.iter()) - c);
        }
    }
    let a = worst_excess <= 1e-9;

    // (b) sigma 0 with a clip that never binds is plain mean SGD
    let lr = 0.05;
    let mut state = DpSgdState::new(lr, PrivacyConfig::new(1e9, 0.0).unwrap(), SeededRng::new(1)).unwrap();
    let (next, _) = dp_discriminator_step(&d, &batch, LossVariant::Standard, &mut state).unwrap();
    let g = batch_mean_gradient(&d, &batch, LossVariant::Standard);
    let mut expected = d.clone();
    for (p, gt) in expected.tensors_mut().into_iter().zip(&g) {
        for (w, gv) in p.data_mut().iter_mut().zip(gt.data()) {
            *w -= lr * gv;
        }
    }
    let sgd_gap = max_abs_diff(&flat(&next), &flat(&expected));
    let b = sgd_gap <= 1e-12;

    // (c) per-coordinate noise sd equals sigma * C on the summed gradient
    let (_, sd) = noise_std(1.7, 0.8, 1, 200_000, 5);
    let rel = (sd / (1.7 * 0.8) - 1.0).abs();
    let c = rel < 0.02;
    let t = start.elapsed();
    outcome(
        a && b && c && within(30, t),
        format!(
            "clip excess {worst_excess:.1e}, sgd gap {sgd_gap:.1e}, noise sd off by {:.2}%, {:.2}s",
            100.0 * rel,
            t.as_secs_f64()
        ),
    )
}

fn codec() -> Outcome {
    let start = Instant::now();
    let f = synth_fixture(3, 10_000).unwrap();
    let codec = Codec::new(f.schema.clone()).unwrap();
    let (mismatches, worst) = codec_roundtrip(&codec, &f.records);
    let t = start.elapsed();
    outcome(
        mismatches == 0 && worst <= 1e-9 && within(10, t),
        format!(
            "10000 records, {mismatches} label mismatches, worst numeric error {worst:.1e} of range, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn srmse_examples() -> Outcome {
    let errs: Vec<f64> = srmse_hand_examples().iter().map(|(g, w)| (g - w).abs()).collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("identity, shifted pair, disjoint: worst error {worst:.1e}"))
}

fn pca_oracle() -> Outcome {
    let checks: Vec<PcaCheck> = (1..=3).map(pca_check).collect();
    let cos = checks.iter().map(|c| c.worst_cosine_distance).fold(0.0, f64::max);
    let orth = checks.iter().map(|c| c.worst_orthonormality).fold(0.0, f64::max);
    let ratio = checks.iter().map(|c| (c.correlated_pair_ratio - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        cos < 1e-6 && orth < 1e-9 && ratio < 1e-9,
        format!("cosine distance {cos:.1e}, orthonormality {orth:.1e}, pair ratio off by {ratio:.1e}"),
    )
}

/// Seed -> per-variable SRMSE, for sigma 0 and sigma 2.
struct ToyRuns {
    clean: Vec<[f64; 3]>,
    noisy: Vec<[f64; 3]>,
    clean_time: Duration,
    noisy_time: Duration,
}

fn toy_runs(need_noisy: bool) -> ToyRuns {
    let start = Instant::now();
    let clean: Vec<[f64; 3]> = TOY_GAN_SEEDS.iter().map(|&s| toy_gan_marginals(s, 0.0)).collect();
    let clean_time = start.elapsed();
    let start = Instant::now();
    let noisy = if need_noisy {
        TOY_GAN_SEEDS.iter().map(|&s| toy_gan_marginals(s, 2.0)).collect()
    } else {
        Vec::new()
    };
    ToyRuns {
        clean,
        noisy,
        clean_time,
        noisy_time: start.elapsed(),
    }
}

fn fmt3(x: &[f64; 3]) -> String {
    format!("{:.3}/{:.3}/{:.3}", x[0], x[1], x[2])
}

fn fidelity(r: &ToyRuns) -> Outcome {
    let good = r.clean.iter().filter(|s| s.iter().all(|&x| x < 0.5)).count();
    let per_seed: Vec<String> = r.clean.iter().map(fmt3).collect();
    outcome(
        good >= 2 && within(300, r.clean_time),
        format!(
            "{good}/3 seeds with every variable < 0.5 (HOUSING/WORKER/TRANSIT: {}), {:.0}s",
            per_seed.join(", "),
            r.clean_time.as_secs_f64()
        ),
    )
}

fn noise_trend(r: &ToyRuns) -> Outcome {
    let mean = |x: &[f64; 3]| x.iter().sum::<f64>() / 3.0;
    let pairs: Vec<(f64, f64)> = r.clean.iter().zip(&r.noisy).map(|(a, b)| (mean(a), mean(b))).collect();
    let holds = pairs.iter().filter(|(c, n)| n >= c).count();
    let total = r.clean_time + r.noisy_time;
    let shown: Vec<String> = pairs.iter().map(|(c, n)| format!("{c:.3}->{n:.3}")).collect();
    outcome(
        holds >= 2 && within(900, total),
        format!(
            "{holds}/3 seeds with mean SRMSE(sigma 2) >= SRMSE(sigma 0) ({}), {:.0}s",
            shown.join(", "),
            total.as_secs_f64()
        ),
    )
}

fn membership() -> Outcome {
    let start = Instant::now();
    let setup = MiaSetup {
        members: 50,
        held_out: 50,
        iterations: 500,
        batch: 10,
        lr_d: 0.3,
        lr_g: 1e-4,
        d_steps: 1,
        wide_discriminator: true,
    };
    let open: Vec<f64> = [1, 2, 3].iter().map(|&s| mia_experiment(s, None, setup).auc).collect();
    let private: Vec<f64> = [1, 2, 3].iter().map(|&s| mia_experiment(s, Some(1.0), setup).auc).collect();
    let t = start.elapsed();
    let a = open.iter().filter(|&&x| x >= 0.7).count();
    let b = private.iter().filter(|&&x| x <= 0.65).count();
    let show = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
    outcome(
        a >= 2 && b >= 2 && within(600, t),
        format!(
            "non-private AUC >= 0.7 in {a}/3 ({}), sigma 1 AUC <= 0.65 in {b}/3 ({}), {:.0}s",
            show(&open),
            show(&private),
            t.as_secs_f64()
        ),
    )
}

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_diarygan"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Runs fixture, train, sample and evaluate under `root`.
fn cli_pipeline(root: &Path) -> bool {
    let p = |n: &str| root.join(n).to_str().unwrap().to_string();
    let (fx, tr, sm, ev) = (p("fixture"), p("train"), p("sample"), p("eval"));
    let data = format!("{fx}/dataset.dpds");
    let ckpt = format!("{tr}/checkpoint.dpct");
    let syn = format!("{sm}/synthetic.csv");
    cli(&["fixture", "--kind", "toy", "--count", "200", "--seed", "8", "--out", &fx])
        && cli(&[
            "train", "--data", &data, "--net", "compact", "--epochs", "2", "--batch", "32", "--noise-multiplier", "1",
            "--seed", "8", "--out", &tr,
        ])
        && cli(&["sample", "--checkpoint", &ckpt, "--count", "300", "--seed", "8", "--out", &sm])
        && cli(&["evaluate", "--real", &data, "--synthetic", &syn, "--out", &ev])
}

fn artifact_files(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for dir in ["fixture", "train", "sample", "eval"] {
        for e in fs::read_dir(root.join(dir)).unwrap() {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap();
            // Run manifests carry timestamps and the history carries wall time.
            if name != "manifest.json" && name != "history.csv" {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if !(cli_pipeline(a.path()) && cli_pipeline(b.path())) {
        return outcome(false, "pipeline command failed");
    }
    let files = artifact_files(a.path());
    let differing: Vec<String> = files
        .iter()
        .filter(|f| fs::read(a.path().join(f)).ok() != fs::read(b.path().join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();

    let ds = toy_dataset(9, 120);
    let net = NetConfig::compact(ds.codec.head_specs(), ds.codec.max_len());
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 16,
        d_steps: 2,
        privacy: PrivacyConfig::new(1.0, 1.5).unwrap(),
        seed: 9,
        ..TrainConfig::default()
    };
    let mut full = Trainer::new(&ds, net.clone(), cfg.clone()).unwrap();
    full.run_iterations(&ds, 20).unwrap();
    let mut part = Trainer::new(&ds, net, cfg).unwrap();
    part.run_iterations(&ds, 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mid = dir.path().join("mid.dpct");
    save_checkpoint(&mid, &part.checkpoint(&ds.codec)).unwrap();
    let mut resumed = Trainer::from_checkpoint(diarygan::trainer::load_checkpoint(&mid).unwrap(), &ds).unwrap();
    resumed.run_iterations(&ds, 10).unwrap();
    let (x, y) = (dir.path().join("full.dpct"), dir.path().join("resumed.dpct"));
    save_checkpoint(&x, &full.checkpoint(&ds.codec)).unwrap();
    save_checkpoint(&y, &resumed.checkpoint(&ds.codec)).unwrap();
    let resume_ok = fs::read(&x).unwrap() == fs::read(&y).unwrap();

    let sample_bytes = |t: &Trainer| {
        let mut buf = Vec::new();
        let recs = diarygan::trainer::sample(&t.generator, &ds.codec, 50, 1).unwrap();
        write_csv(&mut buf, ds.schema(), &recs).unwrap();
        buf
    };
    let samples_ok = sample_bytes(&full) == sample_bytes(&resumed);
    outcome(
        differing.is_empty() && resume_ok && samples_ok,
        format!(
            "{} artifacts compared, {} differ{}; resume after 10 of 20 iterations {}",
            files.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) },
            if resume_ok && samples_ok { "bit-identical" } else { "diverged" }
        ),
    )
}

fn fixture_ages() -> Outcome {
    let f = synth_fixture(10, 10_000).unwrap();
    let ages: Vec<f64> = f.records.iter().map(|r| r.attributes[0].as_number().unwrap()).collect();
    let n = ages.len() as f64;
    let mean = ages.iter().sum::<f64>() / n;
    let sd = (ages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (lo, hi) = ages.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
    outcome(
        (mean - 43.0).abs() <= 1.0 && (sd - 20.0).abs() <= 1.0 && lo >= 5.0 && hi <= 95.0,
        format!("mean {mean:.2}, sd {sd:.2}, range [{lo}, {hi}]"),
    )
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| filter.is_empty() || filter.contains(&n);
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };
    let singles: [(usize, fn() -> Outcome); 5] =
        [(1, gradients), (2, dp_mechanics), (3, codec), (4, srmse_examples), (5, pca_oracle)];
    for (n, f) in singles {
        if wanted(n) {
            report(n, f());
        }
    }
    if wanted(6) || wanted(7) {
        let runs = toy_runs(wanted(7));
        if wanted(6) {
            report(6, fidelity(&runs));
        }
        if wanted(7) {
            report(7, noise_trend(&runs));
        }
    }
    let rest: [(usize, fn() -> Outcome); 3] = [(8, membership), (9, determinism), (10, fixture_ages)];
    for (n, f) in rest {
        if wanted(n) {
            report(n, f());
        }
    }
    let failed: Vec<String> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| n.to_string()).collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!(" (failing: {})", failed.join(", ")) }
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
