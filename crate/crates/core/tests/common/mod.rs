#![allow(dead_code)]

use diarygan::data::{toy_fixture, Codec, Dataset};
use diarygan::nets::{Binder, LstmCellParams};
use diarygan::numcore::{SeededRng, Tape, Tensor, Var};
use diarygan::Result;

pub const FD_STEP: f64 = 1e-5;

pub fn random_tensor(rng: &mut SeededRng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| scale * (2.0 * rng.uniform() - 1.0)).collect()).unwrap()
}

/// Loss builder: binds `params` in order through a `Binder` with the given
/// trainability and returns the scalar loss.
pub trait Composition: Fn(&mut Tape, bool, &[Tensor]) -> Result<Var> {}
impl<F: Fn(&mut Tape, bool, &[Tensor]) -> Result<Var>> Composition for F {}

fn evaluate(build: &impl Composition, params: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let loss = build(&mut tape, false, params).unwrap();
    tape.value(loss).data()[0]
}

/// Worst relative error, per parameter tensor, between the tape gradient and
/// central differences: `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-12)`.
pub fn gradcheck(build: impl Composition, params: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let loss = build(&mut tape, true, params).unwrap();
    let analytic = tape.backward(loss).unwrap().into_ordered(params.len()).unwrap();

    let mut worst: f64 = 0.0;
    for (k, p) in params.iter().enumerate() {
        let mut diff_sq = 0.0;
        let mut a_sq = 0.0;
        let mut n_sq = 0.0;
        for j in 0..p.len() {
            let mut plus = params.to_vec();
            plus[k].data_mut()[j] += FD_STEP;
            let mut minus = params.to_vec();
            minus[k].data_mut()[j] -= FD_STEP;
            let numeric = (evaluate(&build, &plus) - evaluate(&build, &minus)) / (2.0 * FD_STEP);
            let a = analytic[k].data()[j];
            diff_sq += (a - numeric) * (a - numeric);
            a_sq += a * a;
            n_sq += numeric * numeric;
        }
        let rel = diff_sq.sqrt() / (a_sq.sqrt() + n_sq.sqrt()).max(1e-12);
        worst = worst.max(rel);
    }
    worst
}

fn bind_all(tape: &mut Tape, trainable: bool, params: &[Tensor]) -> Vec<Var> {
    let mut b = Binder::new(tape, trainable);
    params.iter().map(|p| b.bind(p)).collect()
}

fn dim(rng: &mut SeededRng) -> usize {
    2 + rng.below(7)
}

/// Two dense layers (tanh, then sigmoid) with a squared-output loss.
pub fn dense_instance(rng: &mut SeededRng) -> (Vec<Tensor>, impl Composition) {
    let (batch, d, h) = (1 + rng.below(4), dim(rng), dim(rng));
    let x = random_tensor(rng, &[batch, d], 1.0);
    let params = vec![
        random_tensor(rng, &[d, h], 0.8),
        random_tensor(rng, &[h], 0.5),
        random_tensor(rng, &[h, 1], 0.8),
        random_tensor(rng, &[1], 0.5),
    ];
    let build = move |tape: &mut Tape, trainable: bool, p: &[Tensor]| -> Result<Var> {
        let v = bind_all(tape, trainable, p);
        let xv = tape.constant(x.clone());
        let z = tape.matmul(xv, v[0])?;
        let z = tape.add_bias(z, v[1])?;
        let a = tape.tanh(z);
        let z = tape.matmul(a, v[2])?;
        let z = tape.add_bias(z, v[3])?;
        let y = tape.sigmoid(z);
        let sq = tape.mul(y, y)?;
        Ok(tape.sum(sq))
    };
    (params, build)
}

/// Dense layer into a softmax head scored against fixed weights.
pub fn softmax_instance(rng: &mut SeededRng) -> (Vec<Tensor>, impl Composition) {
    let (batch, d, k) = (1 + rng.below(4), dim(rng), dim(rng));
    let x = random_tensor(rng, &[batch, d], 1.0);
    let w = random_tensor(rng, &[batch, k], 1.0);
    let params = vec![random_tensor(rng, &[d, k], 1.0), random_tensor(rng, &[k], 0.5)];
    let build = move |tape: &mut Tape, trainable: bool, p: &[Tensor]| -> Result<Var> {
        let v = bind_all(tape, trainable, p);
        let xv = tape.constant(x.clone());
        let wv = tape.constant(w.clone());
        let z = tape.matmul(xv, v[0])?;
        let z = tape.add_bias(z, v[1])?;
        let s = tape.softmax(z);
        let a = tape.mul(s, wv)?;
        let b = tape.mul(s, s)?;
        let t = tape.add(a, b)?;
        Ok(tape.sum(t))
    };
    (params, build)
}

/// Two steps of an LSTM cell with trainable initial states.
pub fn lstm_instance(rng: &mut SeededRng) -> (Vec<Tensor>, impl Composition) {
    let (batch, d, h) = (1 + rng.below(3), dim(rng), 1 + rng.below(4));
    let xs = [random_tensor(rng, &[batch, d], 1.0), random_tensor(rng, &[batch, d], 1.0)];
    let wh = random_tensor(rng, &[batch, h], 1.0);
    let wc = random_tensor(rng, &[batch, h], 1.0);
    let params = vec![
        random_tensor(rng, &[d, 4 * h], 0.7),
        random_tensor(rng, &[h, 4 * h], 0.7),
        random_tensor(rng, &[4 * h], 0.3),
        random_tensor(rng, &[batch, h], 0.5),
        random_tensor(rng, &[batch, h], 0.5),
    ];
    let build = move |tape: &mut Tape, trainable: bool, p: &[Tensor]| -> Result<Var> {
        let cell = LstmCellParams {
            w_input: p[0].clone(),
            w_recurrent: p[1].clone(),
            bias: p[2].clone(),
        };
        let (vars, mut hv, mut cv) = {
            let mut b = Binder::new(tape, trainable);
            let vars = cell.bind(&mut b);
            (vars, b.bind(&p[3]), b.bind(&p[4]))
        };
        for x in &xs {
            let xv = tape.constant(x.clone());
            (hv, cv) = vars.step(tape, xv, hv, cv)?;
        }
        let whv = tape.constant(wh.clone());
        let wcv = tape.constant(wc.clone());
        let a = tape.mul(hv, whv)?;
        let b = tape.mul(cv, wcv)?;
        let t = tape.add(a, b)?;
        Ok(tape.sum(t))
    };
    (params, build)
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues in
/// descending order with unit eigenvectors as rows.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn toy_dataset(seed: u64, n: usize) -> Dataset {
    let f = toy_fixture(seed, n);
    Dataset::from_records(Codec::new(f.schema).unwrap(), &f.records, format!("toy {seed}")).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compact networks on a toy dataset, with one real/fake batch of `b` rows.
pub fn disc_setup(seed: u64, b: usize) -> (diarygan::nets::DiscriminatorParams, diarygan::dpsgd::DiscriminatorBatch) {
    use diarygan::nets::{generator_forward, init_params, NetConfig, SEQ_FEATURES};
    let ds = toy_dataset(seed, 40);
    let net = NetConfig::compact(ds.codec.head_specs(), ds.codec.max_len());
    let mut rng = SeededRng::new(seed);
    let (g, d) = init_params(&net, &mut rng).unwrap();
    let idx: Vec<usize> = (0..b).collect();
    let (real_tabular, real_sequence) = ds.batch(&idx).unwrap();
    let z = diarygan::numcore::gaussian(&mut rng, &[b, net.latent_dim], 0.0, 1.0).unwrap();
    let (fake_tabular, fake_sequence) = generator_forward(&g, &z).unwrap();
    let fake_sequence = fake_sequence.reshape(&[b, net.max_len * SEQ_FEATURES]).unwrap();
    (
        d,
        diarygan::dpsgd::DiscriminatorBatch {
            real_tabular,
            real_sequence,
            fake_tabular,
            fake_sequence,
        },
    )
}

/// Encodes and decodes every record; returns the number of label mismatches
/// (attributes, purposes, trip counts) and the worst numeric error as a
/// fraction of the variable's range.
pub fn codec_roundtrip(codec: &Codec, records: &[diarygan::data::RawRecord]) -> (usize, f64) {
    use diarygan::data::{Value, VariableKind};
    let schema = codec.schema();
    let (xr, yr) = (schema.x_range.1 - schema.x_range.0, schema.y_range.1 - schema.y_range.0);
    let mut mismatches = 0;
    let mut worst: f64 = 0.0;
    let mut num = |a: f64, b: f64, range: f64| worst = worst.max((a - b).abs() / range);
    for r in records {
        let back = codec.decode(&codec.encode(r).unwrap()).unwrap();
        for ((var, a), b) in schema.attributes.iter().zip(&r.attributes).zip(&back.attributes) {
            match (&var.kind, a, b) {
                (VariableKind::Numeric { min, max, .. } | VariableKind::Geospatial { min, max }, Value::Number(x), Value::Number(y)) => {
                    num(*x, *y, max - min)
                }
                _ => mismatches += usize::from(a != b),
            }
        }
        num(r.home.0, back.home.0, xr);
        num(r.home.1, back.home.1, yr);
        if r.trips.len() != back.trips.len() {
            mismatches += 1;
            continue;
        }
        for (t, u) in r.trips.iter().zip(&back.trips) {
            mismatches += usize::from(t.purpose != u.purpose);
            num(t.origin.0, u.origin.0, xr);
            num(t.origin.1, u.origin.1, yr);
            num(t.destination.0, u.destination.0, xr);
            num(t.destination.1, u.destination.1, yr);
        }
    }
    (mismatches, worst)
}

/// Density of the distance between two independent uniform points in a disk
/// of radius `r`.
pub fn disk_line_pdf(s: f64, r: f64) -> f64 {
    if !(0.0..=2.0 * r).contains(&s) {
        return 0.0;
    }
    let u = s / (2.0 * r);
    4.0 * s / (std::f64::consts::PI * r * r) * (u.acos() - u * (1.0 - u * u).sqrt())
}

/// Composite Simpson rule on `[a, b]`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Probability of each 1 km bin `[k, k+1)` (k < 30) plus the overflow bin
/// for a segment-length mixture: with weight `w_home` the distance from the
/// disk centre to a uniform point (CDF `(d/R)²`), otherwise the distance
/// between two uniform points.
pub fn analytic_segment_bins(radius_km: f64, w_home: f64) -> Vec<f64> {
    let radial = |d: f64| (d.min(radius_km) / radius_km).powi(2);
    let mut out: Vec<f64> = (0..30)
        .map(|k| {
            let (lo, hi) = (k as f64, k as f64 + 1.0);
            let home = radial(hi) - radial(lo);
            let pair = simpson(|s| disk_line_pdf(s, radius_km), lo, hi, 200);
            w_home * home + (1.0 - w_home) * pair
        })
        .collect();
    let covered: f64 = out.iter().sum();
    out.push((1.0 - covered).max(0.0));
    out
}

/// `n` draws of `x = L z` with `L` lower-triangular, so `cov(x) = L Lᵀ`.
pub fn correlated_rows(seed: u64, n: usize, l: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    let p = l.len();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
            (0..p).map(|i| (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>() + i as f64).collect()
        })
        .collect()
}

/// Sample correlation matrix computed directly from the definition.
pub fn correlation(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let cov = |a: usize, b: usize| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1.0);
    (0..p)
        .map(|a| (0..p).map(|b| cov(a, b) / (cov(a, a) * cov(b, b)).sqrt()).collect())
        .collect()
}

/// `1 − |cos|` between two vectors.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - dot(a, b).abs() / (dot(a, a) * dot(b, b)).sqrt()
}

pub struct PcaCheck {
    pub worst_cosine_distance: f64,
    pub worst_orthonormality: f64,
    pub correlated_pair_ratio: f64,
}

/// Compares library PCA on constructed data with Jacobi on an independently
/// built correlation matrix.
pub fn pca_check(seed: u64) -> PcaCheck {
    use diarygan::eval::pca;
    let l = vec![
        vec![3.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.5, 1.0, 0.0, 0.0, 0.0],
        vec![-0.5, 0.8, 2.0, 0.0, 0.0],
        vec![0.2, 0.1, -0.7, 0.6, 0.0],
        vec![0.0, 0.9, 0.3, 0.4, 0.25],
    ];
    let rows = correlated_rows(seed, 4_000, &l);
    let names: Vec<String> = (0..5).map(|i| format!("x{i}")).collect();
    let r = pca(&rows, &names, 5).unwrap();
    let (_, vectors) = jacobi_eigen(&correlation(&rows));
    let worst_cosine_distance = r
        .components
        .iter()
        .zip(&vectors)
        .map(|(a, b)| cosine_distance(a, b))
        .fold(0.0, f64::max);
    let mut worst_orthonormality: f64 = 0.0;
    for (i, a) in r.components.iter().enumerate() {
        for (j, b) in r.components.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst_orthonormality = worst_orthonormality.max((dot(a, b) - target).abs());
        }
    }
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    let pair: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let x = rng.normal();
            vec![x, 2.0 * x + 1.0]
        })
        .collect();
    let p2 = pca(&pair, &names[..2], 1).unwrap();
    PcaCheck {
        worst_cosine_distance,
        worst_orthonormality,
        correlated_pair_ratio: p2.explained_variance_ratio[0],
    }
}

/// `(computed, expected)` for three hand-worked SRMSE cases.
pub fn srmse_hand_examples() -> [(f64, f64); 3] {
    use diarygan::eval::{srmse_probs, SrmseNormalizer::Bins};
    let p = [0.2, 0.3, 0.5];
    [
        (srmse_probs(&p, &p, Bins).unwrap(), 0.0),
        (srmse_probs(&[0.6, 0.4], &[0.5, 0.5], Bins).unwrap(), 0.2),
        (srmse_probs(&[0.0, 1.0], &[1.0, 0.0], Bins).unwrap(), 2.0),
    ]
}

/// Membership-inference protocol settings on the toy fixture.
#[derive(Debug, Clone, Copy)]
pub struct MiaSetup {
    pub members: usize,
    pub held_out: usize,
    pub iterations: usize,
    pub batch: usize,
    pub lr_d: f64,
    pub lr_g: f64,
    pub d_steps: usize,
    /// Discriminator dense layers at the published 500/200 widths instead
    /// of the compact ones.
    pub wide_discriminator: bool,
}

/// Trains on `members` toy agents (privacy off when `sigma` is `None`) and
/// scores members against `held_out` agents with the final discriminator.
pub fn mia_experiment(seed: u64, sigma: Option<f64>, s: MiaSetup) -> diarygan::attack::AttackReport {
    use diarygan::attack::mia_scores;
    use diarygan::dpsgd::PrivacyConfig;
    use diarygan::nets::{LossVariant, NetConfig};
    use diarygan::trainer::{TrainConfig, Trainer};
    let n = s.members + s.held_out;
    let all = toy_dataset(seed, n);
    let (train, validation) = all.split(s.members as f64 / n as f64, seed).unwrap();
    let privacy = match sigma {
        None => PrivacyConfig::disabled(),
        Some(sig) => PrivacyConfig::new(1.0, sig).unwrap(),
    };
    let cfg = TrainConfig {
        epochs: 1_000_000,
        batch_size: s.batch,
        d_steps: s.d_steps,
        privacy,
        lr_discriminator: s.lr_d,
        lr_generator: s.lr_g,
        seed,
        ..TrainConfig::default()
    };
    let mut net = NetConfig::compact(train.codec.head_specs(), train.codec.max_len());
    if s.wide_discriminator {
        net.disc_tabular = vec![500, 200];
    }
    let mut t = Trainer::new(&train, net, cfg).unwrap();
    t.run_iterations(&train, s.iterations).unwrap();
    mia_scores(&t.discriminator, &train, &validation, LossVariant::Standard).unwrap()
}

/// Gradient of the batch-mean loss from one tape over the whole batch.
pub fn batch_mean_gradient(
    d: &diarygan::nets::DiscriminatorParams,
    batch: &diarygan::dpsgd::DiscriminatorBatch,
    variant: diarygan::nets::LossVariant,
) -> diarygan::dpsgd::GradMap {
    use diarygan::nets::LossVariant;
    let n = d.tensors().len();
    let mut tape = Tape::new();
    let vars = d.bind(&mut Binder::new(&mut tape, true));
    let (rt, rs) = d.input_vars(&mut tape, &batch.real_tabular, &batch.real_sequence).unwrap();
    let (ft, fs) = d.input_vars(&mut tape, &batch.fake_tabular, &batch.fake_sequence).unwrap();
    let real = vars.logits(&mut tape, rt, rs).unwrap();
    let fake = vars.logits(&mut tape, ft, fs).unwrap();
    let loss = match variant {
        LossVariant::Standard => {
            let neg = tape.scale(real, -1.0);
            let a = tape.softplus(neg);
            let b = tape.softplus(fake);
            let s = tape.add(a, b).unwrap();
            tape.mean(s)
        }
        LossVariant::Wasserstein => {
            let diff = tape.sub(fake, real).unwrap();
            tape.mean(diff)
        }
    };
    tape.backward(loss).unwrap().into_ordered(n).unwrap()
}

pub fn flat(d: &diarygan::nets::DiscriminatorParams) -> Vec<f64> {
    d.tensors().iter().flat_map(|t| t.data().to_vec()).collect()
}

/// Sample mean and sd of the privatized sum of all-zero gradients.
pub fn noise_std(sigma: f64, c: f64, batch: usize, coords: usize, seed: u64) -> (f64, f64) {
    use diarygan::dpsgd::{privatize_sum, PrivacyConfig};
    let zeros = vec![vec![Tensor::zeros(&[coords])]];
    let cfg = PrivacyConfig::new(c, sigma).unwrap();
    let out = privatize_sum(&zeros, &cfg, batch, &mut SeededRng::new(seed)).unwrap();
    let xs = out[0].data();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seeds, size and training settings of the toy fidelity runs.
pub const TOY_GAN_SEEDS: [u64; 3] = [1, 2, 3];
pub const TOY_GAN_AGENTS: usize = 2_000;
pub const TOY_GAN_VARIABLES: [&str; 3] = ["HOUSING", "WORKER", "TRANSIT"];

/// Trains the compact nets on a toy fixture with clip 1 and noise
/// multiplier `sigma`, draws as many agents as were trained on, and
/// returns the marginal SRMSE of each categorical variable against the
/// fixture's exact distribution.
pub fn toy_gan_marginals(seed: u64, sigma: f64) -> [f64; 3] {
    use diarygan::dpsgd::PrivacyConfig;
    use diarygan::eval::{marginal, srmse_probs, SrmseNormalizer};
    use diarygan::nets::NetConfig;
    use diarygan::trainer::{sample, TrainConfig, Trainer};
    let f = toy_fixture(seed, TOY_GAN_AGENTS);
    let ds = Dataset::from_records(Codec::new(f.schema.clone()).unwrap(), &f.records, "toy").unwrap();
    let net = NetConfig::compact(ds.codec.head_specs(), ds.codec.max_len());
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: 64,
        d_steps: 3,
        lr_discriminator: 0.1,
        lr_generator: 1e-3,
        privacy: PrivacyConfig::new(1.0, sigma).unwrap(),
        seed,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(&ds, net, cfg).unwrap();
    t.run(&ds).unwrap();
    let synthetic = sample(&t.generator, &ds.codec, TOY_GAN_AGENTS, 99).unwrap();
    TOY_GAN_VARIABLES.map(|v| {
        let h = marginal(&f.schema, &synthetic, v).unwrap();
        let est = h.probabilities.expect("nonempty sample");
        srmse_probs(&est, &f.truth.marginal(v).unwrap(), SrmseNormalizer::Bins).unwrap()
    })
}
