mod common;

use common::{cosine_distance, pca_check, srmse_hand_examples};
use diarygan::data::{synth_fixture, toy_fixture};
use diarygan::eval::{
    conditional, joint, joint_with_cap, marginal, pca, pearson, r_squared, srmse, srmse_conditional, srmse_probs,
    srmse_with, tour_histogram, Histogram, SrmseNormalizer,
};
use diarygan::numcore::SeededRng;
use diarygan::Error;
use proptest::prelude::*;

#[test]
fn srmse_hand_worked() {
    for (got, want) in srmse_hand_examples() {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn srmse_fixed_normalizer() {
    // N_b = 4 over two bins: sqrt(0.02/4) / (1/4).
    let e = srmse_probs(&[0.6, 0.4], &[0.5, 0.5], SrmseNormalizer::Fixed(4)).unwrap();
    assert!((e - (0.005f64).sqrt() * 4.0).abs() < 1e-12);
    assert!(srmse_probs(&[1.0], &[0.5, 0.5], SrmseNormalizer::Bins).is_err());
    assert!(srmse_probs(&[0.0, 0.0], &[0.0, 0.0], SrmseNormalizer::Bins).is_err());
}

#[test]
fn histogram_comparison_reports_fit() {
    let h = |c: Vec<u64>| Histogram::from_counts(vec!["v".into()], vec!["a".into(), "b".into(), "c".into()], c);
    let r = srmse(&h(vec![20, 30, 50]), &h(vec![2, 3, 5])).unwrap();
    assert!(r.srmse.abs() < 1e-12);
    assert!((r.pearson.unwrap() - 1.0).abs() < 1e-12);
    assert!((r.r_squared.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r.bins, 3);
    let other = Histogram::from_counts(vec!["v".into()], vec!["a".into(), "b".into()], vec![1, 1]);
    assert!(matches!(srmse(&other, &h(vec![1, 1, 1])), Err(Error::Structural(_))));
    assert!(srmse_with(&h(vec![0, 0, 0]), &h(vec![1, 1, 1]), SrmseNormalizer::Bins).is_err());
    assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
    assert_eq!(r_squared(&[1.0, 2.0], &[3.0, 3.0]), None);
}

#[test]
fn pca_agrees_with_jacobi() {
    for seed in [1, 2, 3] {
        let c = pca_check(seed);
        assert!(c.worst_cosine_distance < 1e-6, "{}", c.worst_cosine_distance);
        assert!(c.worst_orthonormality < 1e-9, "{}", c.worst_orthonormality);
        assert!((c.correlated_pair_ratio - 1.0).abs() < 1e-9, "{}", c.correlated_pair_ratio);
    }
}

fn standardized(rows: &[Vec<f64>], means: &[f64], stds: &[f64]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().zip(means.iter().zip(stds)).map(|(x, (m, s))| (x - m) / s).collect())
        .collect()
}

#[test]
fn pca_with_all_components_reconstructs() {
    let l = vec![vec![1.0, 0.0, 0.0], vec![0.4, 2.0, 0.0], vec![-1.0, 0.3, 0.5]];
    let rows = common::correlated_rows(9, 300, &l);
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let r = pca(&rows, &names, 3).unwrap();
    let z = standardized(&rows, &r.means, &r.stds);
    for (zi, si) in z.iter().zip(&r.scores) {
        for j in 0..3 {
            let back: f64 = (0..3).map(|c| si[c] * r.components[c][j]).sum();
            assert!((back - zi[j]).abs() < 1e-8);
        }
    }
    assert!((r.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((r.eigenvalues.iter().sum::<f64>() - 3.0).abs() < 1e-9);
    for c in 0..3 {
        let lead = r.components[c].iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        assert!(lead > 0.0);
        let want: Vec<f64> = r.components[c].iter().map(|x| x * r.eigenvalues[c].sqrt()).collect();
        assert!(cosine_distance(&want, &r.loadings[c]) < 1e-12);
    }
}

#[test]
fn pca_drops_constant_columns_and_rejects_bad_k() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 7.0, (i * i) as f64]).collect();
    let names: Vec<String> = ["a", "k", "b"].map(String::from).to_vec();
    let r = pca(&rows, &names, 2).unwrap();
    assert_eq!(r.dropped, vec!["k".to_string()]);
    assert_eq!(r.columns, vec!["a".to_string(), "b".to_string()]);
    assert!(pca(&rows, &names, 3).is_err());
    assert!(pca(&rows, &names, 0).is_err());
    assert!(pca(&rows[..1], &names, 1).is_err());
}

#[test]
fn pca_csv_writers_have_headers() {
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let names: Vec<String> = ["a", "b"].map(String::from).to_vec();
    let r = pca(&rows, &names, 2).unwrap();
    for write in [
        PcaWrite::Components,
        PcaWrite::Loadings,
        PcaWrite::Scores,
    ] {
        let mut buf = Vec::new();
        match write {
            PcaWrite::Components => r.write_components(&mut buf),
            PcaWrite::Loadings => r.write_loadings(&mut buf),
            PcaWrite::Scores => r.write_scores(&mut buf),
        }
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        let scores = matches!(write, PcaWrite::Scores);
        let tail = if scores { ",PC1,PC2" } else { ",a,b" };
        assert!(first.ends_with(tail), "{first}");
        let expected_rows = if scores { 6 } else { 2 };
        assert_eq!(text.lines().count(), expected_rows + 1);
    }
}

#[derive(Clone, Copy)]
enum PcaWrite {
    Components,
    Loadings,
    Scores,
}

#[test]
fn conditional_columns_are_distributions() {
    let f = synth_fixture(4, 3_000).unwrap();
    let c = conditional(&f.schema, &f.records, "P_STATUT", "P_AGE").unwrap();
    assert_eq!(c.columns.len(), c.given_labels.len());
    for col in c.columns.iter().flatten() {
        assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let same = srmse_conditional(&c, &c).unwrap();
    assert!(same.srmse.abs() < 1e-12);
    let swapped = conditional(&f.schema, &f.records, "P_AGE", "P_STATUT").unwrap();
    assert!(srmse_conditional(&swapped, &c).is_err());
}

#[test]
fn singleton_joint_is_marginal() {
    let f = synth_fixture(5, 2_000).unwrap();
    for v in ["P_AGE", "P_SEXE", "P_MOBIL", "P_STATUT", "PERMIT"] {
        let m = marginal(&f.schema, &f.records, v).unwrap();
        let j = joint(&f.schema, &f.records, &[v]).unwrap();
        assert_eq!(m.counts, j.counts);
        assert_eq!(m.labels, j.labels);
        assert_eq!(m.probabilities, j.probabilities);
    }
}

#[test]
fn joint_sums_marginalize() {
    let f = toy_fixture(6, 1_000);
    let j = joint(&f.schema, &f.records, &["HOUSING", "TRANSIT"]).unwrap();
    let h = marginal(&f.schema, &f.records, "HOUSING").unwrap();
    let rows: Vec<u64> = j.counts.chunks(4).map(|c| c.iter().sum()).collect();
    assert_eq!(rows, h.counts);
    assert_eq!(j.labels[1], "Owner|Bus");
}

#[test]
fn joint_cap_and_unknown_variables() {
    let f = toy_fixture(7, 10);
    let err = joint_with_cap(&f.schema, &f.records, &["HOUSING", "WORKER", "TRANSIT"], 10).unwrap_err();
    assert!(matches!(err, Error::CombinatorialBlowup { .. }), "{err:?}");
    assert!(joint_with_cap(&f.schema, &f.records, &["HOUSING", "WORKER", "TRANSIT"], 24).is_ok());
    assert!(marginal(&f.schema, &f.records, "NOPE").is_err());
}

#[test]
fn tour_histogram_bins() {
    let h = tour_histogram(&[0.0, 0.99, 1.0, 29.99, 30.0, 30.01, 100.0]);
    assert_eq!(h.n_bins(), 31);
    assert_eq!(h.counts[0], 2);
    assert_eq!(h.counts[1], 1);
    assert_eq!(h.counts[29], 2);
    assert_eq!(h.counts[30], 2);
}

proptest! {
    #[test]
    fn srmse_nonnegative_symmetric_in_error(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..12)) {
        let (mut a, mut b): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        prop_assume!(sa > 1e-6 && sb > 1e-6);
        a.iter_mut().for_each(|x| *x /= sa);
        b.iter_mut().for_each(|x| *x /= sb);
        let ab = srmse_probs(&a, &b, SrmseNormalizer::Bins).unwrap();
        let ba = srmse_probs(&b, &a, SrmseNormalizer::Bins).unwrap();
        prop_assert!(ab >= 0.0);
        // Both references sum to one, so the normalizing mean is the same.
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(srmse_probs(&a, &a, SrmseNormalizer::Bins).unwrap() == 0.0);
    }

    #[test]
    fn pca_orthonormal_for_random_data(seed in 0u64..1000, p in 2usize..6) {
        let mut rng = SeededRng::new(seed);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..p).map(|_| rng.normal()).collect()).collect();
        let names: Vec<String> = (0..p).map(|i| format!("c{i}")).collect();
        let r = pca(&rows, &names, p).unwrap();
        for i in 0..p {
            for j in 0..p {
                let d = common::dot(&r.components[i], &r.components[j]);
                prop_assert!((d - f64::from(u8::from(i == j))).abs() < 1e-9);
            }
        }
        prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}
