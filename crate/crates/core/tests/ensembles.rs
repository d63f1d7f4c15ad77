mod common;

use std::collections::BTreeMap;

use qiforest::ensemble::{bootstrap_rows, train_on_transformed};
use qiforest::learners::train_learner_on_rows;
use qiforest::synth::linear_with_noise;
use qiforest::{
    mse, predict_ensemble, train_ensemble, train_qi_forest, train_random_forest, DataMatrix, EnsembleConfig,
    FeatureSubset, LearnerKind, PcaModel, SubsetMode,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn data(seed: u64, n: usize, m: usize) -> (DataMatrix, Vec<f64>) {
    let ds = linear_with_noise("ens", n, m, 0.3, seed).unwrap();
    (ds.x, ds.y)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap()
}

#[test]
fn single_unbootstrapped_full_learner_is_the_base_learner() {
    let (x, y) = data(1, 60, 4);
    for learner in [LearnerKind::Tree, LearnerKind::Linear] {
        let cfg =
            EnsembleConfig { ensemble_size: 1, alpha: 1.0, bootstrap: false, learner, ..EnsembleConfig::default() };
        let model = train_ensemble(&x, &y, &cfg).unwrap();
        let xt = model.pca().transform(&x).unwrap();
        let rows: Vec<usize> = (0..x.rows()).collect();
        let base = train_learner_on_rows(learner, &xt, &y, &rows, &FeatureSubset::full(4)).unwrap();
        assert_eq!(predict_ensemble(&model, &x).unwrap(), base.predict_matrix(&xt).unwrap());
    }
}

#[test]
fn fixed_seed_gives_bit_identical_models() {
    let (x, y) = data(2, 80, 6);
    let cfg = EnsembleConfig { seed: 99, ..EnsembleConfig::default() };
    assert_eq!(json(&train_qi_forest(&x, &y, &cfg).unwrap()), json(&train_qi_forest(&x, &y, &cfg).unwrap()));
    let rf = EnsembleConfig { subset_mode: SubsetMode::Uniform, ..cfg.clone() };
    assert_eq!(json(&train_random_forest(&x, &y, &rf).unwrap()), json(&train_random_forest(&x, &y, &rf).unwrap()));
    let other = EnsembleConfig { seed: 100, ..cfg.clone() };
    assert_ne!(json(&train_qi_forest(&x, &y, &cfg).unwrap()), json(&train_qi_forest(&x, &y, &other).unwrap()));
}

#[test]
fn thread_count_does_not_change_the_model() {
    let (x, y) = data(3, 120, 8);
    let cfg = EnsembleConfig { seed: 5, ..EnsembleConfig::default() };
    let fit = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| json(&train_qi_forest(&x, &y, &cfg).unwrap()))
    };
    assert_eq!(fit(1), fit(4));
}

#[test]
fn bagging_beats_mean_single_tree() {
    let train = linear_with_noise("bag", 400, 6, 0.5, 4).unwrap();
    let (tx, ty) = (train.x.select_rows(&(0..300).collect::<Vec<_>>()).unwrap(), train.y[..300].to_vec());
    let (vx, vy) = (train.x.select_rows(&(300..400).collect::<Vec<_>>()).unwrap(), train.y[300..].to_vec());
    let cfg = EnsembleConfig { subset_mode: SubsetMode::Uniform, seed: 11, ..EnsembleConfig::default() };
    let model = train_random_forest(&tx, &ty, &cfg).unwrap();
    let ens = mse(&predict_ensemble(&model, &vx).unwrap(), &vy).unwrap();
    let members = model.predict_members(&vx).unwrap();
    let single = members.iter().map(|p| mse(p, &vy).unwrap()).sum::<f64>() / members.len() as f64;
    assert!(ens < single, "ensemble {ens} vs mean single {single}");
}

#[test]
fn alpha_one_makes_qi_forest_identical_to_random_forest() {
    let (x, y) = data(5, 90, 7);
    for learner in [LearnerKind::Tree, LearnerKind::Linear] {
        let qi = EnsembleConfig { alpha: 1.0, learner, seed: 3, ..EnsembleConfig::default() };
        let rf = EnsembleConfig { subset_mode: SubsetMode::Uniform, ..qi.clone() };
        let a = train_qi_forest(&x, &y, &qi).unwrap();
        let b = train_random_forest(&x, &y, &rf).unwrap();
        assert_eq!(json(&a.learners()), json(&b.learners()));
        assert_eq!(predict_ensemble(&a, &x).unwrap(), predict_ensemble(&b, &x).unwrap());
    }
}

#[test]
fn uniform_mode_reproduces_random_forest() {
    let (x, y) = data(6, 70, 5);
    let cfg = EnsembleConfig { subset_mode: SubsetMode::Uniform, seed: 8, ..EnsembleConfig::default() };
    let rf = train_random_forest(&x, &y, &cfg).unwrap();
    let generic = train_ensemble(&x, &y, &cfg).unwrap();
    assert_eq!(json(&rf), json(&generic));
}

#[test]
fn uniform_mode_subset_frequencies_are_uniform() {
    let (x, y) = data(7, 50, 5);
    let pca = PcaModel::fit(&x).unwrap();
    let xt = pca.transform(&x).unwrap();
    let mut counts: BTreeMap<FeatureSubset, usize> = BTreeMap::new();
    let seeds = 400;
    for seed in 0..seeds {
        let cfg = EnsembleConfig {
            ensemble_size: 25,
            alpha: 0.4,
            subset_mode: SubsetMode::Uniform,
            learner: LearnerKind::Linear,
            bootstrap: false,
            seed,
        };
        let model = train_on_transformed(pca.clone(), &xt, &y, &cfg).unwrap();
        for s in model.subsets() {
            *counts.entry(s.clone()).or_insert(0) += 1;
        }
    }
    let draws = (seeds * 25) as f64;
    assert_eq!(counts.len(), 10);
    let e = draws / 10.0;
    let stat: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
    assert!(stat < ChiSquared::new(9.0).unwrap().inverse_cdf(0.999), "chi2 {stat}");
}

#[test]
fn bootstrap_covers_about_63_percent_of_rows() {
    let n = 1000;
    let fractions: Vec<f64> = (0..20)
        .map(|i| {
            let rows = bootstrap_rows(1, i, n);
            assert_eq!(rows.len(), n);
            let mut seen = vec![false; n];
            rows.iter().for_each(|&r| seen[r] = true);
            seen.iter().filter(|&&s| s).count() as f64 / n as f64
        })
        .collect();
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
    assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
}

#[test]
fn identical_learners_average_to_themselves() {
    let (x, y) = data(9, 40, 3);
    let cfg = EnsembleConfig { ensemble_size: 5, alpha: 1.0, bootstrap: false, ..EnsembleConfig::default() };
    let model = train_ensemble(&x, &y, &cfg).unwrap();
    let members = model.predict_members(&x).unwrap();
    assert!(members.windows(2).all(|w| w[0] == w[1]));
    for (h, p) in predict_ensemble(&model, &x).unwrap().iter().zip(&members[0]) {
        assert!((h - p).abs() <= 4.0 * f64::EPSILON * p.abs());
    }
}

#[test]
fn constant_target_falls_back_without_error() {
    let (x, _) = data(10, 30, 4);
    let y = vec![2.0; 30];
    let model = train_qi_forest(&x, &y, &EnsembleConfig::default()).unwrap();
    assert!(predict_ensemble(&model, &x).unwrap().iter().all(|&v| v == 2.0));
}
