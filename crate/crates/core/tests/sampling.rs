mod common;

use std::collections::BTreeMap;

use qiforest::diagnostics::theory::subset_distribution;
use qiforest::qis::{sample_subset, SubspaceWeights};
use qiforest::{FeatureSubset, SubsetMode};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn frequencies(w: &SubspaceWeights, k: usize, draws: usize, seed: u64) -> BTreeMap<FeatureSubset, usize> {
    let mut r = common::rng(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(sample_subset(w, k, &mut r).unwrap()).or_insert(0) += 1;
    }
    counts
}

fn chi_square_stat(
    counts: &BTreeMap<FeatureSubset, usize>,
    expected: &BTreeMap<FeatureSubset, f64>,
    draws: usize,
) -> f64 {
    expected
        .iter()
        .map(|(s, &p)| {
            let e = p * draws as f64;
            let o = *counts.get(s).unwrap_or(&0) as f64;
            (o - e).powi(2) / e
        })
        .sum()
}

#[test]
fn uniform_subsets_pass_chi_square_for_small_m() {
    for (m, k) in [(4, 2), (5, 2), (5, 3), (6, 3)] {
        let w = SubspaceWeights::uniform(m).unwrap();
        let draws = 20_000;
        let counts = frequencies(&w, k, draws, 100 + m as u64);
        let exact = subset_distribution(&w, k).unwrap();
        assert_eq!(counts.len(), exact.len(), "every C({m},{k}) subset should appear");
        let p0 = exact.values().next().copied().unwrap();
        assert!(exact.values().all(|&p| (p - p0).abs() < 1e-12));
        let stat = chi_square_stat(&counts, &exact, draws);
        let crit = ChiSquared::new((exact.len() - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(stat < crit, "m={m} k={k}: chi2 {stat} >= {crit}");
    }
}

#[test]
fn half_half_zero_zero_matches_enumeration() {
    let w = SubspaceWeights::from_masses(vec![0.5, 0.5, 0.0, 0.0], SubsetMode::FractionOnly).unwrap();
    let exact = subset_distribution(&w, 3).unwrap();
    let draws = 20_000;
    let counts = frequencies(&w, 3, draws, 7);
    for s in counts.keys() {
        assert!(s.contains(0) && s.contains(1));
    }
    for (s, &p) in &exact {
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let got = *counts.get(s).unwrap_or(&0) as f64;
        assert!((got - p * draws as f64).abs() <= 3.0 * sd, "{s:?}: {got}");
    }
}

#[test]
fn single_draw_frequencies_within_three_sigma() {
    let p = [0.7, 0.2, 0.1];
    let w = SubspaceWeights::from_masses(p.to_vec(), SubsetMode::FractionOnly).unwrap();
    let draws = 10_000;
    let counts = frequencies(&w, 1, draws, 3);
    for (j, &pj) in p.iter().enumerate() {
        let got = *counts.get(&FeatureSubset::new(vec![j], 3).unwrap()).unwrap_or(&0) as f64;
        let sd = (draws as f64 * pj * (1.0 - pj)).sqrt();
        assert!((got - pj * draws as f64).abs() <= 3.0 * sd, "feature {j}: {got}");
    }
}

#[test]
fn deterministic_mass_and_exhaustive_draw() {
    let w = SubspaceWeights::from_masses(vec![1.0, 0.0, 0.0], SubsetMode::FractionOnly).unwrap();
    let counts = frequencies(&w, 1, 500, 1);
    assert_eq!(counts.len(), 1);
    assert!(counts.contains_key(&FeatureSubset::new(vec![0], 3).unwrap()));
    let u = SubspaceWeights::uniform(5).unwrap();
    let all = frequencies(&u, 5, 50, 2);
    assert_eq!(all.keys().collect::<Vec<_>>(), vec![&FeatureSubset::full(5)]);
}

#[test]
fn inclusion_frequency_follows_weight_order() {
    let p = vec![0.05, 0.4, 0.15, 0.3, 0.1];
    let w = SubspaceWeights::from_masses(p.clone(), SubsetMode::FractionOnly).unwrap();
    let draws = 20_000;
    let mut incl = [0usize; 5];
    for (s, c) in frequencies(&w, 2, draws, 4) {
        for &j in s.indices() {
            incl[j] += c;
        }
    }
    let mut by_weight: Vec<usize> = (0..5).collect();
    by_weight.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    for pair in by_weight.windows(2) {
        assert!(incl[pair[0]] >= incl[pair[1]], "{incl:?}");
    }
}

#[test]
fn exact_distribution_agrees_with_sampling_for_skewed_weights() {
    let w = SubspaceWeights::from_masses(vec![0.5, 0.25, 0.15, 0.1, 0.0], SubsetMode::FractionOnly).unwrap();
    let exact = subset_distribution(&w, 2).unwrap();
    let draws = 40_000;
    let counts = frequencies(&w, 2, draws, 8);
    let stat = chi_square_stat(&counts, &exact, draws);
    let crit = ChiSquared::new((exact.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < crit, "chi2 {stat} >= {crit}");
}
