//! Monte-Carlo properties of random hypervectors. Reference values were
//! computed independently with numpy and frozen here.

use microhd::encoders::IdLevelCodebook;
use microhd::hv::{bundle, cosine_similarity, BipolarHv};
use microhd::rng::{HdRng, Seeds};

const D: usize = 10_000;

fn random_hvs(n: usize, seed: u64) -> Vec<BipolarHv> {
    let mut rng = HdRng::new(seed);
    (0..n).map(|_| BipolarHv::random(D, &mut rng).unwrap()).collect()
}

#[test]
fn random_pairs_are_quasi_orthogonal() {
    let hvs = random_hvs(2000, 11);
    let sims: Vec<f64> = hvs
        .chunks(2)
        .map(|p| (p[0].dot(&p[1]).unwrap() as f64 / D as f64).abs())
        .collect();
    let max = sims.iter().copied().fold(0.0, f64::max);
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    // 99.9th percentile of the maximum over 1000 pairs.
    assert!(max <= 0.0484, "max |cos| = {max}");
    assert!((mean - 0.0080).abs() < 0.0015, "mean |cos| = {mean}");
}

#[test]
fn bundle_stays_similar_to_its_inputs() {
    let expected = [(3usize, 0.500), (10, 0.246), (100, 0.080)];
    let mut previous = f64::INFINITY;
    for (k, want) in expected {
        let mut total = 0.0;
        let trials = 20;
        for t in 0..trials {
            let parts = random_hvs(k, 100 + t as u64 * 7 + k as u64);
            let b = bundle(&parts).unwrap();
            total += parts.iter().map(|p| cosine_similarity(&b, p).unwrap()).sum::<f64>() / k as f64;
        }
        let mean = total / trials as f64;
        assert!((mean - want).abs() < 0.02, "k={k}: mean similarity {mean}, expected {want}");
        assert!(mean < previous, "similarity must fall as the bundle grows");
        previous = mean;
    }
}

#[test]
fn bundle_is_unrelated_to_outsiders() {
    let parts = random_hvs(10, 3);
    let outsiders = random_hvs(200, 4);
    let b = bundle(&parts).unwrap();
    for o in &outsiders {
        assert!(cosine_similarity(&b, o).unwrap().abs() < 0.05);
    }
}

#[test]
fn level_similarity_decreases_monotonically() {
    let cb = IdLevelCodebook::generate(1, D, 1024, Seeds(5)).unwrap();
    let levels = cb.levels();
    let dots: Vec<i64> = levels.iter().map(|l| levels[0].dot(l).unwrap()).collect();
    assert!(dots.windows(2).all(|w| w[1] < w[0]));
    let far = dots[1023] as f64 / D as f64;
    assert!(far < 0.25, "extreme levels too similar: {far}");
    assert!((far - 0.1816).abs() < 1e-12);
}

#[test]
fn id_vectors_are_quasi_orthogonal() {
    let cb = IdLevelCodebook::generate(64, D, 4, Seeds(9)).unwrap();
    let ids = cb.ids();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            assert!((ids[i].dot(&ids[j]).unwrap() as f64 / D as f64).abs() < 0.05);
        }
    }
}
