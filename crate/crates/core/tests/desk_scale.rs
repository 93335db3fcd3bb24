//! Finite-scale comparisons between exact counts and asymptotic predictions,
//! plus sampling statistics. Expected values were produced by independent
//! scripts and are frozen here.

use maier_lab::admissible::{enumerate_admissible, sample_admissible, AdmissibleProfile};
use maier_lab::buchstab::BuchstabTable;
use maier_lab::local_densities::truncated_product;
use maier_lab::patterns::{
    count_prime_patterns, count_rough_patterns, default_scale, predicted_prime_count, predicted_rough_count,
    LatticeBox,
};
use maier_lab::LinearSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ap(k: usize) -> LinearSystem {
    LinearSystem::arithmetic_progression(k).unwrap()
}

#[test]
fn sampled_marginals_are_uniform() {
    let system = ap(4);
    let profile = AdmissibleProfile::build(&system, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 100_000usize;
    let sets: Vec<Vec<Vec<u64>>> = profile.primes().iter().map(|&p| enumerate_admissible(&system, p).unwrap()).collect();
    assert_eq!(sets.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 2, 8]);
    let mut tallies: Vec<Vec<usize>> = sets.iter().map(|s| vec![0; s.len()]).collect();
    for _ in 0..draws {
        let tuple = sample_admissible(&profile, &mut rng).unwrap();
        for (i, (_, a)) in tuple.residues.iter().enumerate() {
            let slot = sets[i].iter().position(|x| x == a).expect("sample lies in the admissible set");
            tallies[i][slot] += 1;
        }
    }
    for (i, tally) in tallies.iter().enumerate() {
        let k = tally.len() as f64;
        let expected = draws as f64 / k;
        let sigma = (draws as f64 * (1.0 / k) * (1.0 - 1.0 / k)).sqrt();
        for &c in tally {
            assert!((c as f64 - expected).abs() <= 3.0 * sigma.max(1e-9), "prime #{i}: {tally:?}");
        }
        let chi2: f64 = tally.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let df = k - 1.0;
        assert!(chi2 <= df + 3.0 * (2.0 * df).sqrt() + 1e-9, "prime #{i}: chi2 {chi2}");
    }
}

#[test]
fn primes_in_dyadic_interval() {
    let line = LinearSystem::from_rows(&[vec![1, 0]]).unwrap();
    let b: LatticeBox = "1000000:1000000".parse().unwrap();
    let observed = count_prime_patterns(&line, &b).unwrap();
    assert_eq!(observed, 70435);
    let series = truncated_product(&line, 1000).unwrap();
    let predicted = predicted_prime_count(&line, &b, 1e6, &series).unwrap();
    assert!((predicted - 72382.4).abs() < 0.5);
    assert!((observed as f64 / predicted - 0.973).abs() < 5e-4);
}

#[test]
fn three_term_progressions_at_ten_thousand() {
    let system = ap(3);
    let b: LatticeBox = "10000:10000,10000:10000".parse().unwrap();
    let observed = count_prime_patterns(&system, &b).unwrap();
    assert_eq!(observed, 123_125);
    let series = truncated_product(&system, 1000).unwrap();
    assert_eq!(default_scale(&system, &b), 10_000);
    // With the smallest form value as scale the logs are too small at this
    // height; the largest coordinate lands in the expected band.
    let low = observed as f64 / predicted_prime_count(&system, &b, 1e4, &series).unwrap();
    assert!((low - 0.7285).abs() < 5e-4, "{low}");
    let high = observed as f64 / predicted_prime_count(&system, &b, 2e4, &series).unwrap();
    assert!((0.8..=1.2).contains(&high), "{high}");
}

#[test]
fn rough_counts_follow_buchstab() {
    let table = BuchstabTable::build(1e-4, 10.0).unwrap();
    let line = LinearSystem::from_rows(&[vec![1, 0]]).unwrap();
    let b: LatticeBox = "1000000:1000000".parse().unwrap();
    let ratio = count_rough_patterns(&line, &b, 5).unwrap() as f64 / predicted_rough_count(&line, &b, 5, &table).unwrap();
    assert!((ratio - 1.0).abs() <= 0.1, "{ratio}");

    let system = ap(3);
    let b: LatticeBox = "100000:100000,100000:100000".parse().unwrap();
    let observed = count_rough_patterns(&system, &b, 20).unwrap();
    assert_eq!(observed, 66_764_084);
    let ratio = observed as f64 / predicted_rough_count(&system, &b, 20, &table).unwrap();
    assert!((0.85..=1.15).contains(&ratio), "{ratio}");
}
