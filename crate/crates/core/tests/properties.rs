use maier_lab::admissible::{self, AdmissibleProfile};
use maier_lab::local_densities::{self, bad_primes, deviation_bound};
use maier_lab::maier::{run_experiment, MaierConfig, RunMode};
use maier_lab::patterns::{count_prime_patterns, count_rough_patterns, LatticeBox};
use maier_lab::sieve::{is_prime, is_prime_signed, primes_up_to, sieve_range, SieveMode};
use maier_lab::{Complexity, LinearSystem};
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system_strategy(max_d: usize, max_t: usize, coef: i64) -> impl Strategy<Value = LinearSystem> {
    (1..=max_d, 1..=max_t).prop_flat_map(move |(d, t)| {
        prop::collection::vec(
            (prop::collection::vec(-coef..=coef, d), -10i64..=10)
                .prop_filter("nonzero form", |(c, _)| c.iter().any(|&a| a != 0)),
            t,
        )
        .prop_map(|forms| {
            let rows: Vec<Vec<i64>> = forms
                .into_iter()
                .map(|(mut c, k)| {
                    c.push(k);
                    c
                })
                .collect();
            LinearSystem::from_rows(&rows).unwrap()
        })
    })
}

fn finite_system(max_d: usize, max_t: usize) -> impl Strategy<Value = LinearSystem> {
    system_strategy(max_d, max_t, 5).prop_filter("finite complexity", |s| s.is_finite_complexity())
}

/// Random unimodular 2x2 matrix as a product of elementary ones.
fn unimodular() -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec((0..4u8, -3i64..=3), 1..5).prop_map(|steps| {
        let mut m = vec![vec![1i64, 0], vec![0, 1]];
        for (kind, k) in steps {
            let e = match kind {
                0 => vec![vec![1, k], vec![0, 1]],
                1 => vec![vec![1, 0], vec![k, 1]],
                2 => vec![vec![0, 1], vec![1, 0]],
                _ => vec![vec![-1, 0], vec![0, 1]],
            };
            m = (0..2).map(|i| (0..2).map(|j| (0..2).map(|l| m[i][l] * e[l][j]).sum()).collect()).collect();
        }
        m
    })
}

fn embed(m: &[Vec<i64>], d: usize) -> Vec<Vec<i64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i < 2 && j < 2 { m[i][j] } else if i == j { 1 } else { 0 }).collect())
        .collect()
}

fn rough_by_division(v: i64, z: u64) -> bool {
    let m = v.unsigned_abs();
    m != 0 && (2..=z).all(|q| m % q != 0 || !is_prime(q))
}

fn brute_count(system: &LatticeBoxSystem, keep: impl Fn(i64) -> bool) -> u64 {
    let (s, b) = system;
    b.partition(1)
        .iter()
        .filter(|p| s.evaluate(p.corner()).unwrap().into_iter().all(&keep))
        .count() as u64
}

type LatticeBoxSystem = (LinearSystem, LatticeBox);

fn system_and_box(max_volume: u64) -> impl Strategy<Value = LatticeBoxSystem> {
    system_strategy(3, 4, 6).prop_flat_map(move |s| {
        let d = s.dimension();
        let side_cap = match d {
            1 => max_volume,
            2 => 100,
            _ => 21,
        };
        (Just(s), prop::collection::vec(-200i64..200, d), prop::collection::vec(1..=side_cap, d))
            .prop_map(|(s, c, h)| (s, LatticeBox::new(c, h).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

    #[test]
    fn infinite_complexity_matches_independence(s in system_strategy(3, 5, 4)) {
        let c = s.complexity().unwrap();
        prop_assert_eq!(c == Complexity::Infinite, !s.is_finite_complexity());
    }

    #[test]
    fn complexity_invariances(
        s in system_strategy(3, 5, 4),
        m in unimodular(),
        shifts in prop::collection::vec(-7i64..=7, 5),
        seed in any::<u64>(),
    ) {
        let c = s.complexity().unwrap();
        let mut rows = s.to_rows();
        // Constants only.
        for (row, k) in rows.iter_mut().zip(&shifts) {
            *row.last_mut().unwrap() += k;
        }
        prop_assert_eq!(LinearSystem::from_rows(&rows).unwrap().complexity().unwrap(), c);
        // Permutation.
        use rand::seq::SliceRandom;
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(LinearSystem::from_rows(&rows).unwrap().complexity().unwrap(), c);
        // Change of variables.
        if s.dimension() >= 2 {
            let moved = s.change_variables(&embed(&m, s.dimension())).unwrap();
            prop_assert_eq!(moved.complexity().unwrap(), c);
        }
    }

    #[test]
    fn text_round_trip(s in system_strategy(3, 5, 9)) {
        prop_assert_eq!(LinearSystem::parse(&s.to_text()).unwrap(), s.clone());
        let json = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(LinearSystem::parse(&json).unwrap(), s);
    }

    #[test]
    fn density_paths_agree(s in system_strategy(3, 4, 6)) {
        for p in primes_up_to(13) {
            let by_enum = local_densities::nonvanishing_count_by_enumeration(&s, p).unwrap();
            let by_ie = local_densities::nonvanishing_count_by_inclusion_exclusion(&s, p).unwrap();
            prop_assert_eq!(by_ie.to_u64().unwrap(), by_enum, "p = {}", p);
        }
    }

    #[test]
    fn good_primes_are_close_to_one(s in finite_system(3, 5)) {
        let bad = bad_primes(&s).unwrap();
        let start = bad.last().copied().unwrap_or(1);
        for p in primes_up_to(1000).into_iter().filter(|&p| p > start) {
            let beta = local_densities::beta_p(&s, p).unwrap();
            let dev = (beta.value.clone() - num_rational::BigRational::one()).abs().to_f64().unwrap();
            prop_assert!(dev <= deviation_bound(s.size(), p) * (1.0 + 1e-12), "p = {}, dev = {}", p, dev);
        }
    }

    #[test]
    fn admissible_identity_and_zeros(s in system_strategy(3, 4, 6), z in 2u64..=13) {
        let profile = AdmissibleProfile::build(&s, z).unwrap();
        prop_assert!(admissible::admissible_count_identity_check(&profile));
        for (p, c) in profile.per_prime() {
            let beta = local_densities::beta_p(&s, p).unwrap();
            prop_assert_eq!(c.is_zero(), beta.value.is_zero());
        }
    }

    #[test]
    fn admissible_totals_multiply(s in system_strategy(3, 4, 6), z1 in 2u64..=7, extra in 0u64..=12) {
        let z2 = z1 + extra;
        let small = AdmissibleProfile::build(&s, z1).unwrap();
        let large = AdmissibleProfile::build(&s, z2).unwrap();
        let tail: num_bigint::BigUint = large.per_prime().filter(|&(p, _)| p > z1).map(|(_, c)| c.clone()).product();
        prop_assert_eq!(large.total(), small.total() * tail);
    }

    #[test]
    fn samples_are_admissible(s in system_strategy(3, 4, 6), z in 2u64..=23, seed in any::<u64>()) {
        let profile = AdmissibleProfile::build(&s, z).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match admissible::sample_admissible(&profile, &mut rng) {
            Err(_) => prop_assert!(profile.is_degenerate()),
            Ok(tuple) => {
                let a: Vec<i64> = tuple.combine().unwrap().iter().map(|&v| v as i64).collect();
                for v in s.evaluate(&a).unwrap() {
                    for p in primes_up_to(z) {
                        prop_assert_ne!(v.rem_euclid(p as i64), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn sieve_segments_concatenate(a in -5000i64..5000, w1 in 0i64..3000, w2 in 0i64..3000, z in 2u64..50) {
        for mode in [SieveMode::Prime, SieveMode::Rough(z)] {
            let whole = sieve_range(a, a + w1 + w2, mode).unwrap();
            let left = sieve_range(a, a + w1, mode).unwrap();
            let right = sieve_range(a + w1, a + w1 + w2, mode).unwrap();
            prop_assert_eq!(left.concat(&right).unwrap(), whole);
        }
    }

    #[test]
    fn rough_bits_cover_prime_bits(a in 0i64..1_000_000, w in 1i64..5000, z in 2u64..200) {
        let primes = sieve_range(a, a + w, SieveMode::Prime).unwrap();
        let rough = sieve_range(a, a + w, SieveMode::Rough(z)).unwrap();
        for n in a..a + w {
            if n > z as i64 && primes.get(n) {
                prop_assert!(rough.get(n));
            }
            prop_assert_eq!(rough.get(n), rough_by_division(n, z));
        }
    }

    #[test]
    fn patterns_match_brute_force(sb in system_and_box(2000)) {
        let (s, b) = &sb;
        prop_assume!(b.volume() <= 10_000);
        prop_assert_eq!(count_prime_patterns(s, b).unwrap(), brute_count(&sb, is_prime_signed));
        prop_assert_eq!(count_rough_patterns(s, b, 7).unwrap(), brute_count(&sb, |v| rough_by_division(v, 7)));
    }

    #[test]
    fn pattern_additivity_and_translation(sb in system_and_box(3000), side in 1u64..40, v in prop::collection::vec(-50i64..50, 3)) {
        let (s, b) = &sb;
        let whole = count_prime_patterns(s, b).unwrap();
        let parts: u64 = b.partition(side).iter().map(|p| count_prime_patterns(s, p).unwrap()).sum();
        prop_assert_eq!(whole, parts);
        let v = &v[..s.dimension()];
        let moved = count_prime_patterns(s, &b.translate(v).unwrap()).unwrap();
        prop_assert_eq!(moved, count_prime_patterns(&s.translate(v).unwrap(), b).unwrap());
    }

    #[test]
    fn rough_dominates_prime_above_cutoff(coefs in prop::collection::vec(1i64..4, 2), z in 2u64..30, lo in 31i64..500, side in 1u64..60) {
        // Positive coefficients and corner above z keep all values above z.
        let s = LinearSystem::from_rows(&[vec![1, 0, 0], vec![coefs[0], coefs[1], 0]]).unwrap();
        let b = LatticeBox::cube(lo, side, 2).unwrap();
        prop_assert!(count_rough_patterns(&s, &b, z).unwrap() >= count_prime_patterns(&s, &b).unwrap());
    }

    #[test]
    fn double_count_identity(s in system_strategy(2, 3, 3), big_u in 1u64..20, k in 1i64..4) {
        prop_assume!(s.dimension() == 1 || big_u <= 8);
        let x = 216 * k;
        let cfg = MaierConfig::new(s, 3, big_u, x, 0.5);
        match run_experiment(&cfg) {
            Ok(res) => {
                prop_assert_eq!(res.mode, RunMode::Exhaustive);
                prop_assert_eq!(res.row_total, res.column_total);
                prop_assert_eq!(res.identity_holds, Some(true));
                if let (Some(lo), Some(mean), Some(hi)) = (res.min_ratio, res.mean_ratio, res.max_ratio) {
                    prop_assert!(lo <= mean && mean <= hi);
                }
            }
            // Degenerate series give no prediction to compare against.
            Err(e) => prop_assert!(matches!(e, maier_lab::Error::UOutOfTable { .. }), "{e}"),
        }
    }
}

#[test]
fn prime_mode_matches_miller_rabin() {
    use rand::Rng;
    let base = 1_000_000_000_000i64;
    let s = sieve_range(base, base + 2_000_000, SieveMode::Prime).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let n = rng.gen_range(base..base + 2_000_000);
        assert_eq!(s.get(n), is_prime(n as u64), "{n}");
    }
}

#[test]
fn empty_box_is_rejected() {
    assert!(LatticeBox::new(vec![0], vec![0]).is_err());
}
