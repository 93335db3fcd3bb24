//! Admissible residue tuples modulo the primorial P(z).
//!
//! A tuple `a` mod Q = P(z) is admissible when no form vanishes at `a`
//! modulo any prime p <= z. By CRT the set factors over primes, so it is
//! kept as one admissible set (or just its size) per prime.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{big_pow, residue};
use crate::local_densities::{self, BRUTE_FORCE_BUDGET};
use crate::sieve::primes_up_to;
use crate::LinearSystem;

/// Below this admissible density a prime's set is enumerated once and
/// sampled from directly instead of by rejection.
pub const ENUMERATION_DENSITY: f64 = 0.125;

#[derive(Debug, Clone)]
pub struct AdmissibleProfile {
    system: LinearSystem,
    z: u64,
    primes: Vec<u64>,
    counts: Vec<BigUint>,
    // Explicit admissible sets for the low-density primes.
    small_sets: Vec<Option<Vec<Vec<u64>>>>,
}

impl AdmissibleProfile {
    pub fn build(system: &LinearSystem, z: u64) -> Result<Self> {
        if z < 2 {
            return Err(Error::InvalidArgument(format!("cutoff z = {z} must be at least 2")));
        }
        let primes = primes_up_to(z);
        let d = system.dimension();
        let mut counts = Vec::with_capacity(primes.len());
        let mut small_sets = Vec::with_capacity(primes.len());
        for &p in &primes {
            let count = local_densities::nonvanishing_count(system, p)?;
            let space = big_pow(p, d);
            let density = BigRational::new(BigInt::from(count.clone()), space).to_f64().unwrap_or(1.0);
            let set = if density < ENUMERATION_DENSITY && !count.is_zero() {
                enumerate_admissible(system, p).ok()
            } else {
                None
            };
            counts.push(count);
            small_sets.push(set);
        }
        Ok(AdmissibleProfile { system: system.clone(), z, primes, counts, small_sets })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn z(&self) -> u64 {
        self.z
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    pub fn count(&self, p: u64) -> Option<&BigUint> {
        self.primes.iter().position(|&q| q == p).map(|i| &self.counts[i])
    }

    /// Primes with their admissible counts, in increasing order.
    pub fn per_prime(&self) -> impl Iterator<Item = (u64, &BigUint)> {
        self.primes.iter().copied().zip(&self.counts)
    }

    /// Number of admissible tuples mod Q.
    pub fn total(&self) -> BigUint {
        self.counts.iter().product()
    }

    /// The primorial Q = P(z).
    pub fn modulus(&self) -> BigUint {
        self.primes.iter().map(|&p| BigUint::from(p)).product()
    }

    /// Some prime admits no tuple at all.
    pub fn is_degenerate(&self) -> bool {
        self.counts.iter().any(Zero::is_zero)
    }

    pub fn degenerate_prime(&self) -> Option<u64> {
        self.per_prime().find(|(_, c)| c.is_zero()).map(|(p, _)| p)
    }
}

pub fn build_profile(system: &LinearSystem, z: u64) -> Result<AdmissibleProfile> {
    AdmissibleProfile::build(system, z)
}

/// Checks `count_p = p^d ((p-1)/p)^t beta_p` exactly at every prime, with
/// beta_p taken from the inclusion-exclusion path, and then the product
/// form `#A = Q^d (phi(Q)/Q)^t prod beta_p`.
pub fn admissible_count_identity_check(profile: &AdmissibleProfile) -> bool {
    let system = &profile.system;
    let d = system.dimension();
    let t = system.size();
    let mut product = BigRational::one();
    for (p, count) in profile.per_prime() {
        let Ok(beta) = local_densities::beta_p_by_inclusion_exclusion(system, p) else {
            return false;
        };
        let scale = BigRational::new(big_pow(p, d) * big_pow(p - 1, t), big_pow(p, t));
        let rhs = &scale * &beta.value;
        if BigRational::from_integer(BigInt::from(count.clone())) != rhs {
            return false;
        }
        product *= rhs;
    }
    product == BigRational::from_integer(BigInt::from(profile.total()))
}

/// The admissible points of F_p^d in lexicographic order (first coordinate
/// most significant).
pub fn enumerate_admissible(system: &LinearSystem, p: u64) -> Result<Vec<Vec<u64>>> {
    if !crate::sieve::is_prime(p) {
        return Err(Error::InvalidArgument(format!("{p} is not prime")));
    }
    let d = system.dimension();
    let size = (0..d).try_fold(1u64, |acc, _| acc.checked_mul(p));
    match size {
        Some(n) if n <= BRUTE_FORCE_BUDGET => {}
        _ => return Err(Error::BudgetExceeded { p, d, t: system.size() }),
    }
    let rows = reduced_rows(system, p);
    let mut out = Vec::new();
    let mut x = vec![0u64; d];
    loop {
        if admissible_mod(&rows, &x, p) {
            out.push(x.clone());
        }
        let mut k = d;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            x[k] += 1;
            if x[k] < p {
                break;
            }
            x[k] = 0;
        }
    }
}

/// Coefficient rows mod p with the constant appended.
fn reduced_rows(system: &LinearSystem, p: u64) -> Vec<Vec<u64>> {
    system
        .forms()
        .iter()
        .map(|f| {
            let mut row: Vec<u64> = f.coefficients().iter().map(|&a| residue(a, p)).collect();
            row.push(residue(f.constant(), p));
            row
        })
        .collect()
}

fn admissible_mod(rows: &[Vec<u64>], x: &[u64], p: u64) -> bool {
    rows.iter().all(|row| {
        let (constant, coeffs) = row.split_last().expect("row has a constant");
        let v = coeffs.iter().zip(x).fold(*constant as u128, |acc, (&a, &xi)| acc + a as u128 * xi as u128);
        v % p as u128 != 0
    })
}

/// An admissible tuple mod Q in per-prime form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdmissibleTuple {
    /// `(p, a mod p)` for every prime p <= z.
    pub residues: Vec<(u64, Vec<u64>)>,
}

impl AdmissibleTuple {
    /// CRT-combined coordinates in `[0, Q)`, or `None` when Q needs more
    /// than 128 bits.
    pub fn combine(&self) -> Option<Vec<u128>> {
        let d = self.residues.first().map_or(0, |(_, r)| r.len());
        let mut modulus: u128 = 1;
        let mut acc = vec![0u128; d];
        for (p, r) in &self.residues {
            let p = *p as u128;
            let next = modulus.checked_mul(p)?;
            // acc + modulus * k = r (mod p) with k = (r - acc) / modulus mod p.
            let inv = inverse_mod((modulus % p) as u64, p as u64) as u128;
            for (a, &rj) in acc.iter_mut().zip(r) {
                let diff = (rj as u128 + p - *a % p) % p;
                let k = diff * inv % p;
                *a += modulus * k;
            }
            modulus = next;
        }
        Some(acc)
    }
}

pub(crate) fn inverse_mod(a: u64, p: u64) -> u64 {
    crate::linalg::pow_mod(a % p, p - 2, p)
}

/// A uniform draw from the admissible tuples of `profile`.
pub fn sample_admissible<R: Rng + ?Sized>(profile: &AdmissibleProfile, rng: &mut R) -> Result<AdmissibleTuple> {
    if let Some(prime) = profile.degenerate_prime() {
        return Err(Error::DegenerateProfile { prime });
    }
    let d = profile.system.dimension();
    let mut residues = Vec::with_capacity(profile.primes.len());
    for (i, &p) in profile.primes.iter().enumerate() {
        let point = match &profile.small_sets[i] {
            Some(set) => set[rng.gen_range(0..set.len())].clone(),
            None => {
                let rows = reduced_rows(&profile.system, p);
                loop {
                    let x: Vec<u64> = (0..d).map(|_| rng.gen_range(0..p)).collect();
                    if admissible_mod(&rows, &x, p) {
                        break x;
                    }
                }
            }
        };
        residues.push((p, point));
    }
    Ok(AdmissibleTuple { residues })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sys(rows: &[&[i64]]) -> LinearSystem {
        LinearSystem::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn units_mod_six() {
        let s = sys(&[&[1, 0]]);
        let prof = build_profile(&s, 3).unwrap();
        assert_eq!(prof.primes(), &[2, 3]);
        assert_eq!(prof.counts(), &[BigUint::from(1u32), BigUint::from(2u32)]);
        assert_eq!(prof.total(), BigUint::from(2u32));
        assert!(!prof.is_degenerate());
        assert!(admissible_count_identity_check(&prof));
        assert!(admissible_count_identity_check(&build_profile(&s, 5).unwrap()));
    }

    #[test]
    fn progressions() {
        let ap4 = LinearSystem::arithmetic_progression(4).unwrap();
        let prof = build_profile(&ap4, 3).unwrap();
        assert_eq!(prof.total(), BigUint::from(2u32));
        assert!(admissible_count_identity_check(&build_profile(&ap4, 13).unwrap()));
        let ap3 = LinearSystem::arithmetic_progression(3).unwrap();
        assert!(admissible_count_identity_check(&build_profile(&ap3, 7).unwrap()));

        assert_eq!(enumerate_admissible(&sys(&[&[1, 0]]), 3).unwrap(), vec![vec![1], vec![2]]);
        assert_eq!(enumerate_admissible(&ap4, 3).unwrap(), vec![vec![1, 0], vec![2, 0]]);
        assert_eq!(enumerate_admissible(&ap3, 2).unwrap(), vec![vec![1, 0]]);
    }

    #[test]
    fn degenerate_profiles() {
        // x and x + 1 cannot both be odd.
        let s = sys(&[&[1, 0], &[1, 1]]);
        let prof = build_profile(&s, 5).unwrap();
        assert!(prof.is_degenerate());
        assert_eq!(prof.degenerate_prime(), Some(2));
        assert!(admissible_count_identity_check(&prof));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_admissible(&prof, &mut rng), Err(Error::DegenerateProfile { prime: 2 }));
    }

    #[test]
    fn zero_count_iff_zero_density() {
        let systems = [
            sys(&[&[1, 0], &[1, 1]]),
            sys(&[&[1, 0], &[1, 2], &[1, 4]]),
            sys(&[&[1, 0, 0], &[0, 1, 0], &[1, 1, 0]]),
            LinearSystem::arithmetic_progression(5).unwrap(),
        ];
        for s in &systems {
            let prof = build_profile(s, 13).unwrap();
            for (p, c) in prof.per_prime() {
                let beta = local_densities::beta_p(s, p).unwrap();
                assert_eq!(c.is_zero(), beta.value.is_zero(), "p = {p}");
            }
        }
    }

    #[test]
    fn totals_are_multiplicative() {
        let s = LinearSystem::arithmetic_progression(3).unwrap();
        let small = build_profile(&s, 5).unwrap();
        let large = build_profile(&s, 13).unwrap();
        let extra: BigUint = large.per_prime().filter(|&(p, _)| p > 5).map(|(_, c)| c.clone()).product();
        assert_eq!(large.total(), small.total() * extra);
    }

    #[test]
    fn sampling_mod_six() {
        let prof = build_profile(&sys(&[&[1, 0]]), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = [0u32; 6];
        for _ in 0..2000 {
            let a = sample_admissible(&prof, &mut rng).unwrap();
            let x = a.combine().unwrap()[0] as usize;
            seen[x] += 1;
        }
        assert_eq!(seen[0] + seen[2] + seen[3] + seen[4], 0);
        assert!(seen[1] > 900 && seen[5] > 900);

        let first = sample_admissible(&prof, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let again = sample_admissible(&prof, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn samples_are_admissible() {
        let s = sys(&[&[1, 2, 1], &[3, -1, 4], &[1, 1, 0]]);
        let prof = build_profile(&s, 23).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = sample_admissible(&prof, &mut rng).unwrap();
            let x = a.combine().unwrap();
            let point: Vec<i64> = x.iter().map(|&v| v as i64).collect();
            let values = s.evaluate(&point).unwrap();
            for p in primes_up_to(23) {
                for v in &values {
                    assert_ne!(v.rem_euclid(p as i64), 0);
                }
            }
        }
    }

    #[test]
    fn combine_overflows_gracefully() {
        let residues = primes_up_to(120).into_iter().map(|p| (p, vec![1])).collect();
        assert_eq!(AdmissibleTuple { residues }.combine(), None);
    }
}
