//! Exact local densities, truncated singular series, and the ternary
//! Goldbach series.
//!
//! For a prime p the local density of a system of `t` forms in `d`
//! variables is
//!
//! ```text
//! beta_p = p^-d * (p / (p - 1))^t * #{x in F_p^d : psi_i(x) != 0 mod p for all i}
//! ```
//!
//! held as an exact rational.
//!
//! # Tail bound
//!
//! Call p *good* when it divides neither the content of any form nor the gcd
//! of the 2x2 minors of any pair of homogeneous parts. For good p each form
//! vanishes on exactly a 1/p fraction of F_p^d and each pair on exactly
//! 1/p^2. Bonferroni's inequalities then pin the nonvanishing fraction to
//! `[1 - t/p, 1 - t/p + C(t,2)/p^2]`, and `(1 - 1/p)^t` lies in the same
//! interval, so
//!
//! ```text
//! |beta_p - 1| <= e_p := t(t-1) / (2 p^2 (1 - 1/p)^t).
//! ```
//!
//! When every prime above the cutoff z is good and `e_p < 1/2` there, the
//! omitted product satisfies `|log prod_{p>z} beta_p| <= L` with
//! `L = sum_{p>z} -log(1 - e_p)`. The sum runs explicitly over primes up to
//! `max(2z, 10^5)` and is closed with `sum_{n>Z} K/n^2 <= K/Z`. The reported
//! multiplicative tail bound is `exp(L) - 1`.
//!
//! The truncated product is accumulated in ascending p in double-double
//! arithmetic; see [`crate::highprec`].

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::highprec::DoubleDouble;
use crate::linalg::{self, big_pow, ratio, residue};
use crate::linear_forms::LinearSystem;
use crate::sieve::{self, is_prime};

/// Enumerate F_p^d directly only when p^d is at most this.
pub const BRUTE_FORCE_BUDGET: u64 = 10_000_000;

/// Inclusion-exclusion visits 2^t subsets; beyond this many forms it is refused.
pub const MAX_INCLUSION_EXCLUSION_FORMS: usize = 24;

const TAIL_TABLE_MIN: u64 = 100_000;

/// Exact beta_p for a single prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDensity {
    pub prime: u64,
    pub value: BigRational,
}

impl LocalDensity {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    pub fn numerator(&self) -> &BigInt {
        self.value.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.value.denom()
    }
}

fn require_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{p} is not prime")))
    }
}

fn enumeration_size(p: u64, d: usize) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..d {
        acc = acc.checked_mul(p)?;
    }
    Some(acc)
}

/// Count of points of F_p^d where no form vanishes, by walking every point.
pub fn nonvanishing_count_by_enumeration(system: &LinearSystem, p: u64) -> Result<u64> {
    require_prime(p)?;
    let d = system.dimension();
    let t = system.size();
    match enumeration_size(p, d) {
        Some(n) if n <= BRUTE_FORCE_BUDGET => {}
        _ => return Err(Error::BudgetExceeded { p, d, t }),
    }
    let coeffs: Vec<Vec<u64>> = system
        .forms()
        .iter()
        .map(|f| f.coefficients().iter().map(|&a| residue(a, p)).collect())
        .collect();
    let constants: Vec<u64> = system.forms().iter().map(|f| residue(f.constant(), p)).collect();

    // Split on the first coordinate; the remaining d-1 are walked as an odometer.
    let count = (0..p)
        .into_par_iter()
        .map(|x0| {
            let mut values: Vec<u64> =
                (0..t).map(|i| (constants[i] + coeffs[i][0] * x0) % p).collect();
            let mut digits = vec![0u64; d];
            let mut hits = 0u64;
            loop {
                if values.iter().all(|&v| v != 0) {
                    hits += 1;
                }
                // Advance coordinates 1..d, updating values incrementally.
                let mut k = d;
                loop {
                    k -= 1;
                    if k == 0 {
                        return hits;
                    }
                    digits[k] += 1;
                    if digits[k] < p {
                        for i in 0..t {
                            values[i] = (values[i] + coeffs[i][k]) % p;
                        }
                        break;
                    }
                    digits[k] = 0;
                    // Wrapped: subtract (p-1) steps, i.e. add one step once more mod p.
                    for i in 0..t {
                        values[i] = (values[i] + coeffs[i][k]) % p;
                    }
                }
            }
        })
        .sum();
    Ok(count)
}

/// Same count by inclusion-exclusion: each subset S of forms contributes
/// `(-1)^|S| p^(d - rank)` when its vanishing system is consistent mod p.
pub fn nonvanishing_count_by_inclusion_exclusion(system: &LinearSystem, p: u64) -> Result<BigUint> {
    require_prime(p)?;
    let d = system.dimension();
    let t = system.size();
    if t > MAX_INCLUSION_EXCLUSION_FORMS {
        return Err(Error::BudgetExceeded { p, d, t });
    }
    let rows: Vec<Vec<u64>> = system
        .forms()
        .iter()
        .map(|f| {
            let mut row: Vec<u64> = f.coefficients().iter().map(|&a| residue(a, p)).collect();
            row.push(residue(f.constant().wrapping_neg(), p));
            row
        })
        .collect();
    let powers: Vec<BigInt> = (0..=d).map(|k| big_pow(p, k)).collect();
    let total: BigInt = (0u64..1 << t)
        .into_par_iter()
        .map(|mask| {
            let mut sub: Vec<Vec<u64>> =
                (0..t).filter(|&i| mask >> i & 1 == 1).map(|i| rows[i].clone()).collect();
            let dim = if sub.is_empty() {
                Some(d)
            } else {
                linalg::solution_dimension_mod_p(&mut sub, d, p)
            };
            match dim {
                None => BigInt::zero(),
                Some(k) if mask.count_ones() % 2 == 0 => powers[k].clone(),
                Some(k) => -powers[k].clone(),
            }
        })
        .reduce(BigInt::zero, |a, b| a + b);
    total
        .to_biguint()
        .ok_or_else(|| Error::InvalidArgument("negative inclusion-exclusion total".into()))
}

/// Nonvanishing count, enumerating when p^d fits the budget and falling
/// back to inclusion-exclusion otherwise.
pub fn nonvanishing_count(system: &LinearSystem, p: u64) -> Result<BigUint> {
    match nonvanishing_count_by_enumeration(system, p) {
        Ok(n) => Ok(BigUint::from(n)),
        Err(Error::BudgetExceeded { .. }) => nonvanishing_count_by_inclusion_exclusion(system, p),
        Err(e) => Err(e),
    }
}

/// `p^-d (p/(p-1))^t * count` as an exact rational.
pub fn beta_from_count(count: &BigUint, p: u64, d: usize, t: usize) -> BigRational {
    let num = BigInt::from_biguint(Sign::Plus, count.clone()) * big_pow(p, t);
    let den = big_pow(p, d) * big_pow(p - 1, t);
    ratio(num, den)
}

pub fn beta_p(system: &LinearSystem, p: u64) -> Result<LocalDensity> {
    let count = nonvanishing_count(system, p)?;
    Ok(LocalDensity { prime: p, value: beta_from_count(&count, p, system.dimension(), system.size()) })
}

/// beta_p from the inclusion-exclusion path only.
pub fn beta_p_by_inclusion_exclusion(system: &LinearSystem, p: u64) -> Result<LocalDensity> {
    let count = nonvanishing_count_by_inclusion_exclusion(system, p)?;
    Ok(LocalDensity { prime: p, value: beta_from_count(&count, p, system.dimension(), system.size()) })
}

/// Primes at which some form has content divisible by p or some pair of
/// homogeneous parts becomes dependent mod p. Errors on a pair that is
/// dependent over Q, since then every prime is bad.
pub fn bad_primes(system: &LinearSystem) -> Result<Vec<u64>> {
    let forms = system.forms();
    let mut moduli: Vec<u64> = Vec::new();
    for f in forms {
        let content = f.coefficients().iter().fold(0u64, |g, &a| g.gcd(&a.unsigned_abs()));
        moduli.push(content);
    }
    for i in 0..forms.len() {
        for j in (i + 1)..forms.len() {
            let g = linalg::minors(forms[i].homogeneous_part(), forms[j].homogeneous_part())
                .into_iter()
                .fold(0u128, |g, m| g.gcd(&m.unsigned_abs()));
            if g == 0 {
                return Err(Error::InfiniteComplexity);
            }
            let g = u64::try_from(g).map_err(|_| Error::Overflow("pair minor gcd exceeds 64 bits".into()))?;
            moduli.push(g);
        }
    }
    let mut primes: Vec<u64> = moduli.into_iter().flat_map(prime_factors).collect();
    primes.sort_unstable();
    primes.dedup();
    Ok(primes)
}

/// The constant `e_p` with `|beta_p - 1| <= e_p` for every good prime p.
pub fn deviation_bound(t: usize, p: u64) -> f64 {
    let t = t as f64;
    let p = p as f64;
    t * (t - 1.0) / (2.0 * p * p * (1.0 - 1.0 / p).powf(t))
}

/// A truncated Euler product with exact factors and a multiplicative tail bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSeries {
    pub cutoff: u64,
    /// Product over primes `<= cutoff`, ascending, in double-double.
    pub value: DoubleDouble,
    pub truncated_value: f64,
    /// `Some(eps)`: the full product lies in `[v/(1+eps), v(1+eps)]`.
    /// `None`: no control (infinite complexity).
    pub tail_bound: Option<f64>,
    pub factors: Vec<LocalDensity>,
}

impl SingularSeries {
    fn from_factors(cutoff: u64, factors: Vec<LocalDensity>, tail_bound: Option<f64>) -> Self {
        let value = factors
            .iter()
            .fold(DoubleDouble::ONE, |acc, f| acc.mul(DoubleDouble::from_rational(&f.value)));
        SingularSeries { cutoff, value, truncated_value: value.to_f64(), tail_bound, factors }
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        self.tail_bound
            .map(|eps| (self.truncated_value / (1.0 + eps), self.truncated_value * (1.0 + eps)))
    }

    /// Exact product of the factors with prime `<= up_to`.
    pub fn exact_head(&self, up_to: u64) -> BigRational {
        self.factors
            .iter()
            .take_while(|f| f.prime <= up_to)
            .fold(BigRational::one(), |acc, f| acc * &f.value)
    }
}

fn densities_up_to(system: &LinearSystem, z: u64) -> Result<Vec<LocalDensity>> {
    sieve::primes_up_to(z).into_par_iter().map(|p| beta_p(system, p)).collect()
}

/// `prod_{p <= z} beta_p` for any system, without a tail bound.
pub fn truncated_product(system: &LinearSystem, z: u64) -> Result<SingularSeries> {
    Ok(SingularSeries::from_factors(z, densities_up_to(system, z)?, None))
}

/// `prod_{p <= z} beta_p` with a rigorous multiplicative bound on the rest.
pub fn singular_series(system: &LinearSystem, z: u64) -> Result<SingularSeries> {
    if z < 2 {
        return Err(Error::CutoffTooSmall { z, required: 2 });
    }
    if !system.is_finite_complexity() {
        return Err(Error::InfiniteComplexity);
    }
    let t = system.size();
    let largest_bad = bad_primes(system)?.last().copied().unwrap_or(2);
    if largest_bad > z {
        return Err(Error::CutoffTooSmall { z, required: largest_bad });
    }
    let tail_end = (2 * z).max(TAIL_TABLE_MIN);
    let tail_primes: Vec<u64> = sieve::primes_up_to(tail_end).into_iter().filter(|&p| p > z).collect();
    if let Some(&first) = tail_primes.first() {
        if deviation_bound(t, first) >= 0.5 {
            let required = tail_primes
                .iter()
                .find(|&&p| deviation_bound(t, p) < 0.5)
                .copied()
                .unwrap_or(tail_end);
            return Err(Error::CutoffTooSmall { z, required });
        }
    }
    let explicit: f64 = tail_primes.iter().map(|&p| -(-deviation_bound(t, p)).ln_1p()).sum();
    let k = deviation_bound(t, tail_end) * (tail_end as f64).powi(2);
    let e_end = k / (tail_end as f64).powi(2);
    let remainder = k / tail_end as f64 / (1.0 - e_end);
    let log_bound = (explicit + remainder) * (1.0 + 1e-12);
    let factors = densities_up_to(system, z)?;
    Ok(SingularSeries::from_factors(z, factors, Some(log_bound.exp_m1())))
}

/// Truncation of `prod_{p | N} (1 - 1/(p-1)^2) prod_{p !| N} (1 + 1/(p-1)^3)`
/// for odd N, with the tail bounded from both sides.
pub fn vinogradov_series(n: u64, z: u64) -> Result<SingularSeries> {
    if n % 2 == 0 {
        return Err(Error::EvenN(n));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("N must be at least 3, got {n}")));
    }
    if z < 2 {
        return Err(Error::CutoffTooSmall { z, required: 2 });
    }
    let factors: Vec<LocalDensity> = sieve::primes_up_to(z)
        .into_iter()
        .map(|p| {
            let q = BigInt::from(p - 1);
            let value = if n % p == 0 {
                let sq = &q * &q;
                ratio(&sq - 1, sq)
            } else {
                let cube = &q * &q * &q;
                ratio(&cube + 1, cube)
            };
            LocalDensity { prime: p, value }
        })
        .collect();

    let tail_end = (2 * z).max(TAIL_TABLE_MIN);
    let upper: f64 = sieve::primes_up_to(tail_end)
        .into_iter()
        .filter(|&p| p > z)
        .map(|p| (1.0 / ((p - 1) as f64).powi(3)).ln_1p())
        .sum::<f64>()
        + 1.0 / (2.0 * ((tail_end - 1) as f64).powi(2));
    let lower: f64 = prime_factors(n)
        .into_iter()
        .filter(|&p| p > z)
        .map(|p| -(-1.0 / ((p - 1) as f64).powi(2)).ln_1p())
        .sum();
    let log_bound = upper.max(lower) * (1.0 + 1e-12);
    Ok(SingularSeries::from_factors(z, factors, Some(log_bound.exp_m1())))
}

/// Distinct prime factors, ascending. `prime_factors(0)` and `prime_factors(1)` are empty.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    for p in [2u64, 3, 5] {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
    }
    let mut d = 7u64;
    while d <= 1 << 16 && d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 2;
    }
    let mut stack = vec![n];
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime(m) {
            out.push(m);
            continue;
        }
        let f = pollard_rho(m);
        stack.push(f);
        let mut rest = m / f;
        while rest % f == 0 {
            rest /= f;
        }
        stack.push(rest);
    }
    out.sort_unstable();
    out.dedup();
    out
}

// Brent's variant; `n` is odd composite with no factor below 2^16.
fn pollard_rho(n: u64) -> u64 {
    use crate::linalg::mul_mod;
    for c in 1u64.. {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        while g == 1 {
            x = f(x);
            y = f(f(y));
            g = x.abs_diff(y).gcd(&n);
        }
        if g != n {
            return g;
        }
    }
    unreachable!()
}
