//! Small exact linear algebra: ranks over the rationals and over F_p.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Rank over Q of the matrix whose rows are given.
pub fn rank_rational(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
        .collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = m[rank][col].recip();
        for c in col..ncols {
            m[rank][c] = &m[rank][c] * &inv;
        }
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..ncols {
                    let delta = &factor * &m[rank][c];
                    m[r][c] -= delta;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Is `target` an affine combination of `class` (coefficients summing to one)?
///
/// Decided by comparing ranks of the vectors lifted with a trailing 1.
/// The empty class spans nothing.
pub fn in_affine_span(target: &[i64], class: &[&[i64]]) -> bool {
    if class.is_empty() {
        return false;
    }
    let lift = |v: &[i64]| {
        let mut row = v.to_vec();
        row.push(1);
        row
    };
    let mut rows: Vec<Vec<i64>> = class.iter().map(|v| lift(v)).collect();
    let base = rank_rational(&rows);
    rows.push(lift(target));
    rank_rational(&rows) == base
}

/// Two integer vectors are linearly dependent over Q iff every 2x2 minor vanishes.
pub fn linearly_dependent(a: &[i64], b: &[i64]) -> bool {
    minors(a, b).iter().all(|&m| m == 0)
}

/// All 2x2 minors `a_k b_l - a_l b_k` for k < l.
pub fn minors(a: &[i64], b: &[i64]) -> Vec<i128> {
    let mut out = Vec::new();
    for k in 0..a.len() {
        for l in (k + 1)..a.len() {
            out.push(a[k] as i128 * b[l] as i128 - a[l] as i128 * b[k] as i128);
        }
    }
    out
}

pub(crate) fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Reduce a signed integer into [0, p).
pub(crate) fn residue(v: i64, p: u64) -> u64 {
    (v as i128).rem_euclid(p as i128) as u64
}

/// Number of solutions in F_p^d of `A x = b`, where each row of `augmented`
/// is `[a_1, ..., a_d, b]` already reduced mod p. Returns `None` when the
/// system is inconsistent, otherwise `Some(d - rank A)`.
pub fn solution_dimension_mod_p(augmented: &mut [Vec<u64>], d: usize, p: u64) -> Option<usize> {
    let mut rank = 0;
    for col in 0..d {
        let Some(pivot) = (rank..augmented.len()).find(|&r| augmented[r][col] != 0) else {
            continue;
        };
        augmented.swap(rank, pivot);
        let inv = pow_mod(augmented[rank][col], p - 2, p);
        for c in col..=d {
            augmented[rank][c] = mul_mod(augmented[rank][c], inv, p);
        }
        for r in 0..augmented.len() {
            if r != rank && augmented[r][col] != 0 {
                let factor = augmented[r][col];
                for c in col..=d {
                    let sub = mul_mod(factor, augmented[rank][c], p);
                    augmented[r][c] = (augmented[r][c] + p - sub) % p;
                }
            }
        }
        rank += 1;
    }
    if augmented[rank..].iter().any(|row| row[d] != 0) {
        None
    } else {
        Some(d - rank)
    }
}

pub(crate) fn big_pow(base: u64, exp: usize) -> BigInt {
    num_traits::pow(BigInt::from(base), exp)
}

pub(crate) fn ratio(num: BigInt, den: BigInt) -> BigRational {
    if den.is_one() {
        BigRational::from_integer(num)
    } else {
        BigRational::new(num, den)
    }
}
