//! Segmented Eratosthenes over signed 64-bit ranges.
//!
//! Two indicators are supported. `Prime` marks n when |n| is prime, so 0 and
//! ±1 are never marked. `Rough(z)` marks n when gcd(n, P(z)) = 1, P(z) the
//! product of the primes up to z; ±1 are marked and 0 is not. The primorial
//! itself is never formed, only its list of prime factors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mul_mod, pow_mod};

/// Numbers per parallel work unit; a multiple of 64 so segments concatenate
/// word-aligned.
pub const SEGMENT_LEN: u64 = 1 << 20;

/// Widest range a single [`SegmentedSieve`] may cover.
pub const MAX_RANGE_WIDTH: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SieveMode {
    Prime,
    Rough(u64),
}

/// Packed bit vector, bit `i` lives in `words[i / 64]` at position `i % 64`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitSet {
    words: Vec<u64>,
    len: u64,
}

impl BitSet {
    pub fn zeros(len: u64) -> Self {
        BitSet { words: vec![0; len.div_ceil(64) as usize], len }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        debug_assert!(i < self.len);
        self.words[(i >> 6) as usize] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u64, value: bool) {
        let w = &mut self.words[(i >> 6) as usize];
        if value {
            *w |= 1 << (i & 63);
        } else {
            *w &= !(1 << (i & 63));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as u64;
                w &= w - 1;
                Some(k as u64 * 64 + bit)
            })
        })
    }

    /// Copy bits `[start, start + len)` into `out`, bit 0 of `out[0]` first.
    /// Bits past `len` in the last word are cleared.
    pub fn extract(&self, start: u64, len: u64, out: &mut [u64]) {
        debug_assert!(start + len <= self.len);
        let nwords = len.div_ceil(64) as usize;
        let base = (start >> 6) as usize;
        let shift = (start & 63) as u32;
        for (k, slot) in out.iter_mut().take(nwords).enumerate() {
            let lo = self.words[base + k] >> shift;
            let hi = if shift > 0 {
                self.words.get(base + k + 1).map_or(0, |w| w << (64 - shift))
            } else {
                0
            };
            *slot = lo | hi;
        }
        let tail = (len & 63) as u32;
        if tail > 0 {
            out[nwords - 1] &= (1u64 << tail) - 1;
        }
    }

    /// Keep every `stride`-th bit starting at `offset`.
    pub fn decimate(&self, offset: u64, stride: u64) -> BitSet {
        if stride == 1 && offset == 0 {
            return self.clone();
        }
        let len = if offset >= self.len { 0 } else { (self.len - offset).div_ceil(stride) };
        let mut out = BitSet::zeros(len);
        for k in 0..len {
            if self.get(offset + k * stride) {
                out.words[(k >> 6) as usize] |= 1 << (k & 63);
            }
        }
        out
    }

    fn append(&mut self, other: &BitSet) {
        if self.len % 64 == 0 {
            self.words.truncate((self.len / 64) as usize);
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            return;
        }
        let start = self.len;
        self.len += other.len;
        self.words.resize(self.len.div_ceil(64) as usize, 0);
        for i in other.iter_ones() {
            self.set(start + i, true);
        }
    }
}

/// Base primes for sieving. Prime-mode ranges need `limit^2 >= hi - 1`,
/// rough-mode ranges need `limit >= z`.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    primes: Vec<u64>,
    limit: u64,
}

impl PrimeTable {
    pub fn new(limit: u64) -> Self {
        PrimeTable { primes: primes_up_to(limit), limit }
    }

    /// A table large enough for prime-mode sieving of magnitudes up to
    /// `max_value` and rough-mode sieving with cutoff `z`.
    pub fn covering(max_value: u64, z: u64) -> Self {
        Self::new(Self::covering_limit(max_value, z))
    }

    /// The limit used by [`PrimeTable::covering`].
    pub fn covering_limit(max_value: u64, z: u64) -> u64 {
        (isqrt(max_value) + 1).max(z).max(2)
    }

    pub fn from_primes(primes: Vec<u64>, limit: u64) -> Self {
        PrimeTable { primes, limit }
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    fn check(&self, max_magnitude: u64, mode: SieveMode) -> Result<()> {
        let ok = match mode {
            SieveMode::Prime => {
                let l = self.limit as u128;
                l * l >= max_magnitude as u128
            }
            SieveMode::Rough(z) => self.limit >= z,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BasePrimesInsufficient { hi: max_magnitude.saturating_add(1), base_limit: self.limit })
        }
    }

    pub fn sieve_range(&self, lo: i64, hi: i64, mode: SieveMode) -> Result<SegmentedSieve> {
        if hi < lo {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi})")));
        }
        let width = (hi as i128 - lo as i128) as u128;
        if width > MAX_RANGE_WIDTH as u128 {
            return Err(Error::RangeTooWide { width, max: MAX_RANGE_WIDTH });
        }
        if lo == i64::MIN {
            return Err(Error::Overflow("|i64::MIN| is not representable".into()));
        }
        let max_mag = if hi <= 0 {
            lo.unsigned_abs()
        } else {
            lo.unsigned_abs().max(hi as u64 - 1)
        };
        self.check(max_mag, mode)?;

        let bits = if lo >= 0 {
            self.sieve_magnitudes(lo as u64, hi as u64, mode)
        } else {
            let mut bits = BitSet::zeros(width as u64);
            let neg_end = hi.min(0);
            // n in [lo, neg_end) has magnitude in (-neg_end, -lo].
            let mag_lo = neg_end.unsigned_abs() + 1;
            let mag_hi = lo.unsigned_abs() + 1;
            let neg = self.sieve_magnitudes(mag_lo, mag_hi, mode);
            for m in neg.iter_ones() {
                let n = -((mag_lo + m) as i64);
                bits.set((n - lo) as u64, true);
            }
            if hi > 0 {
                let pos = self.sieve_magnitudes(0, hi as u64, mode);
                let offset = lo.unsigned_abs();
                for m in pos.iter_ones() {
                    bits.set(offset + m, true);
                }
            }
            bits
        };
        Ok(SegmentedSieve { lo, hi, mode, bits })
    }

    fn sieve_magnitudes(&self, lo: u64, hi: u64, mode: SieveMode) -> BitSet {
        if hi <= lo {
            return BitSet::zeros(0);
        }
        let nseg = (hi - lo).div_ceil(SEGMENT_LEN);
        let segments: Vec<BitSet> = (0..nseg)
            .into_par_iter()
            .map(|k| {
                let s_lo = lo + k * SEGMENT_LEN;
                let s_hi = (s_lo + SEGMENT_LEN).min(hi);
                sieve_segment(s_lo, s_hi, mode, &self.primes)
            })
            .collect();
        let mut out = BitSet { words: Vec::with_capacity((hi - lo).div_ceil(64) as usize), len: 0 };
        for seg in &segments {
            out.append(seg);
        }
        out
    }
}

fn sieve_segment(lo: u64, hi: u64, mode: SieveMode, primes: &[u64]) -> BitSet {
    let len = hi - lo;
    let mut bits = BitSet { words: vec![!0u64; len.div_ceil(64) as usize], len };
    let tail = len % 64;
    if tail > 0 {
        *bits.words.last_mut().unwrap() = (1u64 << tail) - 1;
    }
    let clear = |bits: &mut BitSet, n: u64| bits.words[((n - lo) >> 6) as usize] &= !(1u64 << ((n - lo) & 63));
    match mode {
        SieveMode::Prime => {
            for n in lo..hi.min(2) {
                clear(&mut bits, n);
            }
            for &p in primes {
                let sq = p * p;
                if sq >= hi {
                    break;
                }
                let mut m = sq.max(lo.div_ceil(p) * p);
                while m < hi {
                    clear(&mut bits, m);
                    m += p;
                }
            }
        }
        SieveMode::Rough(z) => {
            if lo == 0 {
                clear(&mut bits, 0);
            }
            for &p in primes.iter().take_while(|&&p| p <= z) {
                let mut m = lo.div_ceil(p) * p;
                while m < hi {
                    clear(&mut bits, m);
                    m += p;
                }
            }
        }
    }
    bits
}

/// Indicator bits for every integer of `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedSieve {
    lo: i64,
    hi: i64,
    mode: SieveMode,
    bits: BitSet,
}

impl SegmentedSieve {
    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn mode(&self) -> SieveMode {
        self.mode
    }

    pub fn bits(&self) -> &BitSet {
        &self.bits
    }

    pub fn len(&self) -> u64 {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.lo..self.hi).contains(&n)
    }

    /// Indicator at `n`; panics when `n` is outside the range.
    #[inline]
    pub fn get(&self, n: i64) -> bool {
        assert!(self.contains(n), "{n} outside [{}, {})", self.lo, self.hi);
        self.bits.get((n - self.lo) as u64)
    }

    pub fn count(&self) -> u64 {
        self.bits.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.bits.iter_ones().map(|i| self.lo + i as i64)
    }

    /// Join with the sieve of the adjacent range `[self.hi, other.hi)`.
    pub fn concat(mut self, other: &SegmentedSieve) -> Result<SegmentedSieve> {
        if other.lo != self.hi || other.mode != self.mode {
            return Err(Error::InvalidArgument("sieves are not adjacent with equal modes".into()));
        }
        self.bits.append(&other.bits);
        self.hi = other.hi;
        Ok(self)
    }
}

/// Sieve `[lo, hi)` with a base-prime table sized for the range.
pub fn sieve_range(lo: i64, hi: i64, mode: SieveMode) -> Result<SegmentedSieve> {
    let max_mag = lo.unsigned_abs().max(hi.unsigned_abs());
    let z = match mode {
        SieveMode::Prime => 2,
        SieveMode::Rough(z) => z,
    };
    if let SieveMode::Rough(z) = mode {
        if z > MAX_RANGE_WIDTH {
            return Err(Error::InvalidArgument(format!("roughness cutoff {z} is too large")));
        }
    }
    PrimeTable::covering(max_mag, z).sieve_range(lo, hi, mode)
}

/// All primes `<= z` in increasing order.
pub fn primes_up_to(z: u64) -> Vec<u64> {
    if z < 2 {
        return Vec::new();
    }
    if z < 1 << 24 {
        return small_primes(z as usize);
    }
    let table = PrimeTable { primes: small_primes(isqrt(z) as usize), limit: isqrt(z) };
    let mut out = Vec::new();
    let mut lo = 0;
    while lo <= z {
        let hi = (lo + MAX_RANGE_WIDTH).min(z + 1);
        out.extend(table.sieve_magnitudes(lo, hi, SieveMode::Prime).iter_ones().map(|i| lo + i));
        lo = hi;
    }
    out
}

// Odd-only byte sieve for the base table.
fn small_primes(z: usize) -> Vec<u64> {
    if z < 2 {
        return Vec::new();
    }
    let half = (z - 1) / 2; // index i stands for 2i + 3
    let mut composite = vec![false; half];
    let mut i = 0;
    loop {
        let p = 2 * i + 3;
        if p * p > z {
            break;
        }
        if !composite[i] {
            let mut j = (p * p - 3) / 2;
            while j < half {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    std::iter::once(2)
        .chain((0..half).filter(|&i| !composite[i]).map(|i| (2 * i + 3) as u64))
        .collect()
}

/// Number of primes in `[lo, hi)`, sieved in chunks of at most [`MAX_RANGE_WIDTH`].
pub fn prime_count(lo: u64, hi: u64) -> Result<u64> {
    count_chunked(lo, hi, SieveMode::Prime)
}

/// `#{1 <= n <= x : gcd(n, P(z)) = 1}`.
pub fn rough_count(x: u64, z: u64) -> Result<u64> {
    if z > x {
        return Err(Error::InvalidArgument(format!("rough_count needs z <= x, got z = {z}, x = {x}")));
    }
    count_chunked(1, x + 1, SieveMode::Rough(z))
}

fn count_chunked(lo: u64, hi: u64, mode: SieveMode) -> Result<u64> {
    if hi > i64::MAX as u64 {
        return Err(Error::Overflow(format!("range end {hi} exceeds 2^63")));
    }
    let z = match mode {
        SieveMode::Prime => 2,
        SieveMode::Rough(z) => z,
    };
    let table = PrimeTable::covering(hi, z);
    let mut total = 0;
    let mut start = lo;
    while start < hi {
        let end = (start + MAX_RANGE_WIDTH).min(hi);
        total += table.sieve_range(start as i64, end as i64, mode)?.count();
        start = end;
    }
    Ok(total)
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|s| s <= n) {
        r += 1;
    }
    r
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primality of |n|, with 0 and ±1 not prime.
pub fn is_prime_signed(n: i64) -> bool {
    is_prime(n.unsigned_abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent trial-division oracle.
    fn trial_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }

    #[test]
    fn small_prime_lists() {
        assert_eq!(primes_up_to(10), vec![2, 3, 5, 7]);
        assert_eq!(primes_up_to(2), vec![2]);
        assert_eq!(primes_up_to(1), Vec::<u64>::new());
        assert_eq!(primes_up_to(3), vec![2, 3]);
        let listed = primes_up_to(1000);
        let oracle: Vec<u64> = (0..=1000).filter(|&n| trial_prime(n)).collect();
        assert_eq!(listed, oracle);
    }

    #[test]
    fn prime_mode_examples() {
        let s = sieve_range(10, 20, SieveMode::Prime).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![11, 13, 17, 19]);
        let s = sieve_range(-10, 10, SieveMode::Prime).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![-7, -5, -3, -2, 2, 3, 5, 7]);
        assert!(!s.get(0) && !s.get(1) && !s.get(-1));
    }

    #[test]
    fn rough_mode_examples() {
        let s = sieve_range(1, 30, SieveMode::Rough(5)).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 7, 11, 13, 17, 19, 23, 29]);
        let oracle: Vec<i64> = (1..30).filter(|&n| gcd(n as u64, 30) == 1).collect();
        assert_eq!(s.iter().collect::<Vec<_>>(), oracle);
        let s = sieve_range(-3, 2, SieveMode::Rough(5)).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![-1, 1]);
    }

    #[test]
    fn rough_counts() {
        assert_eq!(rough_count(30, 5).unwrap(), 8);
        for x in [2u64, 9, 10, 1001] {
            assert_eq!(rough_count(x, 2).unwrap(), x.div_ceil(2));
        }
        assert!(rough_count(3, 5).is_err());
    }

    #[test]
    fn segment_boundaries() {
        let lo = SEGMENT_LEN as i64 - 100;
        let hi = 3 * SEGMENT_LEN as i64 + 77;
        let s = sieve_range(lo, hi, SieveMode::Prime).unwrap();
        for n in (lo..hi).step_by(997) {
            assert_eq!(s.get(n), is_prime(n as u64), "n = {n}");
        }
        assert_eq!(s.len(), (hi - lo) as u64);
    }

    #[test]
    fn errors() {
        assert!(matches!(sieve_range(0, 1 << 31, SieveMode::Prime), Err(Error::RangeTooWide { .. })));
        let table = PrimeTable::new(10);
        assert!(matches!(table.sieve_range(0, 200, SieveMode::Prime), Err(Error::BasePrimesInsufficient { .. })));
        assert!(table.sieve_range(0, 101, SieveMode::Prime).is_ok());
        assert!(matches!(table.sieve_range(0, 50, SieveMode::Rough(11)), Err(Error::BasePrimesInsufficient { .. })));
    }

    #[test]
    fn miller_rabin() {
        for n in 0..5000u64 {
            assert_eq!(is_prime(n), trial_prime(n), "n = {n}");
        }
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to 2, 3, 5, 7
        assert!(is_prime_signed(-7) && !is_prime_signed(-1) && !is_prime_signed(0));
    }

    #[test]
    fn bitset_extract_and_decimate() {
        let mut b = BitSet::zeros(200);
        for i in (0..200).filter(|i| i % 3 == 0) {
            b.set(i, true);
        }
        let mut out = [0u64; 2];
        b.extract(5, 70, &mut out);
        for k in 0..70u64 {
            assert_eq!(out[(k / 64) as usize] >> (k % 64) & 1 == 1, (k + 5) % 3 == 0);
        }
        assert_eq!(out[1] >> 6, 0);
        let d = b.decimate(1, 2);
        assert_eq!(d.len(), 100);
        for k in 0..100 {
            assert_eq!(d.get(k), (1 + 2 * k) % 3 == 0);
        }
    }
}
