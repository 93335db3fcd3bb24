//! On-disk cache of base primes, keyed by sieving limit.
//!
//! Enabled by pointing `MAIER_LAB_CACHE` at a directory. Unreadable or
//! corrupt entries are ignored and rebuilt.

use std::fs;
use std::path::PathBuf;

use maier_lab::sieve::PrimeTable;

pub const CACHE_ENV: &str = "MAIER_LAB_CACHE";

fn entry(limit: u64) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV)?;
    Some(PathBuf::from(dir).join(format!("base-primes-{limit}.bin")))
}

fn decode(bytes: &[u8]) -> Option<Vec<u64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// A table equivalent to `PrimeTable::covering(max_value, z)`.
pub fn covering_table(max_value: u64, z: u64) -> PrimeTable {
    let limit = PrimeTable::covering_limit(max_value, z);
    let Some(path) = entry(limit) else {
        return PrimeTable::new(limit);
    };
    if let Some(primes) = fs::read(&path).ok().and_then(|b| decode(&b)) {
        let sane = primes.first() == Some(&2)
            && primes.last().is_some_and(|&p| p <= limit)
            && primes.windows(2).all(|w| w[0] < w[1]);
        if sane {
            return PrimeTable::from_primes(primes, limit);
        }
    }
    let fresh = PrimeTable::new(limit);
    let bytes: Vec<u8> = fresh.primes().iter().flat_map(|p| p.to_le_bytes()).collect();
    if let Some(dir) = path.parent() {
        let _ = fs::create_dir_all(dir);
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    if fs::write(&tmp, bytes).is_ok() {
        let _ = fs::rename(&tmp, &path);
    }
    fresh
}
