//! Counting prime and rough values of linear systems over boxes, and the
//! matching asymptotic predictions.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::admissible::AdmissibleProfile;
use crate::buchstab::{e_gamma, BuchstabTable};
use crate::error::{Error, Result};
use crate::local_densities::SingularSeries;
use crate::sieve::{BitSet, PrimeTable, SieveMode};
use crate::{LinearForm, LinearSystem};

/// Lattice points of the innermost coordinate handled per work item.
const LINE_CHUNK: u64 = 1 << 16;

/// `prod_j [corner_j, corner_j + sides_j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LatticeBox {
    corner: Vec<i64>,
    sides: Vec<u64>,
}

impl LatticeBox {
    pub fn new(corner: Vec<i64>, sides: Vec<u64>) -> Result<Self> {
        if corner.is_empty() || corner.len() != sides.len() {
            return Err(Error::InvalidArgument(format!(
                "box needs matching corner and side lists, got {} and {}",
                corner.len(),
                sides.len()
            )));
        }
        if let Some(j) = sides.iter().position(|&h| h == 0) {
            return Err(Error::InvalidArgument(format!("side {} of the box is empty", j + 1)));
        }
        sides
            .iter()
            .try_fold(1u64, |acc, &h| acc.checked_mul(h))
            .ok_or_else(|| Error::Overflow("box volume exceeds 64 bits".into()))?;
        for (&x, &h) in corner.iter().zip(&sides) {
            if (x as i128 + h as i128 - 1) > i64::MAX as i128 {
                return Err(Error::Overflow(format!("box side [{x}, {x} + {h}) leaves the 64-bit range")));
            }
        }
        Ok(LatticeBox { corner, sides })
    }

    /// The cube `[corner, corner + side)^d`.
    pub fn cube(corner: i64, side: u64, d: usize) -> Result<Self> {
        LatticeBox::new(vec![corner; d], vec![side; d])
    }

    pub fn corner(&self) -> &[i64] {
        &self.corner
    }

    pub fn sides(&self) -> &[u64] {
        &self.sides
    }

    pub fn dimension(&self) -> usize {
        self.corner.len()
    }

    pub fn volume(&self) -> u64 {
        self.sides.iter().product()
    }

    /// Exclusive upper end of coordinate `j`.
    pub fn end(&self, j: usize) -> i64 {
        self.corner[j] + self.sides[j] as i64
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        other.dimension() == self.dimension()
            && (0..self.dimension()).all(|j| other.corner[j] >= self.corner[j] && other.end(j) <= self.end(j))
    }

    pub fn translate(&self, shift: &[i64]) -> Result<Self> {
        let corner = self
            .corner
            .iter()
            .zip(shift)
            .map(|(&x, &s)| x.checked_add(s).ok_or_else(|| Error::Overflow("box translation".into())))
            .collect::<Result<Vec<_>>>()?;
        LatticeBox::new(corner, self.sides.clone())
    }

    /// Intersection with another box, if nonempty.
    pub fn intersect(&self, other: &LatticeBox) -> Option<LatticeBox> {
        let mut corner = Vec::with_capacity(self.dimension());
        let mut sides = Vec::with_capacity(self.dimension());
        for j in 0..self.dimension() {
            let lo = self.corner[j].max(other.corner[j]);
            let hi = self.end(j).min(other.end(j));
            if hi <= lo {
                return None;
            }
            corner.push(lo);
            sides.push((hi - lo) as u64);
        }
        Some(LatticeBox { corner, sides })
    }

    /// Aligned sub-boxes of side `side` starting at the corner; the last
    /// one along each axis is cut short when `side` does not divide it.
    pub fn partition(&self, side: u64) -> Vec<LatticeBox> {
        let side = side.max(1);
        let mut out = vec![LatticeBox { corner: vec![], sides: vec![] }];
        for j in 0..self.dimension() {
            let pieces: Vec<(i64, u64)> = (0..self.sides[j].div_ceil(side))
                .map(|k| {
                    let start = k * side;
                    (self.corner[j] + start as i64, side.min(self.sides[j] - start))
                })
                .collect();
            out = out
                .into_iter()
                .flat_map(|b| {
                    pieces.iter().map(move |&(c, h)| {
                        let mut nb = b.clone();
                        nb.corner.push(c);
                        nb.sides.push(h);
                        nb
                    })
                })
                .collect();
        }
        out
    }
}

impl fmt::Display for LatticeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, (x, h)) in self.corner.iter().zip(&self.sides).enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}:{h}")?;
        }
        Ok(())
    }
}

/// Parses `"x1:H1,x2:H2,..."`.
impl FromStr for LatticeBox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut corner = Vec::new();
        let mut sides = Vec::new();
        for part in s.split(',') {
            let (x, h) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("box component {part:?} is not of the form x:H")))?;
            corner.push(
                x.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::InvalidArgument(format!("box corner {x:?}: {e}")))?,
            );
            sides.push(
                h.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::InvalidArgument(format!("box side {h:?}: {e}")))?,
            );
        }
        LatticeBox::new(corner, sides)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternCount {
    #[serde(rename = "box")]
    pub region: String,
    pub kind: SieveMode,
    pub observed: u64,
    pub predicted: f64,
    pub ratio: f64,
}

impl PatternCount {
    pub fn new(region: &LatticeBox, kind: SieveMode, observed: u64, predicted: f64) -> Self {
        PatternCount { region: region.to_string(), kind, observed, predicted, ratio: observed as f64 / predicted }
    }
}

/// Indicator bits of one form over its value range, split into residue
/// classes modulo the innermost coefficient so that a line of the box reads
/// consecutive bits.
#[derive(Debug, Clone)]
struct FormBits {
    coefficients: Vec<i64>,
    constant: i64,
    lo: i64,
    stride: u64,
    classes: Vec<BitSet>,
}

impl FormBits {
    fn value(&self, point: &[i64]) -> i64 {
        let v = self
            .coefficients
            .iter()
            .zip(point)
            .fold(self.constant as i128, |acc, (&a, &x)| acc + a as i128 * x as i128);
        v as i64
    }

    fn locate(&self, value: i64) -> (usize, u64) {
        let offset = (value - self.lo) as u64;
        ((offset % self.stride) as usize, offset / self.stride)
    }

    fn get(&self, value: i64) -> bool {
        let (class, idx) = self.locate(value);
        self.classes[class].get(idx)
    }
}

/// Sieves for every form of a system over a fixed region; counts any box
/// inside that region.
#[derive(Debug, Clone)]
pub struct PatternCounter {
    region: LatticeBox,
    mode: SieveMode,
    forms: Vec<FormBits>,
}

fn magnitude_bound(lo: i128, hi: i128) -> u64 {
    lo.unsigned_abs().max(hi.unsigned_abs()) as u64
}

impl PatternCounter {
    pub fn new(system: &LinearSystem, region: &LatticeBox, mode: SieveMode) -> Result<Self> {
        Self::build(system, region, mode, None)
    }

    /// As [`PatternCounter::new`], sieving with a caller-supplied prime table.
    pub fn with_table(system: &LinearSystem, region: &LatticeBox, mode: SieveMode, table: &PrimeTable) -> Result<Self> {
        Self::build(system, region, mode, Some(table))
    }

    fn build(system: &LinearSystem, region: &LatticeBox, mode: SieveMode, table: Option<&PrimeTable>) -> Result<Self> {
        let d = system.dimension();
        if region.dimension() != d {
            return Err(Error::InvalidArgument(format!(
                "box has dimension {}, system has dimension {d}",
                region.dimension()
            )));
        }
        // The indicators depend on |n| only, so flip forms to make the
        // innermost coefficient nonnegative.
        let forms: Vec<LinearForm> = system
            .forms()
            .iter()
            .map(|f| {
                if f.coefficients()[d - 1] < 0 {
                    let neg: Vec<i64> = f.coefficients().iter().map(|&a| -a).collect();
                    LinearForm::new(neg, -f.constant())
                } else {
                    Ok(f.clone())
                }
            })
            .collect::<Result<_>>()?;
        let ranges: Vec<(i128, i128)> =
            forms.iter().map(|f| f.value_range(region.corner(), region.sides())).collect();
        for &(lo, hi) in &ranges {
            if lo <= i64::MIN as i128 || hi >= i64::MAX as i128 {
                return Err(Error::Overflow(format!("form values [{lo}, {hi}] exceed the 63-bit range")));
            }
            let width = (hi - lo + 1) as u128;
            if width > crate::sieve::MAX_RANGE_WIDTH as u128 {
                return Err(Error::RangeTooWide { width, max: crate::sieve::MAX_RANGE_WIDTH });
            }
        }
        let owned;
        let table = match table {
            Some(t) => t,
            None => {
                let max_mag = ranges.iter().map(|&(lo, hi)| magnitude_bound(lo, hi)).max().unwrap_or(2);
                let z = match mode {
                    SieveMode::Prime => 2,
                    SieveMode::Rough(z) => z,
                };
                owned = PrimeTable::covering(max_mag, z);
                &owned
            }
        };
        let form_bits = forms
            .iter()
            .zip(&ranges)
            .map(|(f, &(lo, hi))| {
                let sieve = table.sieve_range(lo as i64, hi as i64 + 1, mode)?;
                let stride = f.coefficients()[d - 1].unsigned_abs().max(1);
                let classes = (0..stride).map(|r| sieve.bits().decimate(r, stride)).collect();
                Ok(FormBits {
                    coefficients: f.coefficients().to_vec(),
                    constant: f.constant(),
                    lo: lo as i64,
                    stride,
                    classes,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PatternCounter { region: region.clone(), mode, forms: form_bits })
    }

    pub fn region(&self) -> &LatticeBox {
        &self.region
    }

    pub fn mode(&self) -> SieveMode {
        self.mode
    }

    fn check_inside(&self, target: &LatticeBox) -> Result<()> {
        if self.region.contains_box(target) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("box {target} is not inside the sieved region {}", self.region)))
        }
    }

    /// Whether every form takes an indicated value at `point`.
    pub fn hit(&self, point: &[i64]) -> bool {
        self.forms.iter().all(|f| f.get(f.value(point)))
    }

    /// Number of points of `target` (which must lie in the region) where
    /// every form is prime or rough.
    pub fn count(&self, target: &LatticeBox) -> Result<u64> {
        self.check_inside(target)?;
        let d = target.dimension();
        let inner = target.sides()[d - 1];
        let chunks = inner.div_ceil(LINE_CHUNK);
        let outer: u64 = target.sides()[..d - 1].iter().product();
        let items = outer * chunks;
        let total = (0..items)
            .into_par_iter()
            .map_init(
                || (vec![0i64; d], vec![0u64; LINE_CHUNK.div_ceil(64) as usize], vec![0u64; LINE_CHUNK.div_ceil(64) as usize]),
                |(point, acc, buf), item| {
                    let chunk = item % chunks;
                    let mut rest = item / chunks;
                    for j in (0..d - 1).rev() {
                        let h = target.sides()[j];
                        point[j] = target.corner()[j] + (rest % h) as i64;
                        rest /= h;
                    }
                    let start = chunk * LINE_CHUNK;
                    let len = LINE_CHUNK.min(inner - start);
                    point[d - 1] = target.corner()[d - 1] + start as i64;
                    self.line_count(point, len, acc, buf)
                },
            )
            .sum();
        Ok(total)
    }

    fn line_count(&self, start: &[i64], len: u64, acc: &mut [u64], buf: &mut [u64]) -> u64 {
        let nwords = len.div_ceil(64) as usize;
        let acc = &mut acc[..nwords];
        acc.fill(u64::MAX);
        let tail = (len & 63) as u32;
        if tail > 0 {
            acc[nwords - 1] = (1u64 << tail) - 1;
        }
        let d = start.len();
        for f in &self.forms {
            let v0 = f.value(start);
            if f.coefficients[d - 1] == 0 {
                if !f.get(v0) {
                    return 0;
                }
                continue;
            }
            let (class, idx) = f.locate(v0);
            f.classes[class].extract(idx, len, buf);
            for (a, &b) in acc.iter_mut().zip(buf.iter()) {
                *a &= b;
            }
        }
        acc.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Points `n` of `target` with `n = a (mod q)` coordinatewise where
    /// every form is prime or rough.
    pub fn count_progression(&self, target: &LatticeBox, residue: &[i64], q: u64) -> Result<u64> {
        self.check_inside(target)?;
        let d = target.dimension();
        if residue.len() != d || q == 0 {
            return Err(Error::InvalidArgument("progression needs d residues and a positive modulus".into()));
        }
        // First lattice point and number of points per axis.
        let mut first = Vec::with_capacity(d);
        let mut counts = Vec::with_capacity(d);
        for j in 0..d {
            let lo = target.corner()[j] as i128;
            let shift = (residue[j] as i128 - lo).rem_euclid(q as i128);
            let s = lo + shift;
            let end = target.end(j) as i128;
            let n = if s >= end { 0 } else { ((end - 1 - s) / q as i128 + 1) as u64 };
            first.push(s as i64);
            counts.push(n);
        }
        if counts.contains(&0) {
            return Ok(0);
        }
        let outer: u64 = counts[..d - 1].iter().product();
        let inner = counts[d - 1];
        let step = q as i64;
        let total = (0..outer)
            .into_par_iter()
            .map(|item| {
                let mut point = first.clone();
                let mut rest = item;
                for j in (0..d - 1).rev() {
                    point[j] = first[j] + (rest % counts[j]) as i64 * step;
                    rest /= counts[j];
                }
                let mut hits = 0u64;
                for k in 0..inner {
                    point[d - 1] = first[d - 1] + k as i64 * step;
                    if self.hit(&point) {
                        hits += 1;
                    }
                }
                hits
            })
            .sum();
        Ok(total)
    }
}

pub fn count_patterns(system: &LinearSystem, target: &LatticeBox, mode: SieveMode) -> Result<u64> {
    PatternCounter::new(system, target, mode)?.count(target)
}

/// Points of the box where every `|psi_i(x)|` is prime.
pub fn count_prime_patterns(system: &LinearSystem, target: &LatticeBox) -> Result<u64> {
    count_patterns(system, target, SieveMode::Prime)
}

/// Points of the box where every `psi_i(x)` is coprime to P(z).
pub fn count_rough_patterns(system: &LinearSystem, target: &LatticeBox, z: u64) -> Result<u64> {
    count_patterns(system, target, SieveMode::Rough(z))
}

/// Smallest `|psi_i(x)|` over the box and all forms.
pub fn default_scale(system: &LinearSystem, target: &LatticeBox) -> u64 {
    system
        .forms()
        .iter()
        .map(|f| {
            let (lo, hi) = f.value_range(target.corner(), target.sides());
            if lo <= 0 && hi >= 0 {
                0
            } else {
                lo.unsigned_abs().min(hi.unsigned_abs()) as u64
            }
        })
        .min()
        .unwrap_or(0)
}

/// Largest `|psi_i(x)|` over the box and all forms, saturating at `u64::MAX`.
pub fn max_magnitude(system: &LinearSystem, target: &LatticeBox) -> u64 {
    system
        .forms()
        .iter()
        .map(|f| {
            let (lo, hi) = f.value_range(target.corner(), target.sides());
            u64::try_from(lo.unsigned_abs().max(hi.unsigned_abs())).unwrap_or(u64::MAX)
        })
        .max()
        .unwrap_or(0)
}

/// `vol / (log X)^t * prod beta_p`.
pub fn predicted_prime_count(system: &LinearSystem, target: &LatticeBox, x_scale: f64, series: &SingularSeries) -> Result<f64> {
    if !(x_scale >= 3.0) {
        return Err(Error::InvalidArgument(format!("scale {x_scale} must be at least 3")));
    }
    let t = system.size() as i32;
    Ok(target.volume() as f64 / x_scale.ln().powi(t) * series.truncated_value)
}

/// The Buchstab exponent `log N / log z`, with N the smallest corner
/// coordinate in absolute value.
pub fn rough_exponent(target: &LatticeBox, z: u64) -> f64 {
    let n = target.corner().iter().map(|x| x.unsigned_abs()).min().unwrap_or(0);
    (n as f64).ln() / (z as f64).ln()
}

/// `vol * prod_{p <= z} (count_p / p^d) * (e^gamma omega(u))^t`.
pub fn predicted_rough_count(system: &LinearSystem, target: &LatticeBox, z: u64, table: &BuchstabTable) -> Result<f64> {
    let u = rough_exponent(target, z);
    if !(u >= 1.0 && u <= table.u_max()) {
        return Err(Error::UOutOfTable { u, u_max: table.u_max() });
    }
    let profile = AdmissibleProfile::build(system, z)?;
    Ok(target.volume() as f64 * admissible_density(&profile) * (e_gamma() * table.omega(u)?).powi(system.size() as i32))
}

/// `#A / Q^d` as a float, multiplied prime by prime.
pub fn admissible_density(profile: &AdmissibleProfile) -> f64 {
    use num_traits::ToPrimitive;
    let d = profile.system().dimension() as i32;
    profile
        .per_prime()
        .map(|(p, c)| c.to_f64().unwrap_or(f64::INFINITY) / (p as f64).powi(d))
        .product()
}

/// Ordered pairs `(p1, p2)` with `p1` in `[x, x + h]`, `p2` in `[y, y + h]`
/// and `n - p1 - p2` a prime.
pub fn goldbach_pairs(n: u64, x: u64, y: u64, h: u64) -> Result<u64> {
    if n % 2 == 0 {
        return Err(Error::EvenN(n));
    }
    if n > i64::MAX as u64 / 2 || x.saturating_add(h) > n || y.saturating_add(h) > n || x.saturating_add(y) > n {
        return Err(Error::RangeError(format!(
            "windows [{x}, {x}+{h}] and [{y}, {y}+{h}] must lie in [0, {n}] with x + y <= {n}"
        )));
    }
    let first = crate::sieve::sieve_range(x as i64, (x + h + 1) as i64, SieveMode::Prime)?;
    let second = crate::sieve::sieve_range(y as i64, (y + h + 1) as i64, SieveMode::Prime)?;
    // third[j] says whether c - j is a prime, c = n - x - y.
    let c = (n - x - y) as i64;
    let lo = (c - 2 * h as i64).max(0);
    let third_sieve = crate::sieve::sieve_range(lo, c + 1, SieveMode::Prime)?;
    let mut third = BitSet::zeros(2 * h + 1);
    for j in 0..=2 * h {
        let v = c - j as i64;
        if v >= lo && v >= 2 && third_sieve.get(v) {
            third.set(j, true);
        }
    }
    let len = h + 1;
    let nwords = len.div_ceil(64) as usize;
    let mut second_words = vec![0u64; nwords];
    second.bits().extract(0, len, &mut second_words);
    let total = first
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&p1| {
            let mut buf = vec![0u64; nwords];
            third.extract((p1 - x as i64) as u64, len, &mut buf);
            buf.iter().zip(&second_words).map(|(a, b)| (a & b).count_ones() as u64).sum::<u64>()
        })
        .sum();
    Ok(total)
}

/// `S(N) H^2 / (log X)^3`.
pub fn goldbach_prediction(series: &SingularSeries, h: u64, x_scale: f64) -> f64 {
    series.truncated_value * (h as f64).powi(2) / x_scale.ln().powi(3)
}
