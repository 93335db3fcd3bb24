//! The matrix experiment: double counting prime patterns over progressions
//! modulo a primorial Q, to exhibit rows (short boxes) that are denser or
//! sparser than the progression average.
//!
//! The sum is over pairs `(a, n)` with `a` in `[U, 2U)^d`, `n` in the region
//! `[X, X_end)^d` and `n = a (mod Q)`. Grouped by `a` it gives the columns;
//! grouped by `r = (n - a) / Q` it gives the rows `R_r = Q r + [U, 2U)^d`,
//! clipped to the region. Both groupings count the same pairs, so the two
//! totals agree exactly. Rows that stick out of the region are kept for the
//! total but only rows lying fully inside get a density ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buchstab::{e_gamma, BuchstabTable};
use crate::error::{Error, Result};
use crate::local_densities::truncated_product;
use crate::patterns::{LatticeBox, PatternCounter};
use crate::sieve::{is_prime, primes_up_to, SieveMode};
use crate::LinearSystem;

/// Largest cutoff for which P(z) fits in 128 bits.
pub const MAX_CUTOFF: u64 = 89;
/// Columns `a` in `[U, 2U)^d` allowed in an exhaustive run.
pub const MAX_EXHAUSTIVE_COLUMNS: u64 = 1_000_000;
/// Lattice points visited by the column view of an exhaustive run.
pub const EXHAUSTIVE_POINT_BUDGET: u64 = 200_000_000;
/// Rows allowed in an exhaustive run.
pub const MAX_EXHAUSTIVE_ROWS: u64 = 10_000_000;
/// Lattice points visited by sampled columns.
pub const COLUMN_SAMPLE_POINT_BUDGET: u64 = 500_000_000;

const BUCHSTAB_STEP: f64 = 1e-4;

fn default_row_samples() -> u64 {
    2000
}

fn default_series_cutoff() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaierConfig {
    pub system: LinearSystem,
    pub z: u64,
    /// Exponent with `U = z^u`. Give this or `big_u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_u: Option<u64>,
    pub x: i64,
    /// End of the region, `2x` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_end: Option<i64>,
    pub lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_row_samples")]
    pub row_samples: u64,
    #[serde(default)]
    pub column_samples: u64,
    #[serde(default = "default_series_cutoff")]
    pub series_cutoff: u64,
    /// Use the product of these primes as Q instead of P(z).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime_subset: Option<Vec<u64>>,
}

impl MaierConfig {
    pub fn new(system: LinearSystem, z: u64, big_u: u64, x: i64, lambda: f64) -> Self {
        MaierConfig {
            system,
            z,
            u: None,
            big_u: Some(big_u),
            x,
            x_end: None,
            lambda,
            seed: 0,
            row_samples: default_row_samples(),
            column_samples: 0,
            series_cutoff: default_series_cutoff(),
            prime_subset: None,
        }
    }
}

fn infeasible(msg: impl Into<String>) -> Error {
    Error::ConfigInfeasible(msg.into())
}

/// Validated quantities derived from a config.
#[derive(Debug, Clone)]
struct Plan {
    primes: Vec<u64>,
    q: u64,
    big_u: u64,
    u: f64,
    x: i64,
    x_end: i64,
    d: usize,
    t: usize,
    region: LatticeBox,
    /// Rows per axis that meet the region, `r_lo..=r_hi`.
    r_lo: i64,
    r_hi: i64,
    /// Rows per axis lying fully inside.
    full_lo: i64,
    full_hi: i64,
}

impl Plan {
    fn new(config: &MaierConfig) -> Result<Plan> {
        let z = config.z;
        if z < 2 {
            return Err(infeasible(format!("z = {z} must be at least 2")));
        }
        if z > MAX_CUTOFF {
            return Err(infeasible(format!("z = {z} exceeds {MAX_CUTOFF}; P(z) no longer fits in 128 bits")));
        }
        let primes = match &config.prime_subset {
            Some(list) => {
                let mut list = list.clone();
                list.sort_unstable();
                list.dedup();
                if list.is_empty() || list.iter().any(|&p| !is_prime(p) || p > z) {
                    return Err(infeasible("prime_subset must be a nonempty list of primes <= z"));
                }
                list
            }
            None => primes_up_to(z),
        };
        let q = primes
            .iter()
            .try_fold(1u64, |acc, &p| acc.checked_mul(p))
            .filter(|&q| q <= i64::MAX as u64)
            .ok_or_else(|| infeasible("Q exceeds the 63-bit coordinate range"))?;

        let (big_u, u) = match (config.u, config.big_u) {
            (Some(_), Some(_)) => return Err(infeasible("give exactly one of u and big_u")),
            (None, None) => return Err(infeasible("one of u and big_u is required")),
            (Some(u), None) => {
                let v = (z as f64).powf(u).round();
                if !(u > 0.0) || !(v >= 1.0 && v < 2f64.powi(62)) {
                    return Err(infeasible(format!("U = z^u = {z}^{u} does not fit in 62 bits")));
                }
                (v as u64, u)
            }
            (None, Some(big_u)) => {
                if big_u < 1 || big_u > 1 << 62 {
                    return Err(infeasible(format!("U = {big_u} must lie in [1, 2^62]")));
                }
                (big_u, (big_u as f64).ln() / (z as f64).ln())
            }
        };

        let x = config.x;
        let x_end = match config.x_end {
            Some(e) => e,
            None => x.checked_mul(2).ok_or_else(|| infeasible("2X overflows"))?,
        };
        if x < 1 || x_end <= x {
            return Err(infeasible(format!("region [{x}, {x_end}) is empty or not positive")));
        }
        if x % q as i64 != 0 {
            return Err(infeasible(format!("Q = {q} does not divide X = {x}")));
        }
        let q3 = (q as i128).pow(3);
        if (x as i128) < q3 {
            return Err(infeasible(format!("X = {x} is below Q^3 = {q3}")));
        }
        if big_u as i128 > x as i128 {
            return Err(infeasible(format!("U = {big_u} exceeds X = {x}")));
        }
        if !(config.lambda > 0.0) {
            return Err(infeasible(format!("lambda = {} must be positive", config.lambda)));
        }

        let d = config.system.dimension();
        let t = config.system.size();
        let region = LatticeBox::cube(x, (x_end - x) as u64, d)?;
        let qi = q as i64;
        let bu = big_u as i64;
        // Q r + 2U > x and Q r + U < x_end.
        let r_lo = (x - 2 * bu).div_euclid(qi) + 1;
        let r_hi = (x_end - bu - 1).div_euclid(qi);
        // Q r + U >= x and Q r + 2U <= x_end.
        let full_lo = -((bu - x).div_euclid(qi));
        let full_hi = (x_end - 2 * bu).div_euclid(qi);
        Ok(Plan { primes, q, big_u, u, x, x_end, d, t, region, r_lo, r_hi, full_lo, full_hi })
    }

    fn rows_per_axis(&self) -> u64 {
        (self.r_hi - self.r_lo + 1).max(0) as u64
    }

    fn full_rows_per_axis(&self) -> u64 {
        (self.full_hi - self.full_lo + 1).max(0) as u64
    }

    fn row_box(&self, r: &[i64]) -> LatticeBox {
        let corner = r.iter().map(|&rj| rj * self.q as i64 + self.big_u as i64).collect();
        LatticeBox::new(corner, vec![self.big_u; self.d]).expect("row box is valid")
    }

    fn is_full(&self, r: &[i64]) -> bool {
        r.iter().all(|&rj| rj >= self.full_lo && rj <= self.full_hi)
    }

    fn columns_box(&self) -> LatticeBox {
        LatticeBox::cube(self.big_u as i64, self.big_u, self.d).expect("column box is valid")
    }

    /// Points of the region congruent to one column, per axis.
    fn points_per_column(&self) -> u64 {
        (self.x_end - self.x) as u64 / self.q + 1
    }

    fn admissible(&self, system: &LinearSystem, a: &[i64]) -> bool {
        let values = system.evaluate(a).expect("column values fit");
        values.iter().all(|&v| self.primes.iter().all(|&p| v.rem_euclid(p as i64) != 0))
    }
}

fn unrank(mut index: u64, lo: &[i64], extent: &[u64]) -> Vec<i64> {
    let mut out = vec![0i64; lo.len()];
    for j in (0..lo.len()).rev() {
        out[j] = lo[j] + (index % extent[j]) as i64;
        index /= extent[j];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowBox {
    pub r: Vec<i64>,
    /// `R_r` clipped to the region.
    pub region: String,
    pub count: u64,
    pub full: bool,
    /// `count / predicted_row`, full rows only.
    pub ratio: Option<f64>,
    /// `count / plain_predicted_row`, full rows only.
    pub plain_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSum {
    pub a: Vec<i64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSample {
    pub samples: u64,
    pub mean: f64,
    pub estimate: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalRow {
    pub r: Vec<i64>,
    pub count: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremal {
    pub plus: ExtremalRow,
    pub minus: ExtremalRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaierResult {
    pub mode: RunMode,
    pub modulus: u64,
    pub primes: Vec<u64>,
    pub big_u: u64,
    pub u: f64,
    pub x: i64,
    pub x_end: i64,
    pub rows_per_axis: u64,
    pub full_rows_per_axis: u64,
    /// Admissible `a` in `[U, 2U)^d`.
    pub admissible_columns: u64,
    /// Exact total, exhaustive runs only.
    pub sigma: Option<u64>,
    pub row_total: Option<u64>,
    pub column_total: Option<u64>,
    /// Contribution of non-admissible columns (nonzero only when some form
    /// can take a prime value dividing Q).
    pub inadmissible_total: Option<u64>,
    pub identity_holds: Option<bool>,
    pub column_sample: Option<ColumnSample>,
    pub series: f64,
    pub buchstab_factor: f64,
    pub plain_predicted_row: f64,
    pub predicted_row: f64,
    pub column_estimate: f64,
    pub mean_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub extremal: Option<Extremal>,
    pub u_plus: Option<f64>,
    pub u_minus: Option<f64>,
    /// `101 lambda`, the exponent that makes `z^u >= (log X)^lambda` in the
    /// asymptotic argument.
    pub u_from_lambda: f64,
    #[serde(skip)]
    pub rows: Vec<RowBox>,
    #[serde(skip)]
    pub columns: Vec<ColumnSum>,
}

struct Predictions {
    series: f64,
    buchstab: f64,
    plain_row: f64,
    row: f64,
    column: f64,
}

fn predictions(config: &MaierConfig, plan: &Plan) -> Result<Predictions> {
    let table = BuchstabTable::build(BUCHSTAB_STEP, (plan.u + 3.0).max(10.0))?;
    if !(plan.u >= 1.0) {
        return Err(Error::UOutOfTable { u: plan.u, u_max: table.u_max() });
    }
    let buchstab = e_gamma() * table.omega(plan.u)?;
    let series = truncated_product(&config.system, config.series_cutoff)?.truncated_value;
    let d = plan.d as i32;
    let t = plan.t as i32;
    let log_x = (plan.x as f64).ln();
    let plain_row = (plan.big_u as f64).powi(d) / log_x.powi(t) * series;
    let row = buchstab.powi(t) * plain_row;
    let per_axis = (plan.x_end - plan.x) as f64 / plan.q as f64;
    Ok(Predictions { series, buchstab, plain_row, row, column: row * per_axis.powi(d) })
}

/// `U^d (X_end - X)^d / Q^d / (log X)^t (e^gamma omega(u))^t prod beta_p`.
pub fn column_estimate(config: &MaierConfig) -> Result<f64> {
    let plan = Plan::new(config)?;
    Ok(predictions(config, &plan)?.column)
}

fn build_counter(config: &MaierConfig, region: &LatticeBox) -> Result<PatternCounter> {
    PatternCounter::new(&config.system, region, SieveMode::Prime).map_err(|e| match e {
        Error::RangeTooWide { width, max } => {
            infeasible(format!("a form sweeps {width} values over the region, sieve limit is {max}"))
        }
        Error::Overflow(msg) => infeasible(msg),
        other => other,
    })
}

pub fn run_experiment(config: &MaierConfig) -> Result<MaierResult> {
    let plan = Plan::new(config)?;
    let pred = predictions(config, &plan)?;
    let counter = build_counter(config, &plan.region)?;
    let d = plan.d;

    let columns_box = plan.columns_box();
    let total_columns = columns_box.volume();
    let admissible: Vec<Vec<i64>> = if total_columns <= MAX_EXHAUSTIVE_COLUMNS * 16 {
        (0..total_columns)
            .into_par_iter()
            .map(|i| unrank(i, columns_box.corner(), columns_box.sides()))
            .filter(|a| plan.admissible(&config.system, a))
            .collect()
    } else {
        return Err(infeasible(format!("{total_columns} columns in [U, 2U)^d is too many to classify")));
    };
    let admissible_columns = admissible.len() as u64;

    let rows_total = plan.rows_per_axis().checked_pow(d as u32).unwrap_or(u64::MAX);
    let column_points = plan.points_per_column().checked_pow(d as u32).unwrap_or(u64::MAX);
    let exhaustive = total_columns <= MAX_EXHAUSTIVE_COLUMNS
        && rows_total <= MAX_EXHAUSTIVE_ROWS
        && total_columns.saturating_mul(column_points) <= EXHAUSTIVE_POINT_BUDGET;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut result = MaierResult {
        mode: if exhaustive { RunMode::Exhaustive } else { RunMode::Sampled },
        modulus: plan.q,
        primes: plan.primes.clone(),
        big_u: plan.big_u,
        u: plan.u,
        x: plan.x,
        x_end: plan.x_end,
        rows_per_axis: plan.rows_per_axis(),
        full_rows_per_axis: plan.full_rows_per_axis(),
        admissible_columns,
        sigma: None,
        row_total: None,
        column_total: None,
        inadmissible_total: None,
        identity_holds: None,
        column_sample: None,
        series: pred.series,
        buchstab_factor: pred.buchstab,
        plain_predicted_row: pred.plain_row,
        predicted_row: pred.row,
        column_estimate: pred.column,
        mean_ratio: None,
        min_ratio: None,
        max_ratio: None,
        extremal: None,
        u_plus: None,
        u_minus: None,
        u_from_lambda: 101.0 * config.lambda,
        rows: Vec::new(),
        columns: Vec::new(),
    };

    let row_index: Vec<Vec<i64>> = if exhaustive {
        let lo = vec![plan.r_lo; d];
        let extent = vec![plan.rows_per_axis(); d];
        (0..rows_total).map(|i| unrank(i, &lo, &extent)).collect()
    } else {
        if plan.full_rows_per_axis() == 0 {
            return Err(infeasible("no row box fits inside the region"));
        }
        (0..config.row_samples)
            .map(|_| (0..d).map(|_| rng.gen_range(plan.full_lo..=plan.full_hi)).collect())
            .collect()
    };
    let rows: Vec<RowBox> = row_index
        .into_par_iter()
        .map(|r| {
            let full = plan.is_full(&r);
            let clipped = plan.row_box(&r).intersect(&plan.region).expect("row meets the region");
            let count = counter.count(&clipped)?;
            let (ratio, plain_ratio) = if full && pred.row > 0.0 {
                (Some(count as f64 / pred.row), Some(count as f64 / pred.plain_row))
            } else {
                (None, None)
            };
            Ok(RowBox { r, region: clipped.to_string(), count, full, ratio, plain_ratio })
        })
        .collect::<Result<_>>()?;

    if exhaustive {
        let all_columns: Vec<(Vec<i64>, u64)> = (0..total_columns)
            .into_par_iter()
            .map(|i| {
                let a = unrank(i, columns_box.corner(), columns_box.sides());
                let count = counter.count_progression(&plan.region, &a, plan.q)?;
                Ok((a, count))
            })
            .collect::<Result<_>>()?;
        let column_total: u64 = all_columns.iter().map(|c| c.1).sum();
        let row_total: u64 = rows.iter().map(|r| r.count).sum();
        let mut inadmissible = 0;
        for (a, count) in all_columns {
            if plan.admissible(&config.system, &a) {
                result.columns.push(ColumnSum { a, count });
            } else {
                inadmissible += count;
            }
        }
        result.sigma = Some(row_total);
        result.row_total = Some(row_total);
        result.column_total = Some(column_total);
        result.inadmissible_total = Some(inadmissible);
        result.identity_holds = Some(row_total == column_total);
    }

    if config.column_samples > 0 && admissible_columns > 0 {
        let needed = column_points.saturating_mul(config.column_samples);
        if needed > COLUMN_SAMPLE_POINT_BUDGET {
            return Err(infeasible(format!(
                "{} sampled columns visit {needed} points, budget is {COLUMN_SAMPLE_POINT_BUDGET}",
                config.column_samples
            )));
        }
        let picks: Vec<usize> =
            (0..config.column_samples).map(|_| rng.gen_range(0..admissible.len())).collect();
        let counts: Vec<u64> = picks
            .par_iter()
            .map(|&i| counter.count_progression(&plan.region, &admissible[i], plan.q))
            .collect::<Result<_>>()?;
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<u64>() as f64 / n;
        let var = if counts.len() > 1 {
            counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let scale = admissible_columns as f64;
        result.column_sample = Some(ColumnSample {
            samples: config.column_samples,
            mean,
            estimate: mean * scale,
            standard_error: scale * (var / n).sqrt(),
        });
    }

    // A zero prediction (some beta_p vanishes) leaves ratios undefined.
    let full: Vec<&RowBox> = rows.iter().filter(|r| r.ratio.is_some()).collect();
    if !full.is_empty() {
        let ratios: Vec<f64> = full.iter().map(|r| r.ratio.unwrap()).collect();
        result.mean_ratio = Some(ratios.iter().sum::<f64>() / ratios.len() as f64);
        // Largest and smallest counts, smallest r on ties.
        let pick = |better: fn(u64, u64) -> bool| {
            let mut best = full[0];
            for &row in &full[1..] {
                if better(row.count, best.count) || (row.count == best.count && row.r < best.r) {
                    best = row;
                }
            }
            ExtremalRow { r: best.r.clone(), count: best.count, ratio: best.ratio.unwrap() }
        };
        let plus = pick(|a, b| a > b);
        let minus = pick(|a, b| a < b);
        result.max_ratio = Some(plus.ratio);
        result.min_ratio = Some(minus.ratio);
        result.extremal = Some(Extremal { plus, minus });
    }
    result.rows = rows;

    let table = BuchstabTable::build(1e-3, plan.u.max(1.0) + 12.0)?;
    if let Ok((plus, minus)) = table.pick_u_pm(plan.u.max(1.0)) {
        result.u_plus = Some(plus);
        result.u_minus = Some(minus);
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortBox {
    /// Row the box was taken from.
    pub r: Vec<i64>,
    #[serde(rename = "box")]
    pub region: String,
    pub count: u64,
    /// `count / (vol (log X)^-t prod beta_p)`.
    pub ratio: f64,
    /// Sum of the counts over the whole partition of the row box.
    pub partition_total: u64,
    pub row_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortBoxes {
    pub side: u64,
    pub lambda: f64,
    pub plus: ShortBox,
    pub minus: ShortBox,
}

/// Splits the extremal rows into aligned cubes of side `ceil((log X)^lambda)`
/// and returns the densest cube of the densest row and the sparsest cube of
/// the sparsest row.
pub fn extremal_short_boxes(config: &MaierConfig, result: &MaierResult, lambda: f64) -> Result<ShortBoxes> {
    let plan = Plan::new(config)?;
    let side_f = (plan.x as f64).ln().powf(lambda).ceil();
    if !(lambda > 0.0) || side_f > plan.big_u as f64 {
        return Err(Error::LambdaTooLarge { side: side_f.min(u64::MAX as f64) as u64, big_u: plan.big_u });
    }
    let side = side_f as u64;
    let extremal = result
        .extremal
        .as_ref()
        .ok_or_else(|| infeasible("the run has no full row to refine"))?;
    let series = result.series;
    let log_x = (plan.x as f64).ln();
    let t = plan.t as i32;

    let scan = |row: &ExtremalRow, densest: bool| -> Result<ShortBox> {
        let row_box = plan.row_box(&row.r);
        let counter = build_counter(config, &row_box)?;
        let parts = row_box.partition(side);
        let counts: Vec<u64> = parts.iter().map(|b| counter.count(b)).collect::<Result<_>>()?;
        let ratios: Vec<f64> =
            parts.iter().zip(&counts).map(|(b, &c)| c as f64 / (b.volume() as f64 / log_x.powi(t) * series)).collect();
        let mut best = 0;
        for i in 1..parts.len() {
            let better = if densest { ratios[i] > ratios[best] } else { ratios[i] < ratios[best] };
            if better {
                best = i;
            }
        }
        Ok(ShortBox {
            r: row.r.clone(),
            region: parts[best].to_string(),
            count: counts[best],
            ratio: ratios[best],
            partition_total: counts.iter().sum(),
            row_count: row.count,
        })
    };
    Ok(ShortBoxes { side, lambda, plus: scan(&extremal.plus, true)?, minus: scan(&extremal.minus, false)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> LinearSystem {
        LinearSystem::from_rows(&[vec![1, 0]]).unwrap()
    }

    fn toy() -> MaierConfig {
        MaierConfig::new(line(), 3, 9, 60_000, 0.5)
    }

    #[test]
    fn toy_identity() {
        let res = run_experiment(&toy()).unwrap();
        assert_eq!(res.mode, RunMode::Exhaustive);
        assert_eq!(res.modulus, 6);
        assert_eq!(res.identity_holds, Some(true));
        assert_eq!(res.row_total, res.column_total);
        assert_eq!(res.inadmissible_total, Some(0));
        // Columns 11, 13, 17 in [9, 18).
        let a: Vec<i64> = res.columns.iter().map(|c| c.a[0]).collect();
        assert_eq!(a, vec![11, 13, 17]);
        let direct = (60_000u64..120_000).filter(|&n| n % 6 == 5 && is_prime(n)).count() as u64;
        assert_eq!(res.columns[0].count, direct);
        // Each prime of the region is counted once per matching column.
        let primes = crate::sieve::prime_count(60_000, 120_000).unwrap();
        let ones = (60_000u64..120_000).filter(|&n| n % 6 == 1 && is_prime(n)).count() as u64;
        assert_eq!(res.sigma, Some(2 * direct + ones));
        assert_eq!(primes, direct + ones);

        let min = res.min_ratio.unwrap();
        let max = res.max_ratio.unwrap();
        let mean = res.mean_ratio.unwrap();
        assert!(min <= mean && mean <= max);
    }

    #[test]
    fn short_boxes_partition_rows() {
        let cfg = toy();
        let res = run_experiment(&cfg).unwrap();
        let boxes = extremal_short_boxes(&cfg, &res, 0.5).unwrap();
        assert_eq!(boxes.side, 4);
        assert_eq!(boxes.plus.partition_total, boxes.plus.row_count);
        assert_eq!(boxes.minus.partition_total, boxes.minus.row_count);
        let ext = res.extremal.as_ref().unwrap();
        let plain = |row: &ExtremalRow| row.ratio * res.predicted_row / res.plain_predicted_row;
        assert!(boxes.plus.ratio >= plain(&ext.plus));
        assert!(boxes.minus.ratio <= plain(&ext.minus));
        if ext.minus.ratio < 1.0 {
            assert!(boxes.minus.ratio < 1.0);
        }
        assert!(matches!(extremal_short_boxes(&cfg, &res, 2.0), Err(Error::LambdaTooLarge { .. })));
    }

    #[test]
    fn infeasible_configs() {
        let mut cfg = toy();
        cfg.x = 60_001;
        assert!(matches!(run_experiment(&cfg), Err(Error::ConfigInfeasible(_))));
        cfg.x = 6 * 30;
        assert!(matches!(run_experiment(&cfg), Err(Error::ConfigInfeasible(_))));
        let mut cfg = toy();
        cfg.z = 97;
        assert!(matches!(run_experiment(&cfg), Err(Error::ConfigInfeasible(_))));
        let mut cfg = toy();
        cfg.u = Some(2.0);
        assert!(matches!(run_experiment(&cfg), Err(Error::ConfigInfeasible(_))));
    }

    #[test]
    fn monotone_coverage() {
        let x = 30 * 1000;
        let mut cfg = MaierConfig::new(line(), 5, 30, x, 0.5);
        cfg.x_end = Some(4 * x);
        let whole = run_experiment(&cfg).unwrap().sigma.unwrap();
        cfg.x_end = Some(2 * x);
        let first = run_experiment(&cfg).unwrap().sigma.unwrap();
        cfg.x = 2 * x;
        cfg.x_end = Some(4 * x);
        let second = run_experiment(&cfg).unwrap().sigma.unwrap();
        assert_eq!(whole, first + second);
    }

    #[test]
    fn column_sampling_is_consistent() {
        let mut cfg = MaierConfig::new(line(), 5, 125, 30 * 10_000, 0.5);
        cfg.column_samples = 400;
        cfg.seed = 5;
        let res = run_experiment(&cfg).unwrap();
        let sigma = res.sigma.unwrap() as f64;
        let sample = res.column_sample.unwrap();
        assert!((sample.estimate - sigma).abs() <= 3.0 * sample.standard_error, "{sample:?} vs {sigma}");
    }

    #[test]
    fn estimate_factors() {
        let ap3 = LinearSystem::arithmetic_progression(3).unwrap();
        let cfg = MaierConfig::new(ap3.clone(), 5, 125, 30 * 1000, 1.0);
        let est = column_estimate(&cfg).unwrap();
        let table = BuchstabTable::build(1e-4, 10.0).unwrap();
        let u = 125f64.ln() / 5f64.ln();
        let series = truncated_product(&ap3, 1000).unwrap().truncated_value;
        let by_hand =
            125f64.powi(2) * 30_000f64.powi(2) / 30f64.powi(2) / 30_000f64.ln().powi(3) * (e_gamma() * table.omega(u).unwrap()).powi(3) * series;
        assert!((est / by_hand - 1.0).abs() < 1e-12);

        // Closed form branch of omega for u in [1, 2].
        let cfg = MaierConfig::new(line(), 5, 10, 30 * 1000, 1.0);
        let u = 10f64.ln() / 5f64.ln();
        let est = column_estimate(&cfg).unwrap();
        let series = truncated_product(&line(), 1000).unwrap().truncated_value;
        let by_hand = 10.0 * 1000.0 / 30_000f64.ln() * e_gamma() / u * series;
        assert!((est / by_hand - 1.0).abs() < 1e-12);
    }
}
