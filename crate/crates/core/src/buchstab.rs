//! The Buchstab function omega(u) on a uniform grid.
//!
//! omega(u) = 1/u on [1, 2] and (u omega(u))' = omega(u - 1) beyond. The
//! table marches the integral form
//!
//! ```text
//! u omega(u) = 1 + int_2^u omega(s - 1) ds
//! ```
//!
//! with one Simpson panel per grid step. Because 1/h is an integer the
//! delayed endpoints land on the grid; the panel midpoint is read with
//! 4-point cubic interpolation, using a one-sided stencil next to the kink
//! of omega at u = 2.

use serde::Serialize;

use crate::error::{Error, Result};

/// Euler-Mascheroni constant, 30 digits.
pub const EULER_GAMMA_DIGITS: &str = "0.577215664901532860606512090082";
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

/// |e^gamma omega(u) - 1| below this is treated as numerically zero when
/// looking for sign changes.
pub const CROSSING_RESOLUTION: f64 = 1e-12;

const BISECTION_TOL: f64 = 1e-12;

pub fn e_gamma() -> f64 {
    EULER_GAMMA.exp()
}

#[derive(Debug, Clone)]
pub struct BuchstabTable {
    step: f64,
    u_max: f64,
    /// Grid index of u = 2, equal to 1/h.
    kink: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub u: f64,
    /// Sign of e^gamma omega - 1 just right of the crossing.
    pub sign_after: i8,
}

impl BuchstabTable {
    pub fn build(step: f64, u_max: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 1e-3) {
            return Err(Error::InvalidStep(step));
        }
        let per_unit = (1.0 / step).round();
        if (per_unit * step - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidStep(step));
        }
        if !(u_max >= 2.0) || !u_max.is_finite() {
            return Err(Error::OutOfRange { u: u_max, lo: 2.0, hi: f64::INFINITY });
        }
        let m = per_unit as usize;
        let h = 1.0 / per_unit;
        let n = ((u_max - 1.0) / h).ceil() as usize + 1;
        let n = n.max(m + 1);
        let grid = |k: usize| 1.0 + k as f64 * h;

        let mut values = Vec::with_capacity(n);
        for k in 0..=m {
            values.push(1.0 / grid(k));
        }
        // F = u * omega(u), starting from F(2) = 1.
        let mut f = 1.0;
        for k in m..n - 1 {
            let j = k - m; // omega(u_k - 1) = values[j]
            let left = values[j];
            let right = values[j + 1];
            let mid = if j + 1 <= m {
                1.0 / (grid(j) + 0.5 * h)
            } else if j == m {
                // Stencil j..j+3 stays right of the kink.
                (5.0 * values[j] + 15.0 * values[j + 1] - 5.0 * values[j + 2] + values[j + 3]) / 16.0
            } else {
                (-values[j - 1] + 9.0 * values[j] + 9.0 * values[j + 1] - values[j + 2]) / 16.0
            };
            f += h / 6.0 * (left + 4.0 * mid + right);
            values.push(f / grid(k + 1));
        }
        Ok(BuchstabTable { step: h, u_max, kink: m, values })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn gamma(&self) -> f64 {
        EULER_GAMMA
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid_point(&self, k: usize) -> f64 {
        1.0 + k as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid points `(u_k, omega(u_k))` with `u_k <= u_max`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &w)| (self.grid_point(k), w))
            .take_while(|&(u, _)| u <= self.u_max + 1e-12)
    }

    pub fn omega(&self, u: f64) -> Result<f64> {
        if !(1.0..=self.u_max).contains(&u) {
            return Err(Error::OutOfRange { u, lo: 1.0, hi: self.u_max });
        }
        Ok(self.interpolate(u))
    }

    /// e^gamma omega(u).
    pub fn e_gamma_omega(&self, u: f64) -> Result<f64> {
        Ok(e_gamma() * self.omega(u)?)
    }

    fn interpolate(&self, u: f64) -> f64 {
        if u <= 2.0 {
            return 1.0 / u;
        }
        let x = (u - 1.0) / self.step;
        let j = x.floor() as usize;
        let last = self.values.len() - 1;
        if x == j as f64 && j <= last {
            return self.values[j];
        }
        let start = j.saturating_sub(1).max(self.kink).min(last - 3);
        let t = x - start as f64;
        let v = &self.values[start..start + 4];
        let w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let w1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let w2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let w3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        w0 * v[0] + w1 * v[1] + w2 * v[2] + w3 * v[3]
    }

    fn excess(&self, u: f64) -> f64 {
        e_gamma() * self.interpolate(u) - 1.0
    }

    /// Sign changes of e^gamma omega(u) - 1 on `[u_lo, u_hi]`, located by a
    /// grid scan and refined by bisection.
    pub fn find_crossings(&self, u_lo: f64, u_hi: f64) -> Result<Vec<Crossing>> {
        self.check_interval(u_lo, u_hi)?;
        let mut out = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for u in self.scan_points(u_lo, u_hi) {
            let f = self.excess(u);
            if f.abs() <= CROSSING_RESOLUTION {
                continue;
            }
            if let Some((pu, pf)) = prev {
                if pf.signum() != f.signum() {
                    out.push(Crossing { u: self.bisect(pu, u, pf), sign_after: f.signum() as i8 });
                }
            }
            prev = Some((u, f));
        }
        Ok(out)
    }

    fn check_interval(&self, u_lo: f64, u_hi: f64) -> Result<()> {
        if !(1.0..=self.u_max).contains(&u_lo) {
            return Err(Error::OutOfRange { u: u_lo, lo: 1.0, hi: self.u_max });
        }
        if !(u_lo..=self.u_max).contains(&u_hi) {
            return Err(Error::OutOfRange { u: u_hi, lo: u_lo, hi: self.u_max });
        }
        Ok(())
    }

    /// `u_lo`, every grid point strictly inside, then `u_hi`.
    fn scan_points(&self, u_lo: f64, u_hi: f64) -> impl Iterator<Item = f64> + '_ {
        let first = ((u_lo - 1.0) / self.step).floor() as usize + 1;
        let inner = (first..self.values.len())
            .map(|k| self.grid_point(k))
            .take_while(move |&u| u < u_hi);
        std::iter::once(u_lo).chain(inner).chain(std::iter::once(u_hi))
    }

    fn bisect(&self, mut a: f64, mut b: f64, fa: f64) -> f64 {
        while b - a > BISECTION_TOL {
            let mid = 0.5 * (a + b);
            let fm = self.excess(mid);
            if fm == 0.0 {
                return mid;
            }
            if fm.signum() == fa.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Points `u_plus, u_minus >= u_min` with e^gamma omega above and below 1,
    /// each the extreme of its stretch between consecutive crossings. The
    /// earliest stretch of each sign is used.
    pub fn pick_u_pm(&self, u_min: f64) -> Result<(f64, f64)> {
        if u_min < 1.0 || u_min + 2.0 > self.u_max {
            return Err(Error::RangeTooShort { u_min, u_max: self.u_max });
        }
        let crossings = self.find_crossings(u_min, self.u_max)?;
        let Some(first) = crossings.first() else {
            return Err(Error::RangeTooShort { u_min, u_max: self.u_max });
        };
        let mut bounds = vec![u_min];
        bounds.extend(crossings.iter().map(|c| c.u));
        bounds.push(self.u_max);
        let mut signs = vec![-first.sign_after];
        signs.extend(crossings.iter().map(|c| c.sign_after));

        let extreme_in = |lo: f64, hi: f64| {
            self.scan_points(lo, hi)
                .map(|u| (u, self.excess(u).abs()))
                .fold((lo, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0
        };
        let pick = |sign: i8| {
            signs
                .iter()
                .position(|&s| s == sign)
                .map(|i| extreme_in(bounds[i], bounds[i + 1]))
        };
        match (pick(1), pick(-1)) {
            (Some(plus), Some(minus)) => Ok((plus, minus)),
            _ => Err(Error::RangeTooShort { u_min, u_max: self.u_max }),
        }
    }
}

/// Free-function form of [`BuchstabTable::build`].
pub fn build_table(step: f64, u_max: f64) -> Result<BuchstabTable> {
    BuchstabTable::build(step, u_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    // omega on [2, 3] from one explicit integration of the delay equation.
    fn closed_form(u: f64) -> f64 {
        (1.0 + (u - 1.0).ln()) / u
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(matches!(BuchstabTable::build(0.0, 5.0), Err(Error::InvalidStep(_))));
        assert!(matches!(BuchstabTable::build(2e-3, 5.0), Err(Error::InvalidStep(_))));
        assert!(matches!(BuchstabTable::build(3e-4, 5.0), Err(Error::InvalidStep(_))));
        assert!(BuchstabTable::build(1e-3, 1.5).is_err());
    }

    #[test]
    fn point_values() {
        let t = BuchstabTable::build(1e-4, 12.0).unwrap();
        assert_eq!(t.omega(1.0).unwrap(), 1.0);
        assert_eq!(t.omega(2.0).unwrap(), 0.5);
        assert_eq!(t.omega(1.5).unwrap(), 2.0 / 3.0);
        assert!((t.omega(2.5).unwrap() - closed_form(2.5)).abs() < 1e-8);
        assert!((t.omega(2.5).unwrap() - 0.562_186_0).abs() < 1e-7);
        assert!((t.omega(10.0).unwrap() - (-EULER_GAMMA).exp()).abs() < 1e-4);
        assert!(matches!(t.omega(0.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(t.omega(12.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn stored_gamma_matches_digits() {
        let parsed: f64 = EULER_GAMMA_DIGITS.parse().unwrap();
        assert_eq!(parsed, EULER_GAMMA);
        assert_eq!(EULER_GAMMA_DIGITS.len() - 2, 30);
    }

    #[test]
    fn closed_form_on_two_three() {
        let t = BuchstabTable::build(1e-4, 4.0).unwrap();
        let worst = (0..=10_000)
            .map(|k| 2.0 + k as f64 * 1e-4)
            .map(|u| (t.omega(u).unwrap() - closed_form(u)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-8, "max error {worst}");
        // Off-grid points too.
        for u in [2.00001, 2.123456, 2.99999] {
            assert!((t.omega(u).unwrap() - closed_form(u)).abs() <= 1e-8);
        }
    }

    #[test]
    fn table_invariants() {
        let t = BuchstabTable::build(1e-3, 20.0).unwrap();
        let mut prev_f = 0.0;
        for (u, w) in t.points() {
            assert!((0.5..=1.0).contains(&w), "omega({u}) = {w}");
            if u <= 2.0 {
                assert!((w - 1.0 / u).abs() < 1e-15);
            } else {
                assert!(u * w >= prev_f - 1e-15, "u omega decreased at {u}");
            }
            prev_f = u * w;
        }
    }

    #[test]
    fn oscillation_envelope_shrinks() {
        let t = BuchstabTable::build(1e-3, 20.0).unwrap();
        let limit = (-EULER_GAMMA).exp();
        let envelope = |n: usize| {
            t.points()
                .filter(|&(u, _)| u >= n as f64 && u <= n as f64 + 1.0)
                .map(|(_, w)| (w - limit).abs())
                .fold(0.0, f64::max)
        };
        let mut prev = envelope(3);
        for n in 4..=12 {
            let cur = envelope(n);
            if prev < 1e-12 {
                break;
            }
            assert!(cur < prev, "envelope grew from [{}, {}] to [{n}, {}]", n - 1, n, n + 1);
            prev = cur;
        }
    }

    #[test]
    fn refinement_converges_at_fourth_order() {
        let coarse = BuchstabTable::build(1e-3, 10.0).unwrap();
        let fine = BuchstabTable::build(5e-4, 10.0).unwrap();
        let finer = BuchstabTable::build(2.5e-4, 10.0).unwrap();
        let diff = |a: &BuchstabTable, b: &BuchstabTable| {
            (0..=800)
                .map(|k| 2.0 + k as f64 * 0.01)
                .map(|u| (a.omega(u).unwrap() - b.omega(u).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        let d1 = diff(&coarse, &fine);
        let d2 = diff(&fine, &finer);
        let h4 = 1e-3f64.powi(4);
        assert!(d1 <= 100.0 * h4, "d1 = {d1}");
        assert!(d1 / d2 > 8.0, "refinement ratio {}", d1 / d2);
    }

    #[test]
    fn crossing_positions() {
        let t = BuchstabTable::build(1e-4, 10.0).unwrap();
        assert!(e_gamma() * t.omega(1.0).unwrap() - 1.0 > 0.0);
        let c = t.find_crossings(1.0, 2.0).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].u - e_gamma()).abs() < 1e-9);
        assert_eq!(c[0].sign_after, -1);

        // Root of e^gamma (1 + ln(u - 1)) = u on (2, 3) by an independent bisection.
        let g = |u: f64| e_gamma() * (1.0 + (u - 1.0).ln()) - u;
        let (mut a, mut b) = (2.0, 3.0);
        assert!(g(a) < 0.0 && g(b) > 0.0);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if g(m) < 0.0 { a = m } else { b = m }
        }
        let c = t.find_crossings(2.0, 3.0).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].u - a).abs() < 1e-8, "{} vs {a}", c[0].u);
        assert_eq!(c[0].sign_after, 1);

        let all = t.find_crossings(1.0, 8.0).unwrap();
        assert!(all.len() >= 2);
        assert!(all.windows(2).all(|w| w[0].sign_after != w[1].sign_after));
    }

    #[test]
    fn u_plus_minus() {
        let t = BuchstabTable::build(1e-4, 10.0).unwrap();
        let (plus, minus) = t.pick_u_pm(1.0).unwrap();
        assert!((1.0..e_gamma()).contains(&plus));
        assert!(minus > e_gamma());
        assert!(t.e_gamma_omega(plus).unwrap() > 1.0);
        assert!(t.e_gamma_omega(minus).unwrap() < 1.0);

        let crossing = t.find_crossings(2.0, 3.0).unwrap()[0].u;
        let (plus, minus) = t.pick_u_pm(crossing - 1e-3).unwrap();
        assert!(plus >= crossing - 1e-3 && minus >= crossing - 1e-3);
        assert!(t.e_gamma_omega(plus).unwrap() > 1.0);
        assert!(t.e_gamma_omega(minus).unwrap() < 1.0);
    }

    #[test]
    fn u_plus_minus_needs_room() {
        let t = BuchstabTable::build(1e-3, 40.0).unwrap();
        // Beyond u ~ 20 the oscillation is below table resolution.
        assert!(matches!(t.pick_u_pm(38.0), Err(Error::RangeTooShort { .. })));
        assert!(matches!(t.pick_u_pm(39.0), Err(Error::RangeTooShort { .. })));
    }
}
