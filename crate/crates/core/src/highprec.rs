//! Double-double arithmetic (about 106 significant bits).
//!
//! Every operation is built from error-free transforms under the default
//! IEEE-754 round-to-nearest-even mode; `f64::mul_add` supplies the exact
//! product error. Relative error per multiplication stays below 2^-104.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DoubleDouble {
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn from_f64(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }

    /// Nearest double-double to an exact rational.
    pub fn from_rational(r: &BigRational) -> Self {
        if r.is_zero() {
            return DoubleDouble { hi: 0.0, lo: 0.0 };
        }
        let hi = rational_to_f64(r);
        let rest = r - BigRational::from_float(hi).expect("finite");
        let lo = rational_to_f64(&rest);
        let (hi, lo) = quick_two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul(self, other: DoubleDouble) -> DoubleDouble {
        let p = self.hi * other.hi;
        let err = self.hi.mul_add(other.hi, -p);
        let err = err + (self.hi * other.lo + self.lo * other.hi);
        let (hi, lo) = quick_two_sum(p, err);
        DoubleDouble { hi, lo }
    }

    pub fn add(self, other: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, other.hi);
        let (t, f) = two_sum(self.lo, other.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to scaling for values outside the direct conversion.
        let num: &BigInt = r.numer();
        let den: &BigInt = r.denom();
        let shift = num.bits() as i64 - den.bits() as i64;
        let scaled = if shift > 0 {
            BigRational::new(num.clone(), den.clone() << shift as usize)
        } else {
            BigRational::new(num.clone() << (-shift) as usize, den.clone())
        };
        scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
    })
}
