//! Field abstraction shared by the exact (rational) and floating-point code
//! paths.

use std::fmt::Debug;
use std::ops::Neg;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};

/// Exact rational number over arbitrary-precision integers.
pub type Rational = BigRational;

/// A field the operational matrices can be built over.
pub trait Scalar:
    Num + Neg<Output = Self> + Clone + Debug + PartialEq + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn binomial(n: usize, k: usize) -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    /// Pivot size used by elimination; any positive value marks a usable pivot.
    fn magnitude(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn binomial(n: usize, k: usize) -> Self {
        binomial_f64(n, k)
    }

    fn from_rational(r: &Rational) -> Self {
        ratio_to_f64(r)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Rational {
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn binomial(n: usize, k: usize) -> Self {
        Rational::from_integer(BigInt::from(binomial_exact(n, k)))
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn magnitude(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            // Any nonzero rational is an exact pivot; keep the value positive
            // even if it underflows as a float.
            ratio_to_f64(self).abs().max(f64::MIN_POSITIVE)
        }
    }
}

/// Convert an exact rational to the nearest representable float.
pub fn ratio_to_f64(r: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() {
            return v;
        }
    }
    // Fall back to scaling numerator and denominator when either overflows.
    let n = r.numer();
    let d = r.denom();
    let shift = n.bits().max(d.bits()).saturating_sub(1000);
    let n = ToPrimitive::to_f64(&(n >> shift as usize)).unwrap_or(f64::NAN);
    let d = ToPrimitive::to_f64(&(d >> shift as usize)).unwrap_or(f64::NAN);
    n / d
}

/// Exact float-to-rational conversion (every finite f64 is a dyadic rational).
pub fn f64_to_ratio(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// `C(n, k)` over the integers.
pub fn binomial_exact(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// `n!` over the integers.
pub fn factorial_exact(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

const FLOAT_TABLE_ROWS: usize = 1100;

fn float_table() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(FLOAT_TABLE_ROWS);
        rows.push(vec![1.0]);
        for n in 1..FLOAT_TABLE_ROWS {
            let prev = &rows[n - 1];
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    })
}

/// `C(n, k)` as a float, from a cached Pascal triangle.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n < FLOAT_TABLE_ROWS {
        return float_table()[n][k];
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
