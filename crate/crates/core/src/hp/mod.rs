//! Arbitrary-precision binary fixed-point arithmetic.
//!
//! An [`HPNumber`] is `mantissa · 2^(−scale)` with a signed GMP integer
//! mantissa. Kernels in this module take a requested precision in bits, work
//! internally at `prec + guard_bits(prec)` and truncate toward zero on the way
//! out. Public results carry [`OUTPUT_EXTRA_BITS`] bits beyond the request so
//! that truncation alone never eats the whole error budget.

mod agm;
mod ln;
mod series;
mod sqrt;

use std::cmp::Ordering;
use std::fmt;

use rug::{Assign, Integer};
use thiserror::Error;

pub use agm::{hp_agm, hp_pi};
pub use ln::hp_ln;
pub use series::{binary_split, SeriesSpec};
pub use sqrt::hp_sqrt;

pub(crate) use agm::{agm_fixed, pi_fixed};
pub(crate) use ln::ln_large_integer;
pub(crate) use sqrt::isqrt;

/// Bits kept beyond the requested precision on every public kernel result.
pub const OUTPUT_EXTRA_BITS: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HpError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed series: q({index}) = 0")]
    MalformedSeries { index: i64 },
    #[error("malformed series: {0}")]
    EmptyRange(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, HpError>;

/// Guard bits added on top of a requested precision: `32 + ceil(log2(prec))`.
pub fn guard_bits(prec_bits: u32) -> u32 {
    32 + ceil_log2(prec_bits.max(1) as u64)
}

pub(crate) fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Working scale used inside kernels for a public request of `prec_bits`.
pub(crate) fn working_scale(prec_bits: u32) -> u32 {
    prec_bits + OUTPUT_EXTRA_BITS + guard_bits(prec_bits)
}

/// Shifts right by `bits`, rounding toward zero. Returns whether any nonzero
/// bit was discarded.
pub(crate) fn shr_trunc(value: &Integer, bits: u32) -> (Integer, bool) {
    if bits == 0 {
        return (value.clone(), false);
    }
    let negative = *value < 0;
    let mut magnitude = Integer::from(value.abs_ref());
    let lost = magnitude.find_one(0).is_some_and(|lowest| lowest < bits);
    magnitude >>= bits;
    if negative {
        magnitude = -magnitude;
    }
    (magnitude, lost)
}

/// Real number `mantissa · 2^(−scale)`.
///
/// `exact` records whether the value is known to equal the real quantity it
/// stands for (integers, dyadic rationals, lossless transforms of those).
/// Kernel outputs are inexact unless the computation provably lost nothing.
#[derive(Clone)]
pub struct HPNumber {
    mantissa: Integer,
    scale: u32,
    exact: bool,
}

impl HPNumber {
    pub fn zero() -> Self {
        HPNumber {
            mantissa: Integer::new(),
            scale: 0,
            exact: true,
        }
    }

    pub fn from_int(value: impl Into<Integer>) -> Self {
        HPNumber {
            mantissa: value.into(),
            scale: 0,
            exact: true,
        }
    }

    /// Wraps a fixed-point mantissa produced by a computation.
    pub fn from_fixed(mantissa: Integer, scale: u32, exact: bool) -> Self {
        HPNumber {
            mantissa,
            scale,
            exact,
        }
    }

    /// Exact dyadic value of a finite `f64`.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        if value == 0.0 {
            return Some(Self::zero());
        }
        let bits = value.to_bits();
        let negative = bits >> 63 == 1;
        let exponent = ((bits >> 52) & 0x7ff) as i64;
        let fraction = bits & ((1u64 << 52) - 1);
        let (significand, exp2) = if exponent == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1u64 << 52), exponent - 1075)
        };
        let mut mantissa = Integer::from(significand);
        let scale = if exp2 >= 0 {
            mantissa <<= exp2 as u32;
            0
        } else {
            (-exp2) as u32
        };
        if negative {
            mantissa = -mantissa;
        }
        Some(Self::from_fixed(mantissa, scale, true).normalized())
    }

    /// `numerator / denominator` truncated toward zero at `scale` bits.
    pub fn from_ratio(numerator: &Integer, denominator: &Integer, scale: u32) -> Result<Self> {
        if *denominator == 0 {
            return Err(HpError::Domain("division by zero".into()));
        }
        let shifted = Integer::from(numerator << scale);
        let (quotient, remainder) = shifted.div_rem(denominator.clone());
        Ok(Self::from_fixed(quotient, scale, remainder == 0))
    }

    pub fn mantissa(&self) -> &Integer {
        &self.mantissa
    }

    /// Binary fractional bits carried by this value.
    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// −1, 0 or +1.
    pub fn sign(&self) -> i32 {
        match self.mantissa.cmp0() {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }

    pub fn magnitude(&self) -> Integer {
        Integer::from(self.mantissa.abs_ref())
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0
    }

    /// Mantissa of this value re-expressed at `scale`, truncated toward zero.
    pub fn fixed_at(&self, scale: u32) -> Integer {
        if scale >= self.scale {
            Integer::from(&self.mantissa << (scale - self.scale))
        } else {
            shr_trunc(&self.mantissa, self.scale - scale).0
        }
    }

    /// The same value at another scale. Widening is exact; narrowing truncates
    /// toward zero.
    pub fn with_scale(&self, scale: u32) -> Self {
        if scale >= self.scale {
            Self::from_fixed(self.fixed_at(scale), scale, self.exact)
        } else {
            let (mantissa, lost) = shr_trunc(&self.mantissa, self.scale - scale);
            Self::from_fixed(mantissa, scale, self.exact && !lost)
        }
    }

    /// Drops trailing zero bits from the mantissa without changing the value.
    pub fn normalized(mut self) -> Self {
        if self.mantissa == 0 {
            self.scale = 0;
            return self;
        }
        let trailing = self.mantissa.find_one(0).unwrap_or(0).min(self.scale);
        if trailing > 0 {
            self.mantissa >>= trailing;
            self.scale -= trailing;
        }
        self
    }

    /// Exact halving: the mantissa is kept and the scale grows by one.
    pub fn half(&self) -> Self {
        Self::from_fixed(self.mantissa.clone(), self.scale + 1, self.exact)
    }

    /// Exact multiplication by `2^shift` for signed `shift`.
    pub fn mul_pow2(&self, shift: i64) -> Self {
        if shift >= 0 {
            let shift = shift as u32;
            let drop = shift.min(self.scale);
            let mantissa = Integer::from(&self.mantissa << (shift - drop));
            Self::from_fixed(mantissa, self.scale - drop, self.exact)
        } else {
            Self::from_fixed(
                self.mantissa.clone(),
                self.scale + (-shift) as u32,
                self.exact,
            )
        }
    }

    pub fn neg(&self) -> Self {
        Self::from_fixed(Integer::from(-&self.mantissa), self.scale, self.exact)
    }

    pub fn abs(&self) -> Self {
        Self::from_fixed(self.magnitude(), self.scale, self.exact)
    }

    fn aligned(&self, other: &Self) -> (Integer, Integer, u32) {
        let scale = self.scale.max(other.scale);
        (self.fixed_at(scale), other.fixed_at(scale), scale)
    }

    /// Exact sum.
    pub fn add(&self, other: &Self) -> Self {
        let (a, b, scale) = self.aligned(other);
        Self::from_fixed(a + b, scale, self.exact && other.exact)
    }

    /// Exact difference.
    pub fn sub(&self, other: &Self) -> Self {
        let (a, b, scale) = self.aligned(other);
        Self::from_fixed(a - b, scale, self.exact && other.exact)
    }

    /// Product truncated toward zero at `scale`.
    pub fn mul(&self, other: &Self, scale: u32) -> Self {
        let product = Integer::from(&self.mantissa * &other.mantissa);
        let product_scale = self.scale + other.scale;
        let exact = self.exact && other.exact;
        if scale >= product_scale {
            Self::from_fixed(product << (scale - product_scale), scale, exact)
        } else {
            let (mantissa, lost) = shr_trunc(&product, product_scale - scale);
            Self::from_fixed(mantissa, scale, exact && !lost)
        }
    }

    /// Quotient truncated toward zero at `scale`.
    pub fn div(&self, other: &Self, scale: u32) -> Result<Self> {
        if other.is_zero() {
            return Err(HpError::Domain("division by zero".into()));
        }
        // self/other = (ma / mb) · 2^(sb − sa); shift so the quotient lands at `scale`.
        let shift = scale as i64 + other.scale as i64 - self.scale as i64;
        let (numerator, denominator) = if shift >= 0 {
            (Integer::from(&self.mantissa << shift as u32), other.mantissa.clone())
        } else {
            (
                self.mantissa.clone(),
                Integer::from(&other.mantissa << (-shift) as u32),
            )
        };
        let (quotient, remainder) = numerator.div_rem(denominator);
        Ok(Self::from_fixed(
            quotient,
            scale,
            self.exact && other.exact && remainder == 0,
        ))
    }

    /// Nearest `f64` (to within one rounding of the leading bits).
    pub fn to_f64(&self) -> f64 {
        if self.mantissa == 0 {
            return 0.0;
        }
        let bits = self.mantissa.significant_bits();
        // Keep 64 leading bits so the conversion never overflows.
        let drop = bits.saturating_sub(64);
        let top = Integer::from(&self.mantissa >> drop).to_f64();
        let exponent = (drop as i64 - self.scale as i64).clamp(-4000, 4000) as i32;
        // Two steps so an intermediate power of two never underflows early.
        let first = exponent / 2;
        top * 2f64.powi(first) * 2f64.powi(exponent - first)
    }

    /// `|self − other|` expressed in units of `2^(−scale)`, truncated.
    pub fn abs_diff_at(&self, other: &Self, scale: u32) -> Integer {
        let (a, b, common) = self.aligned(other);
        let diff = Integer::from((a - b).abs_ref());
        if scale >= common {
            diff << (scale - common)
        } else {
            // Round up so the bound stays conservative.
            let (q, lost) = shr_trunc(&diff, common - scale);
            if lost {
                q + 1
            } else {
                q
            }
        }
    }

    /// True when `|self − other| ≤ 2^(−bits)`.
    pub fn agrees_with(&self, other: &Self, bits: u32) -> bool {
        self.abs_diff_at(other, bits) <= 1
    }

    /// Floor of the value as an integer.
    pub fn floor(&self) -> Integer {
        let mut out = Integer::new();
        out.assign(&self.mantissa >> self.scale);
        out
    }
}

/// Equality is by value; the scale and the exactness flag do not participate.
impl PartialEq for HPNumber {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HPNumber {}

impl PartialOrd for HPNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HPNumber {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl fmt::Debug for HPNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "HPNumber({:e} @ {} bits{})",
            self.to_f64(),
            self.scale,
            if self.exact { ", exact" } else { "" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip_is_exact() {
        for v in [0.5, -3.25, 1e-300, 12345.678, -0.0, 2f64.powi(80)] {
            let x = HPNumber::from_f64(v).unwrap();
            assert!(x.is_exact());
            assert_eq!(x.to_f64(), v);
        }
    }

    #[test]
    fn truncation_is_toward_zero() {
        let x = HPNumber::from_fixed(Integer::from(-7), 2, true); // -1.75
        let y = x.with_scale(0);
        assert_eq!(*y.mantissa(), -1);
        assert!(!y.is_exact());
        let z = HPNumber::from_fixed(Integer::from(8), 2, true).with_scale(0);
        assert_eq!(*z.mantissa(), 2);
        assert!(z.is_exact());
    }

    #[test]
    fn half_is_exact() {
        let s = HPNumber::from_fixed(Integer::from(12345), 10, false);
        let l = s.half();
        assert_eq!(l.mul_pow2(1), s);
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let one = HPNumber::from_int(1);
        assert!(matches!(one.div(&HPNumber::zero(), 10), Err(HpError::Domain(_))));
    }

    #[test]
    fn zero_has_zero_sign() {
        assert_eq!(HPNumber::zero().sign(), 0);
        assert_eq!(HPNumber::from_int(-4).sign(), -1);
    }

    #[test]
    fn guard_policy() {
        assert_eq!(guard_bits(1), 32);
        assert_eq!(guard_bits(64), 38);
        assert_eq!(guard_bits(65), 39);
    }
}
