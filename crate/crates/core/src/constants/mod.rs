//! Catalan's constant and the lemniscate family.
//!
//! Catalan's constant uses
//!
//! ```text
//! G = (π/8)·ln(2 + √3) + (3/8)·Σ_{n≥0} 1 / (C(2n, n)·(2n+1)²)
//! ```
//!
//! with the sum evaluated by binary splitting. The lemniscate values all come
//! from a single AGM(1, √2):
//!
//! | id               | value                 |
//! |------------------|-----------------------|
//! | `LemniscateArc`  | s = 2π / AGM(1, √2)   |
//! | `LemniscateL`    | s / 2                 |
//! | `LemniscateL1`   | s / 4                 |
//! | `LemniscateL2`   | AGM(1, √2) / 2        |
//! | `GaussConstant`  | 1 / AGM(1, √2)        |
//! | `GammaQuarter`   | √(s·√(2π))            |
//!
//! Γ(1/4) is only ever derived from s; there is no independent gamma routine.

mod quadrature;


use std::fmt;
use std::str::FromStr;

use rug::Integer;
use serde::{Deserialize, Serialize};

use crate::hp::{
    agm_fixed, binary_split, ceil_log2, isqrt, ln_large_integer, pi_fixed, shr_trunc, working_scale,
    HPNumber, HpError, Result, SeriesSpec, OUTPUT_EXTRA_BITS,
};

pub use quadrature::lemniscate_integral_oracle;

/// log2(10), used to turn decimal digit counts into bit counts.
pub const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Bits carried beyond the digit count by [`ConstantValue`]s.
pub const DIGIT_GUARD_BITS: u32 = 64;

/// Digit count at which [`catalan`] re-runs itself at higher precision.
pub const SELF_CHECK_DIGITS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantId {
    Catalan,
    LemniscateArc,
    LemniscateL,
    LemniscateL1,
    LemniscateL2,
    GaussConstant,
    GammaQuarter,
    Pi,
}

impl ConstantId {
    pub const ALL: [ConstantId; 8] = [
        ConstantId::Catalan,
        ConstantId::LemniscateArc,
        ConstantId::LemniscateL,
        ConstantId::LemniscateL1,
        ConstantId::LemniscateL2,
        ConstantId::GaussConstant,
        ConstantId::GammaQuarter,
        ConstantId::Pi,
    ];

    /// Short name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            ConstantId::Catalan => "catalan",
            ConstantId::LemniscateArc => "lemniscate-arc",
            ConstantId::LemniscateL => "lemniscate-l",
            ConstantId::LemniscateL1 => "l1",
            ConstantId::LemniscateL2 => "l2",
            ConstantId::GaussConstant => "gauss",
            ConstantId::GammaQuarter => "gamma-quarter",
            ConstantId::Pi => "pi",
        }
    }
}

impl fmt::Display for ConstantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstantId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ConstantId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown constant '{s}'"))
    }
}

#[derive(Debug, Clone)]
pub struct ConstantValue {
    pub id: ConstantId,
    pub value: HPNumber,
    /// Base-10-equivalent precision the value was requested at.
    pub requested_digits: u32,
    pub method: &'static str,
}

/// Bits needed so that `digits` decimal digits plus the guard are carried.
pub fn bits_for_digits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + DIGIT_GUARD_BITS
}

fn check_digits(digits: u32) -> Result<()> {
    if digits == 0 {
        return Err(HpError::Domain("digit count must be positive".into()));
    }
    Ok(())
}

/// Σ_{n=0}^{n_terms−1} (−1)ⁿ / (2n+1)², each term truncated at a working
/// scale wide enough that the accumulated truncation stays below
/// 2^(−prec_bits).
///
/// Deliberately a plain loop: it is the independent check on [`catalan`].
pub fn catalan_defining_partial(n_terms: u64, prec_bits: u32) -> Result<HPNumber> {
    if n_terms == 0 {
        return Err(HpError::Domain("need at least one term".into()));
    }
    let scale = prec_bits + OUTPUT_EXTRA_BITS + ceil_log2(n_terms) + 2;
    let one = Integer::from(1) << scale;
    let mut sum = Integer::new();
    for n in 0..n_terms {
        let odd = Integer::from(2 * n + 1);
        let term = &one / Integer::from(odd.square_ref());
        if n % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let out = prec_bits + OUTPUT_EXTRA_BITS;
    let (mantissa, _) = shr_trunc(&sum, scale - out);
    Ok(HPNumber::from_fixed(mantissa, out, false))
}

/// The central-binomial series Σ 1 / (C(2n,n)·(2n+1)²) as a [`SeriesSpec`].
///
/// term(n+1)/term(n) = (n+1)(2n+1) / (2·(2n+3)²), so terms shrink like 4⁻ⁿ.
fn central_binomial_series(terms: i64) -> SeriesSpec<'static> {
    SeriesSpec::new(
        |n| Integer::from(n + 1) * (2 * n + 1),
        |n| Integer::from(2 * n + 3).square() * 2u32,
        (Integer::from(1), Integer::from(1)),
        0..terms,
    )
}

/// (2+√3)ⁿ + (2−√3)ⁿ, an integer, by the doubling rules
/// t(2k) = t(k)² − 2 and t(2k+1) = t(k)·t(k+1) − 4.
fn trace_power(n: u64) -> Integer {
    let (mut lo, mut hi) = (Integer::from(2), Integer::from(4));
    for bit in (0..64 - n.leading_zeros()).rev() {
        let cross = Integer::from(&lo * &hi) - 4u32;
        if (n >> bit) & 1 == 1 {
            hi = Integer::from(hi.square_ref()) - 2u32;
            lo = cross;
        } else {
            lo = Integer::from(lo.square_ref()) - 2u32;
            hi = cross;
        }
    }
    lo
}

/// ln(2+√3) at fixed-point `scale`.
///
/// With t = (2+√3)ⁿ + (2−√3)ⁿ ≥ 2^(scale/2+16), ln t differs from n·ln(2+√3)
/// by less than t⁻², far below one unit, and t is large enough for the AGM
/// logarithm without a power-of-two rescaling.
fn ln_two_plus_sqrt3(scale: u32) -> Integer {
    // log2(2+√3) = 1.8999...
    let n = ((scale / 2 + 17) as f64 / 1.89).ceil() as u64;
    ln_large_integer(&trace_power(n), scale) / n
}

fn catalan_raw(prec_bits: u32) -> Result<HPNumber> {
    let work = working_scale(prec_bits);
    let pi = pi_fixed(work);
    let log = ln_two_plus_sqrt3(work);
    // Tail after N terms is below 4^(−N).
    let terms = work as i64 / 2 + 8;
    let series = binary_split(&central_binomial_series(terms), work)?.fixed_at(work);
    // G·8 = π·ln(2+√3) + 3·Σ, at scale `work`; the division by 8 is a scale bump.
    let eight_g = Integer::from(&pi * &log) >> work;
    let eight_g = eight_g + series * 3u32;
    let out = prec_bits + OUTPUT_EXTRA_BITS;
    let (mantissa, _) = shr_trunc(&eight_g, work + 3 - out);
    Ok(HPNumber::from_fixed(mantissa, out, false))
}

/// Catalan's constant to `prec_bits` bits.
///
/// At or above the self-check size the value is recomputed with 64 more bits
/// and the two results must agree to `prec_bits`.
pub fn catalan_bits(prec_bits: u32) -> Result<HPNumber> {
    let value = catalan_raw(prec_bits)?;
    if prec_bits as f64 >= SELF_CHECK_DIGITS as f64 * LOG2_10 {
        let check = catalan_raw(prec_bits + 64)?;
        if !value.agrees_with(&check, prec_bits) {
            return Err(HpError::Verification(format!(
                "Catalan recomputation at {} bits disagrees at {} bits",
                prec_bits + 64,
                prec_bits
            )));
        }
    }
    Ok(value)
}

pub fn catalan(digits: u32) -> Result<ConstantValue> {
    check_digits(digits)?;
    Ok(ConstantValue {
        id: ConstantId::Catalan,
        value: catalan_bits(bits_for_digits(digits))?,
        requested_digits: digits,
        method: "pi/8*ln(2+sqrt3) + 3/8*sum 1/(C(2n,n)(2n+1)^2), binary splitting",
    })
}

/// All lemniscate-related values from one AGM(1, √2) evaluation.
#[derive(Debug, Clone)]
pub struct LemniscateFamily {
    pub arc: HPNumber,
    pub l: HPNumber,
    pub l1: HPNumber,
    pub l2: HPNumber,
    pub gauss: HPNumber,
    pub gamma_quarter: HPNumber,
    /// AGM(1, √2) itself, kept for identity checks.
    pub agm: HPNumber,
}

impl LemniscateFamily {
    pub fn get(&self, id: ConstantId) -> Option<&HPNumber> {
        match id {
            ConstantId::LemniscateArc => Some(&self.arc),
            ConstantId::LemniscateL => Some(&self.l),
            ConstantId::LemniscateL1 => Some(&self.l1),
            ConstantId::LemniscateL2 => Some(&self.l2),
            ConstantId::GaussConstant => Some(&self.gauss),
            ConstantId::GammaQuarter => Some(&self.gamma_quarter),
            _ => None,
        }
    }
}

pub fn lemniscate_family_bits(prec_bits: u32) -> Result<LemniscateFamily> {
    let work = working_scale(prec_bits);
    let out = prec_bits + OUTPUT_EXTRA_BITS;
    let one = Integer::from(1) << work;
    let sqrt2 = isqrt(&(Integer::from(2) << (2 * work)));
    let mean = agm_fixed(&one, &sqrt2, work);
    let pi = pi_fixed(work);

    let arc = Integer::from(&pi << (work + 1)) / &mean;
    let gauss = (Integer::from(1) << (2 * work)) / &mean;
    let sqrt_two_pi = isqrt(&(Integer::from(&pi << 1) << work));
    let gamma_quarter = isqrt(&Integer::from(&arc * &sqrt_two_pi));

    let truncate = |v: &Integer| HPNumber::from_fixed(shr_trunc(v, work - out).0, out, false);
    let arc = truncate(&arc);
    let agm = truncate(&mean);
    // Halvings are exact scale bumps, so 2L = s and 2L₁ = L hold bit for bit.
    let l = arc.half();
    let l1 = l.half();
    let l2 = agm.half();
    Ok(LemniscateFamily {
        l,
        l1,
        l2,
        gauss: truncate(&gauss),
        gamma_quarter: truncate(&gamma_quarter),
        arc,
        agm,
    })
}

pub fn lemniscate_family(digits: u32) -> Result<Vec<ConstantValue>> {
    check_digits(digits)?;
    let family = lemniscate_family_bits(bits_for_digits(digits))?;
    let method = "AGM(1, sqrt2)";
    let make = |id, value: &HPNumber| ConstantValue {
        id,
        value: value.clone(),
        requested_digits: digits,
        method,
    };
    Ok(vec![
        make(ConstantId::LemniscateArc, &family.arc),
        make(ConstantId::LemniscateL, &family.l),
        make(ConstantId::LemniscateL1, &family.l1),
        make(ConstantId::LemniscateL2, &family.l2),
        make(ConstantId::GaussConstant, &family.gauss),
        make(ConstantId::GammaQuarter, &family.gamma_quarter),
    ])
}

/// Any supported constant to `prec_bits` bits.
pub fn constant_bits(id: ConstantId, prec_bits: u32) -> Result<HPNumber> {
    match id {
        ConstantId::Catalan => catalan_bits(prec_bits),
        ConstantId::Pi => crate::hp::hp_pi(prec_bits),
        other => {
            let family = lemniscate_family_bits(prec_bits)?;
            Ok(family.get(other).expect("lemniscate id").clone())
        }
    }
}

pub fn constant(id: ConstantId, digits: u32) -> Result<ConstantValue> {
    check_digits(digits)?;
    match id {
        ConstantId::Catalan => catalan(digits),
        ConstantId::Pi => Ok(ConstantValue {
            id,
            value: crate::hp::hp_pi(bits_for_digits(digits))?,
            requested_digits: digits,
            method: "Brent-Salamin AGM",
        }),
        other => Ok(lemniscate_family(digits)?
            .into_iter()
            .find(|v| v.id == other)
            .expect("lemniscate family covers the id")),
    }
}
