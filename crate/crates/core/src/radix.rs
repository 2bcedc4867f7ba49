//! Binary fixed point ⇄ base-b digit strings.
//!
//! Digits are always truncated, never rounded. [`emit_digits`] refuses to emit
//! when the value sits so close to a digit boundary that its own error could
//! flip the last digit; callers then recompute with more precision.

use std::fmt;

use rug::Integer;
use thiserror::Error;

use crate::hp::HPNumber;

pub const MIN_BASE: u32 = 2;
pub const MAX_BASE: u32 = 36;

/// Below this many digits [`emit_digits`] uses repeated multiplication.
pub const NAIVE_DIGIT_LIMIT: usize = 10_000;

/// Minimum precision beyond `n·log2(base)` an inexact value must carry.
pub const MIN_EMIT_GUARD_BITS: u32 = 16;

/// Extra source digits [`convert_base`] insists on.
pub const CONVERSION_MARGIN_DIGITS: usize = 8;

/// Digit ranges longer than this are split across rayon workers.
const PARALLEL_DIGITS: usize = 1 << 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RadixError {
    #[error("base {0} outside 2..=36")]
    BaseOutOfRange(u32),
    #[error("cannot emit digits of a negative value")]
    Negative,
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("insufficient source digits: need {needed}, have {available}")]
    InsufficientSourceDigits { needed: usize, available: usize },
    #[error("invalid digit {character:?} at position {position} for base {base}")]
    InvalidDigit {
        character: char,
        position: usize,
        base: u32,
    },
}

pub type Result<T> = std::result::Result<T, RadixError>;

fn check_base(base: u32) -> Result<()> {
    if (MIN_BASE..=MAX_BASE).contains(&base) {
        Ok(())
    } else {
        Err(RadixError::BaseOutOfRange(base))
    }
}

pub fn digit_char(value: u8) -> char {
    char::from_digit(value as u32, 36)
        .expect("digit below 36")
        .to_ascii_uppercase()
}

/// A base-b expansion: integer digits and a fixed count of fractional digits.
#[derive(Clone, PartialEq, Eq)]
pub struct DigitString {
    base: u32,
    integer_part: Vec<u8>,
    fractional: Vec<u8>,
}

impl DigitString {
    pub fn new(base: u32, integer_part: Vec<u8>, fractional: Vec<u8>) -> Result<Self> {
        check_base(base)?;
        for (position, &d) in integer_part.iter().chain(&fractional).enumerate() {
            if d as u32 >= base {
                return Err(RadixError::InvalidDigit {
                    character: char::from_digit(d as u32, 36).unwrap_or('?'),
                    position,
                    base,
                });
            }
        }
        let integer_part = if integer_part.is_empty() {
            vec![0]
        } else {
            integer_part
        };
        Ok(DigitString {
            base,
            integer_part,
            fractional,
        })
    }

    /// Parses `"<int>.<frac>"`; text without a radix point is taken as
    /// fractional digits only. Letters may be either case.
    pub fn parse(text: &str, base: u32) -> Result<Self> {
        check_base(base)?;
        let (int_text, frac_text, frac_offset) = match text.split_once('.') {
            Some((i, f)) => (i, f, i.len() + 1),
            None => ("", text, 0),
        };
        let decode = |s: &str, offset: usize| -> Result<Vec<u8>> {
            s.chars()
                .enumerate()
                .map(|(i, c)| match c.to_digit(base) {
                    Some(d) => Ok(d as u8),
                    None => Err(RadixError::InvalidDigit {
                        character: c,
                        position: offset + i,
                        base,
                    }),
                })
                .collect()
        };
        Self::new(base, decode(int_text, 0)?, decode(frac_text, frac_offset)?)
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn integer_part(&self) -> &[u8] {
        &self.integer_part
    }

    pub fn fractional_digits(&self) -> &[u8] {
        &self.fractional
    }

    /// Number of fractional digits.
    pub fn len(&self) -> usize {
        self.fractional.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractional.is_empty()
    }

    /// Fractional digits as text, upper case.
    pub fn fraction_text(&self) -> String {
        self.fractional.iter().map(|&d| digit_char(d)).collect()
    }

    pub fn integer_text(&self) -> String {
        self.integer_part.iter().map(|&d| digit_char(d)).collect()
    }

    /// First `n` fractional digits (n ≤ len).
    pub fn prefix(&self, n: usize) -> DigitString {
        DigitString {
            base: self.base,
            integer_part: self.integer_part.clone(),
            fractional: self.fractional[..n.min(self.fractional.len())].to_vec(),
        }
    }
}

impl fmt::Display for DigitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.integer_text(), self.fraction_text())
    }
}

impl fmt::Debug for DigitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 40;
        let text = self.fraction_text();
        let shown = if text.len() > SHOWN {
            format!("{}…({} digits)", &text[..SHOWN], text.len())
        } else {
            text
        };
        write!(f, "DigitString(base {}: {}.{})", self.base, self.integer_text(), shown)
    }
}

/// base^(2^i) for the divide-and-conquer splits.
struct PowerTable {
    powers: Vec<Integer>,
}

impl PowerTable {
    fn new(base: u32, max_digits: usize) -> Self {
        let mut powers = vec![Integer::from(base)];
        while (1usize << powers.len()) < max_digits {
            let last = powers.last().expect("non-empty");
            powers.push(Integer::from(last.square_ref()));
        }
        PowerTable { powers }
    }

    /// base^(2^level)
    fn get(&self, level: usize) -> &Integer {
        &self.powers[level]
    }
}

/// Largest digit count whose values always fit in a u64.
fn leaf_digits(base: u32) -> usize {
    (63.0 / (base as f64).log2()).floor() as usize
}

/// Level k of the largest power of two strictly below `n` (n ≥ 2).
fn split_level(n: usize) -> usize {
    (usize::BITS - 1 - (n - 1).leading_zeros()) as usize
}

/// Writes `value` (< base^out.len()) into `out` as base digits with leading
/// zeros, splitting on precomputed powers.
fn write_digits(value: &Integer, base: u32, out: &mut [u8], table: &PowerTable) {
    let n = out.len();
    if n == 0 {
        return;
    }
    if n <= leaf_digits(base) {
        let mut v = value.to_u64().expect("leaf fits in u64");
        for slot in out.iter_mut().rev() {
            *slot = (v % base as u64) as u8;
            v /= base as u64;
        }
        return;
    }
    let level = split_level(n);
    let low_len = 1usize << level;
    let (high, low) = <(Integer, Integer)>::from(value.div_rem_ref(table.get(level)));
    let (head, tail) = out.split_at_mut(n - low_len);
    if n > PARALLEL_DIGITS {
        rayon::join(
            || write_digits(&high, base, head, table),
            || write_digits(&low, base, tail, table),
        );
    } else {
        write_digits(&high, base, head, table);
        write_digits(&low, base, tail, table);
    }
}

/// Inverse of [`write_digits`].
fn read_digits(digits: &[u8], base: u32, table: &PowerTable) -> Integer {
    let n = digits.len();
    if n <= leaf_digits(base) {
        let v = digits
            .iter()
            .fold(0u64, |acc, &d| acc * base as u64 + d as u64);
        return Integer::from(v);
    }
    let level = split_level(n);
    let low_len = 1usize << level;
    let (head, tail) = digits.split_at(n - low_len);
    let (high, low) = if n > PARALLEL_DIGITS {
        rayon::join(
            || read_digits(head, base, table),
            || read_digits(tail, base, table),
        )
    } else {
        (read_digits(head, base, table), read_digits(tail, base, table))
    };
    high * table.get(level) + low
}

/// Base digits of `value` (an integer ≥ 0) with exactly `n` positions.
fn integer_to_digits(value: &Integer, base: u32, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    let table = PowerTable::new(base, n);
    write_digits(value, base, &mut out, &table);
    out
}

fn digits_to_integer(digits: &[u8], base: u32) -> Integer {
    let table = PowerTable::new(base, digits.len());
    read_digits(digits, base, &table)
}

/// Minimal digit expansion of a nonnegative integer ("0" for zero).
fn integer_part_digits(value: &Integer, base: u32) -> Vec<u8> {
    let mut n = 1usize;
    let mut bound = Integer::from(base);
    while bound <= *value {
        bound *= base;
        n += 1;
    }
    integer_to_digits(value, base, n)
}

fn pow(base: u32, n: usize) -> Integer {
    Integer::from(Integer::u_pow_u(base, n as u32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitMethod {
    /// Repeated multiply-by-base of the fractional part.
    Repeated,
    /// One multiplication by base^n then divide-and-conquer digit splitting.
    DivideAndConquer,
}

struct Split {
    integer: Integer,
    fraction: Integer,
}

fn split_integer_fraction(x: &HPNumber) -> Split {
    let integer = x.floor();
    let fraction = x.mantissa() - Integer::from(&integer << x.scale());
    Split { integer, fraction }
}

/// Ambiguity check: an inexact value whose scaled residual lies within
/// 2^(−guard/2) of a digit boundary could have either neighbour as its true
/// last digit.
fn check_residual(x: &HPNumber, residual: &Integer, base: u32, n: usize) -> Result<()> {
    if x.is_exact() {
        return Ok(());
    }
    let needed = (n as f64 * (base as f64).log2()).ceil() as u32;
    let scale = x.scale();
    if scale < needed + MIN_EMIT_GUARD_BITS {
        return Err(RadixError::InsufficientPrecision(format!(
            "{n} base-{base} digits need at least {} bits, value carries {scale}",
            needed + MIN_EMIT_GUARD_BITS
        )));
    }
    let guard = scale - needed;
    let window = Integer::from(1) << (scale - guard / 2);
    let upper = Integer::from(1) << scale;
    if *residual < window || Integer::from(&upper - residual) <= window {
        return Err(RadixError::InsufficientPrecision(format!(
            "digit {n} in base {base} lies within 2^-{} of a boundary",
            guard / 2
        )));
    }
    Ok(())
}

pub fn emit_digits_with(
    x: &HPNumber,
    base: u32,
    n_digits: usize,
    method: EmitMethod,
) -> Result<DigitString> {
    check_base(base)?;
    if x.sign() < 0 {
        return Err(RadixError::Negative);
    }
    let Split { integer, fraction } = split_integer_fraction(x);
    let scale = x.scale();
    let (digits, residual) = match method {
        EmitMethod::Repeated => {
            let mask = (Integer::from(1) << scale) - 1u32;
            let mut rest = fraction;
            let mut digits = Vec::with_capacity(n_digits);
            for _ in 0..n_digits {
                rest *= base;
                let d = Integer::from(&rest >> scale);
                digits.push(d.to_u8().expect("digit below base"));
                rest &= &mask;
            }
            (digits, rest)
        }
        EmitMethod::DivideAndConquer => {
            let scaled = fraction * pow(base, n_digits);
            let block = Integer::from(&scaled >> scale);
            let mask = (Integer::from(1) << scale) - 1u32;
            let residual = scaled & mask;
            (integer_to_digits(&block, base, n_digits), residual)
        }
    };
    check_residual(x, &residual, base, n_digits)?;
    DigitString::new(base, integer_part_digits(&integer, base), digits)
}

/// First `n_digits` fractional digits of `x ≥ 0` in `base`, truncated.
pub fn emit_digits(x: &HPNumber, base: u32, n_digits: usize) -> Result<DigitString> {
    let method = if n_digits < NAIVE_DIGIT_LIMIT {
        EmitMethod::Repeated
    } else {
        EmitMethod::DivideAndConquer
    };
    emit_digits_with(x, base, n_digits, method)
}

/// The value of a digit string, truncated toward zero at
/// `ceil(len·log2(base)) + 64` bits. Exact when the expansion is dyadic.
pub fn digits_to_value(d: &DigitString) -> HPNumber {
    let base = d.base();
    let len = d.len();
    let scale = (len as f64 * (base as f64).log2()).ceil() as u32 + 64;
    let integer = digits_to_integer(d.integer_part(), base);
    let numerator = digits_to_integer(d.fractional_digits(), base) << scale;
    let (fraction, remainder) = numerator.div_rem(pow(base, len));
    let mantissa = (integer << scale) + fraction;
    HPNumber::from_fixed(mantissa, scale, remainder == 0)
}

fn convert_fraction(d: &DigitString, target_base: u32, n_digits: usize, exact: bool) -> Result<Vec<u8>> {
    let source = digits_to_integer(d.fractional_digits(), d.base());
    let denominator = pow(d.base(), d.len());
    let scale_up = pow(target_base, n_digits);
    let low = Integer::from(&source * &scale_up) / &denominator;
    if !exact {
        // The true value lies in [D, D+1) / base^len; every point of that
        // interval must share the same leading target digits.
        let upper = (source + 1u32) * &scale_up;
        let (q, r) = upper.div_rem(denominator);
        let high = if r == 0 { q - 1u32 } else { q };
        if high != low {
            return Err(RadixError::InsufficientPrecision(format!(
                "source digits do not pin down {n_digits} base-{target_base} digits"
            )));
        }
    }
    Ok(integer_to_digits(&low, target_base, n_digits))
}

fn convert_integer(d: &DigitString, target_base: u32) -> Vec<u8> {
    integer_part_digits(&digits_to_integer(d.integer_part(), d.base()), target_base)
}

/// Re-expresses a truncated expansion in another base.
///
/// `d` is treated as the leading digits of a longer expansion, so the source
/// must carry `ceil(n·ln(target)/ln(source)) + 8` digits, and the result must
/// be the same for every real number those digits could stand for.
pub fn convert_base(d: &DigitString, target_base: u32, n_digits: usize) -> Result<DigitString> {
    check_base(target_base)?;
    if target_base == d.base() {
        if n_digits <= d.len() {
            return Ok(d.prefix(n_digits));
        }
        return Err(RadixError::InsufficientSourceDigits {
            needed: n_digits,
            available: d.len(),
        });
    }
    let needed = required_source_digits(d.base(), target_base, n_digits);
    if d.len() < needed {
        return Err(RadixError::InsufficientSourceDigits {
            needed,
            available: d.len(),
        });
    }
    let fraction = convert_fraction(d, target_base, n_digits, false)?;
    DigitString::new(target_base, convert_integer(d, target_base), fraction)
}

/// Converts the terminating expansion `d` exactly (e.g. 0.8₁₀ → 0.CCCC₁₆).
pub fn convert_base_exact(
    d: &DigitString,
    target_base: u32,
    n_digits: usize,
) -> Result<DigitString> {
    check_base(target_base)?;
    let fraction = convert_fraction(d, target_base, n_digits, true)?;
    DigitString::new(target_base, convert_integer(d, target_base), fraction)
}

/// Source digits needed by [`convert_base`] for `n_digits` target digits.
pub fn required_source_digits(source_base: u32, target_base: u32, n_digits: usize) -> usize {
    let ratio = (target_base as f64).ln() / (source_base as f64).ln();
    (n_digits as f64 * ratio).ceil() as usize + CONVERSION_MARGIN_DIGITS
}
