use rug::Integer;

use super::{isqrt, shr_trunc, working_scale, HPNumber, HpError, Result, OUTPUT_EXTRA_BITS};

/// Iteration cap; quadratic convergence needs about log2(scale) + a few steps
/// once the operands are within a constant factor of each other, plus
/// log2(max/min) steps to get there.
fn iteration_cap(a: &Integer, b: &Integer, scale: u32) -> u32 {
    let spread = a.significant_bits().abs_diff(b.significant_bits());
    64 + 2 * super::ceil_log2(scale as u64 + 1) + super::ceil_log2(spread as u64 + 1) + spread
}

/// AGM of two positive fixed-point mantissas at a common `scale`.
///
/// Stops once the operands differ by at most one unit in the last place.
pub(crate) fn agm_fixed(a: &Integer, b: &Integer, scale: u32) -> Integer {
    debug_assert!(*a > 0 && *b > 0);
    let cap = iteration_cap(a, b, scale);
    let mut a = a.clone();
    let mut b = b.clone();
    for _ in 0..cap {
        if Integer::from(&a - &b).abs() <= 1 {
            break;
        }
        let product = Integer::from(&a * &b);
        a += &b;
        a >>= 1;
        b = isqrt(&product);
    }
    a
}

/// π at fixed-point `scale` by the Brent–Salamin (Gauss–Legendre) iteration.
pub(crate) fn pi_fixed(scale: u32) -> Integer {
    let one = Integer::from(1) << scale;
    let mut a = one.clone();
    // b = 1/√2 = √(1/2): the square root of 2^(2·scale − 1) lands at `scale`.
    let mut b = isqrt(&(Integer::from(1) << (2 * scale - 1)));
    let mut t = Integer::from(1) << (scale - 2);
    let cap = iteration_cap(&a, &b, scale);
    for weight in 0..cap {
        if Integer::from(&a - &b).abs() <= 1 {
            break;
        }
        let next_a = Integer::from(&a + &b) >> 1;
        b = isqrt(&Integer::from(&a * &b));
        let delta = Integer::from(&a - &next_a);
        // t −= 2^k · (a − a')²
        let correction = Integer::from(delta.square_ref()) << weight;
        t -= correction >> scale;
        a = next_a;
    }
    let sum = Integer::from(&a + &b);
    let numerator = Integer::from(sum.square_ref());
    numerator / (t << 2)
}

/// Arithmetic–geometric mean of two positive numbers.
pub fn hp_agm(a: &HPNumber, b: &HPNumber, prec_bits: u32) -> Result<HPNumber> {
    if a.sign() <= 0 || b.sign() <= 0 {
        return Err(HpError::Domain("AGM requires positive arguments".into()));
    }
    if prec_bits == 0 {
        return Err(HpError::Domain("precision must be positive".into()));
    }
    let work = working_scale(prec_bits);
    let out = prec_bits + OUTPUT_EXTRA_BITS;
    let fa = a.fixed_at(work);
    let fb = b.fixed_at(work);
    if fa == 0 || fb == 0 {
        return Err(HpError::Domain(
            "AGM argument underflows the working precision".into(),
        ));
    }
    if a.is_exact() && b.is_exact() && a == b {
        return Ok(a.clone());
    }
    let mean = agm_fixed(&fa, &fb, work);
    let (mantissa, _) = shr_trunc(&mean, work - out);
    Ok(HPNumber::from_fixed(mantissa, out, false))
}

/// π to `prec_bits` bits.
pub fn hp_pi(prec_bits: u32) -> Result<HPNumber> {
    if prec_bits < 8 {
        return Err(HpError::Domain("pi needs at least 8 bits".into()));
    }
    let work = working_scale(prec_bits);
    let out = prec_bits + OUTPUT_EXTRA_BITS;
    let (mantissa, _) = shr_trunc(&pi_fixed(work), work - out);
    Ok(HPNumber::from_fixed(mantissa, out, false))
}
