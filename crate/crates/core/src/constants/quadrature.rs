//! Tanh-sinh quadrature of ∫₀¹ dt / √(1 − t⁴) in fixed point.
//!
//! The substitution t = 1 / (1 + e^(−2u)), u = (π/2)·sinh τ turns the
//! endpoint singularity at t = 1 into a double-exponentially decaying tail.
//! Writing E = e^(2u):
//!
//! ```text
//! 1 − t  = 1 / (1 + E)          dt/du = 2E / (1 + E)²
//! f(t)·dt/du = 2E / ((1 + E)^(3/2) · √((1 + t)(1 + t²)))
//! ```
//!
//! so 1 − t is never formed by cancellation.

use rug::Integer;

use crate::hp::{isqrt, pi_fixed, shr_trunc, HPNumber, HpError, Result};

const MAX_DIGITS: u32 = 30;
const MAX_LEVEL: u32 = 12;

/// e^x for a fixed-point `x` at `scale`, result at `scale`.
fn exp_fixed(x: &Integer, scale: u32) -> Integer {
    if *x < 0 {
        let positive = exp_fixed(&Integer::from(-x), scale);
        return (Integer::from(1) << (2 * scale)) / positive;
    }
    // Reduce to r = x / 2^halvings < 2^(−8), sum the Taylor series, square back.
    let magnitude_bits = x.significant_bits() as i64 - scale as i64;
    let halvings = (magnitude_bits + 8).max(0) as u32;
    let work = scale + halvings + 16;
    let r = Integer::from(x << (work - scale)) >> halvings;
    let one = Integer::from(1) << work;
    let mut sum = one.clone();
    let mut term = one;
    let mut k = 1u32;
    loop {
        term = Integer::from(&term * &r) >> work;
        term /= k;
        if term == 0 {
            break;
        }
        sum += &term;
        k += 1;
    }
    for _ in 0..halvings {
        sum = Integer::from(sum.square_ref()) >> work;
    }
    sum >> (work - scale)
}

/// One node's contribution f(t)·dt/dτ at τ (all fixed point at `scale`).
fn node_value(tau: &Integer, half_pi: &Integer, scale: u32) -> Integer {
    let one = Integer::from(1) << scale;
    let e_tau = exp_fixed(tau, scale);
    let e_neg = (Integer::from(1) << (2 * scale)) / &e_tau;
    let sinh = Integer::from(&e_tau - &e_neg) >> 1;
    let cosh = Integer::from(&e_tau + &e_neg) >> 1;
    let u = Integer::from(half_pi * &sinh) >> scale;
    let e = exp_fixed(&(u << 1), scale);
    if e == 0 {
        return Integer::new();
    }
    let one_plus_e = Integer::from(&one + &e);
    // t = E / (1 + E)
    let t = Integer::from(&e << scale) / &one_plus_e;
    let one_plus_t = Integer::from(&one + &t);
    let one_plus_t2 = &one + (Integer::from(t.square_ref()) >> scale);
    let tail = Integer::from(&one_plus_t * &one_plus_t2) >> scale;
    let sqrt_tail = isqrt(&(tail << scale));
    let sqrt_one_plus_e = isqrt(&Integer::from(&one_plus_e << scale));
    let denominator = Integer::from(&one_plus_e * &sqrt_one_plus_e) >> scale;
    let denominator = Integer::from(&denominator * &sqrt_tail) >> scale;
    if denominator == 0 {
        return Integer::new();
    }
    // 2E / denominator · (π/2)·cosh τ
    let integrand = (e << (scale + 1)) / denominator;
    let jacobian = Integer::from(half_pi * &cosh) >> scale;
    (integrand * jacobian) >> scale
}

/// Sum of node values at τ = k·h, k = ±start, ±(start+step), ..., walking outward until the
/// contributions fall below one unit.
fn sweep(h: &Integer, half_pi: &Integer, scale: u32, step: i64, start: i64) -> Integer {
    let mut total = Integer::new();
    for direction in [1i64, -1] {
        let mut k = if direction == 1 { start } else { -start };
        if direction == -1 && start == 0 {
            k = -step;
        }
        let mut small_run = 0;
        loop {
            let tau = Integer::from(h * k);
            let v = node_value(&tau, half_pi, scale);
            let negligible = v.significant_bits() <= 1;
            total += v;
            small_run = if negligible { small_run + 1 } else { 0 };
            if small_run >= 2 {
                break;
            }
            k += direction * step;
        }
    }
    total
}

/// ∫₀¹ dt / √(1 − t⁴) to at least `digits` correct decimal digits.
///
/// Oracle-scale only (`digits ≤ 30`). The value is ϖ/2, a quarter of the
/// lemniscate arc length s.
pub fn lemniscate_integral_oracle(digits: u32) -> Result<HPNumber> {
    if digits == 0 || digits > MAX_DIGITS {
        return Err(HpError::Domain(format!(
            "quadrature oracle supports 1..={MAX_DIGITS} digits, got {digits}"
        )));
    }
    let target_bits = (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 8;
    let scale = target_bits + 40;
    let half_pi = pi_fixed(scale) >> 1;

    // Level 0: h = 1. Each refinement halves h and only visits the new odd nodes.
    let mut h = Integer::from(1) << scale;
    let mut sum = sweep(&h, &half_pi, scale, 1, 0);
    let mut estimate = Integer::from(&sum * &h) >> scale;
    for _ in 1..=MAX_LEVEL {
        h >>= 1;
        sum += sweep(&h, &half_pi, scale, 2, 1);
        let next = Integer::from(&sum * &h) >> scale;
        let change = Integer::from(&next - &estimate).abs();
        estimate = next;
        if change.significant_bits() + target_bits + 8 <= scale {
            break;
        }
    }
    let out = target_bits;
    Ok(HPNumber::from_fixed(
        shr_trunc(&estimate, scale - out).0,
        out,
        false,
    ))
}
