use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rug::Integer;

use super::{
    agm_fixed, ceil_log2, pi_fixed, shr_trunc, working_scale, HPNumber, HpError, Result,
    OUTPUT_EXTRA_BITS,
};

/// Extra bits on top of the working scale: the AGM log produces ln(s) with
/// magnitude ~ scale/2, and m·ln 2 multiplies the ln 2 error by |m|.
fn ln_extra_bits(scale: u32) -> u32 {
    ceil_log2(scale as u64) + 8
}

/// ln(mantissa · 2^(shift)) at fixed-point `scale`, where the argument is at
/// least 2^(scale/2 + 16) so that ln s = π / (2·AGM(1, 4/s)) holds to within
/// the working precision.
fn ln_large_fixed(mantissa: &Integer, shift: i64, scale: u32) -> Integer {
    let log2_s = mantissa.significant_bits() as i64 - 1 + shift;
    debug_assert!(log2_s >= scale as i64 / 2 + 16);
    // 4/s is about 2^(−log2_s); carry that many extra bits so it keeps full
    // relative precision through the AGM.
    let agm_scale = scale + log2_s as u32 + 8;
    let exponent = agm_scale as i64 + 2 - shift;
    let y = Integer::from(1) << exponent as u32;
    let y = y / mantissa;
    let one = Integer::from(1) << agm_scale;
    let mean = agm_fixed(&one, &y, agm_scale);
    let pi = pi_fixed(agm_scale);
    (pi << scale) / (mean << 1)
}

/// ln u at fixed-point `scale` for an integer u ≥ 2^(scale/2 + 16).
pub(crate) fn ln_large_integer(u: &Integer, scale: u32) -> Integer {
    ln_large_fixed(u, 0, scale)
}

fn ln2_cache() -> &'static Mutex<HashMap<u32, Integer>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Integer>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// ln 2 at fixed-point `scale`, memoized per scale.
fn ln2_fixed(scale: u32) -> Integer {
    if let Some(hit) = ln2_cache().lock().unwrap().get(&scale) {
        return hit.clone();
    }
    let power = scale / 2 + 16;
    let ln_power = ln_large_fixed(&Integer::from(1), power as i64, scale);
    let value = ln_power / power;
    let mut cache = ln2_cache().lock().unwrap();
    if cache.len() >= 8 {
        cache.clear();
    }
    cache.insert(scale, value.clone());
    value
}

/// ln x at fixed-point `scale` for positive `x`.
///
/// x is rescaled to s = x·2^m with s ≥ 2^(scale/2 + 16); then
/// ln x = ln s − m·ln 2.
fn ln_fixed(x: &HPNumber, scale: u32) -> Integer {
    debug_assert!(x.sign() > 0);
    let work = scale + ln_extra_bits(scale);
    let mantissa = x.mantissa();
    let log2_x = mantissa.significant_bits() as i64 - 1 - x.scale() as i64;
    let target = work as i64 / 2 + 16;
    let m = target - log2_x;
    let ln_s = ln_large_fixed(mantissa, m - x.scale() as i64, work);
    let ln_x = ln_s - ln2_fixed(work) * m;
    shr_trunc(&ln_x, work - scale).0
}

/// Natural logarithm of a positive number.
pub fn hp_ln(x: &HPNumber, prec_bits: u32) -> Result<HPNumber> {
    if x.sign() <= 0 {
        return Err(HpError::Domain("logarithm of a nonpositive number".into()));
    }
    if prec_bits == 0 {
        return Err(HpError::Domain("precision must be positive".into()));
    }
    let out = prec_bits + OUTPUT_EXTRA_BITS;
    if x.is_exact() && *x == HPNumber::from_int(1) {
        return Ok(HPNumber::from_fixed(Integer::new(), out, true));
    }
    let work = working_scale(prec_bits);
    let value = ln_fixed(x, work);
    let (mantissa, _) = shr_trunc(&value, work - out);
    Ok(HPNumber::from_fixed(mantissa, out, false))
}
