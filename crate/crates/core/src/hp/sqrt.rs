use rug::Integer;

use super::{shr_trunc, working_scale, HPNumber, HpError, Result, OUTPUT_EXTRA_BITS};

/// Largest operand handled directly from the `f64` seed.
const SEED_BITS: u32 = 104;

/// `floor(sqrt(n))` for `n ≥ 0`.
///
/// Small inputs start from a hardware `f64` square root of the leading bits;
/// larger ones recurse on the top half of the bits and finish with a single
/// Newton step, doubling the number of correct bits per level.
pub(crate) fn isqrt(n: &Integer) -> Integer {
    assert!(*n >= 0, "isqrt of a negative integer");
    if *n < 2 {
        return n.clone();
    }
    let bits = n.significant_bits();
    let mut x: Integer = if bits <= SEED_BITS {
        // f64 sqrt is within a couple of units of the answer here; the
        // decreasing Newton loop below lands exactly on the floor.
        let seed = n.to_f64().sqrt();
        Integer::from_f64(seed).unwrap_or_else(|| Integer::from(1)) + 2
    } else {
        let half = bits / 4;
        let top = Integer::from(n >> (2 * half));
        let approx = isqrt(&top) << half;
        // One Newton step from a value with ~bits/4 correct bits.
        let q = Integer::from(n / &approx);
        (approx + q) >> 1
    };
    if bits <= SEED_BITS {
        loop {
            let y = (Integer::from(n / &x) + &x) >> 1;
            if y >= x {
                break;
            }
            x = y;
        }
    }
    // Newton from any positive start overshoots; walk down to the floor, then
    // guard against an undershoot from the seed.
    while Integer::from(x.square_ref()) > *n {
        let y = (Integer::from(n / &x) + &x) >> 1;
        x = if y < x { y } else { x - 1 };
    }
    loop {
        let next = Integer::from(&x + 1);
        if Integer::from(next.square_ref()) <= *n {
            x = next;
        } else {
            break;
        }
    }
    x
}

/// Square root of `x` with `|r² − x| ≤ 2^(−prec_bits) · max(1, x)`.
pub fn hp_sqrt(x: &HPNumber, prec_bits: u32) -> Result<HPNumber> {
    if x.sign() < 0 {
        return Err(HpError::Domain("square root of a negative number".into()));
    }
    if prec_bits == 0 {
        return Err(HpError::Domain("precision must be positive".into()));
    }
    let work = working_scale(prec_bits);
    let out = prec_bits + OUTPUT_EXTRA_BITS;
    // x at scale 2·work so that its integer square root sits at scale work.
    let operand = x.fixed_at(2 * work);
    let operand_exact = x.is_exact() && x.with_scale(2 * work).is_exact();
    let root = isqrt(&operand);
    let root_exact = operand_exact && Integer::from(root.square_ref()) == operand;
    let (mantissa, lost) = shr_trunc(&root, work - out);
    Ok(HPNumber::from_fixed(mantissa, out, root_exact && !lost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isqrt_small_values() {
        for n in 0u64..2000 {
            let r = isqrt(&Integer::from(n));
            let r = r.to_u64().unwrap();
            assert!(r * r <= n && (r + 1) * (r + 1) > n, "n = {n}");
        }
    }

    #[test]
    fn isqrt_large_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let bits = rng.gen_range(60..6000u32);
            let mut n = Integer::from(1) << bits;
            n -= rng.gen::<u64>();
            n += Integer::from(rng.gen::<u64>()) << (bits / 2);
            let r = isqrt(&n);
            assert!(Integer::from(r.square_ref()) <= n);
            assert!(Integer::from(&r + 1).square() > n);
        }
    }

    #[test]
    fn isqrt_perfect_squares() {
        let big: Integer = Integer::from(3).pow(500u32);
        let sq = Integer::from(big.square_ref());
        assert_eq!(isqrt(&sq), big);
        assert_eq!(isqrt(&(sq - 1u32)), big - 1u32);
    }

    #[test]
    fn sqrt_of_four_is_exactly_two() {
        let r = hp_sqrt(&HPNumber::from_int(4), 64).unwrap();
        assert!(r.is_exact());
        assert_eq!(r.floor(), 2);
        assert_eq!(r, HPNumber::from_int(2));
    }

    #[test]
    fn sqrt_of_zero() {
        let r = hp_sqrt(&HPNumber::zero(), 64).unwrap();
        assert!(r.is_zero());
        assert_eq!(r.sign(), 0);
    }

    #[test]
    fn sqrt_of_negative_is_domain_error() {
        assert!(matches!(
            hp_sqrt(&HPNumber::from_int(-1), 64),
            Err(HpError::Domain(_))
        ));
    }

    #[test]
    fn sqrt_two_squares_back() {
        let prec = 128;
        let r = hp_sqrt(&HPNumber::from_int(2), prec).unwrap();
        assert!(r.scale() >= prec);
        let sq = r.mul(&r, 2 * r.scale());
        assert!(sq.agrees_with(&HPNumber::from_int(2), prec));
        assert!((r.to_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
    }
}
