#![allow(dead_code)]

use normdigits::hp::HPNumber;
use rug::{Integer, Rational};

pub fn to_rational(x: &HPNumber) -> Rational {
    Rational::from((x.mantissa().clone(), Integer::from(1) << x.scale()))
}

pub fn pow10(e: u32) -> Integer {
    Integer::from(Integer::u_pow_u(10, e))
}

/// 10^-e as a rational.
pub fn ten_to_minus(e: u32) -> Rational {
    Rational::from((1, pow10(e)))
}

/// Σ (−1)ᵏ/(2k+1)² summed with the Cohen–Rodriguez Villegas–Zagier
/// acceleration in exact rationals.
///
/// 1/(2k+1)² is the k-th moment of the positive weight −ln(x)/(4√x) on
/// [0,1], so with d = T_n(3) (an integer) the error is at most 2G/d.
/// Returns (estimate, error bound).
pub fn catalan_accelerated(n: u32) -> (Rational, Rational) {
    // d = T_n(3) through T_{j+1} = 6·T_j − T_{j−1}.
    let (mut t0, mut t1) = (Integer::from(1), Integer::from(3));
    for _ in 0..n {
        let t2 = Integer::from(&t1 * 6u32) - &t0;
        t0 = t1;
        t1 = t2;
    }
    let d = t0;
    let mut b = Rational::from(-1);
    let mut c = Rational::from(-&d);
    let mut s = Rational::new();
    let n_i = n as i64;
    for k in 0..n_i {
        c = Rational::from(&b - &c);
        let odd = Integer::from(2 * k + 1);
        s += Rational::from((Integer::from(1), odd.square())) * &c;
        // b·(k+n)(k−n) / ((k+½)(k+1)) = b·2(k+n)(k−n) / ((2k+1)(k+1))
        let num = Integer::from(2 * (k + n_i) * (k - n_i));
        let den = Integer::from((2 * k + 1) * (k + 1));
        b *= Rational::from((num, den));
    }
    let estimate = s / Rational::from(d.clone());
    // G < 1, so 2G/d < 2/d.
    let bound = Rational::from((2, d));
    (estimate, bound)
}

/// Truncated base-10 digits of a nonnegative rational, after the point.
pub fn decimal_digits(x: &Rational, n: u32) -> String {
    let scaled = Rational::from(x * pow10(n));
    let floor = Integer::from(scaled.numer() / scaled.denom());
    let text = format!("{:0>width$}", floor.to_string(), width = n as usize);
    text[text.len() - n as usize..].to_string()
}
