mod common;

use common::{catalan_accelerated, decimal_digits, ten_to_minus, to_rational};
use normdigits::constants::{
    bits_for_digits, catalan, catalan_bits, catalan_defining_partial, constant, lemniscate_family,
    lemniscate_family_bits, lemniscate_integral_oracle, ConstantId,
};
use normdigits::hp::{hp_pi, hp_sqrt, HPNumber};
use rug::{Integer, Rational};

#[test]
fn accelerated_oracle_bound_is_tight_enough() {
    let (g, bound) = catalan_accelerated(60);
    assert!(bound < ten_to_minus(45));
    assert_eq!(decimal_digits(&g, 40), "9159655941772190150546035149323841107741");
}

#[test]
fn catalan_matches_accelerated_series() {
    let (oracle, bound) = catalan_accelerated(80);
    let g = catalan_bits(200).unwrap();
    let diff = (to_rational(&g) - &oracle).abs();
    let tolerance = Rational::from((1, Integer::from(1) << 200u32)) + bound;
    assert!(diff <= tolerance);
}

#[test]
fn catalan_within_partial_sum_remainder() {
    let n: u64 = 1_000_000;
    let partial = catalan_defining_partial(n, 96).unwrap();
    let g = catalan(20).unwrap().value;
    let remainder = Rational::from((1, Integer::from(2 * n + 1).square()));
    let slack = Rational::from((1, Integer::from(1) << 90u32));
    let diff = (to_rational(&g) - to_rational(&partial)).abs();
    assert!(diff <= remainder + &slack);
    // Consecutive partial sums bracket the limit.
    let next = catalan_defining_partial(n + 1, 96).unwrap();
    let (lo, hi) = if to_rational(&partial) < to_rational(&next) {
        (partial, next)
    } else {
        (next, partial)
    };
    assert!(to_rational(&lo) - slack.clone() <= to_rational(&g));
    assert!(to_rational(&g) <= to_rational(&hi) + slack);
}

#[test]
fn catalan_is_stable_under_extra_precision() {
    for prec in [64u32, 333, 1000] {
        let a = catalan_bits(prec).unwrap();
        let b = catalan_bits(prec + 100).unwrap();
        assert!(a.agrees_with(&b, prec), "prec {prec}");
    }
}

#[test]
fn arc_times_agm_is_two_pi() {
    let prec = 2000;
    let family = lemniscate_family_bits(prec).unwrap();
    let product = family.arc.mul(&family.agm, prec + 2);
    let two_pi = hp_pi(prec).unwrap().mul_pow2(1);
    assert!(product.agrees_with(&two_pi, prec - 4));
}

#[test]
fn gamma_quarter_identity() {
    let prec = 1000;
    let family = lemniscate_family_bits(prec).unwrap();
    let g = &family.gamma_quarter;
    let square = g.mul(g, prec + 8);
    let root_two_pi = hp_sqrt(&hp_pi(prec + 8).unwrap().mul_pow2(1), prec + 8).unwrap();
    let arc = square.div(&root_two_pi, prec + 8).unwrap();
    assert!(arc.agrees_with(&family.arc, prec - 6));
}

#[test]
fn family_relations_are_exact() {
    let family = lemniscate_family_bits(500).unwrap();
    assert_eq!(family.l.mul_pow2(1), family.arc);
    assert_eq!(family.l1.mul_pow2(2), family.arc);
    assert_eq!(family.l2.mul_pow2(1), family.agm);
    let one = family.gauss.mul(&family.agm, 502);
    assert!(one.agrees_with(&HPNumber::from_int(1), 496));
}

#[test]
fn quadrature_agrees_with_agm() {
    let integral = lemniscate_integral_oracle(25).unwrap();
    let family = lemniscate_family_bits(bits_for_digits(25)).unwrap();
    // The integral is a quarter of the arc length.
    let diff = (to_rational(&integral) * 4u32 - to_rational(&family.arc)).abs();
    assert!(diff < ten_to_minus(24));
}

#[test]
fn named_constants() {
    let cases = [
        (ConstantId::LemniscateArc, "2441151085842396209296791797822388273655"),
        (ConstantId::GaussConstant, "8346268416740731862814297327990468089939"),
        (ConstantId::GammaQuarter, "6256099082219083119306851558676720029951"),
        (ConstantId::Catalan, "9159655941772190150546035149323841107741"),
    ];
    for (id, digits) in cases {
        let v = constant(id, 45).unwrap();
        assert_eq!(decimal_digits(&to_rational(&v.value), 40), digits, "{id}");
    }
    let family = lemniscate_family(45).unwrap();
    assert_eq!(family.len(), 6);
}
