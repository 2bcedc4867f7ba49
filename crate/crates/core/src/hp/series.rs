use rug::Integer;

use super::{HPNumber, HpError, Result, OUTPUT_EXTRA_BITS};

type TermFn<'a> = Box<dyn Fn(i64) -> Integer + Send + Sync + 'a>;

/// A series Σ_{n=start}^{end−1} term(n) with a rational term ratio
/// `term(n+1) / term(n) = p(n) / q(n)` and an exact rational first term.
pub struct SeriesSpec<'a> {
    p: TermFn<'a>,
    q: TermFn<'a>,
    first_numerator: Integer,
    first_denominator: Integer,
    start: i64,
    end: i64,
}

impl<'a> SeriesSpec<'a> {
    pub fn new(
        p: impl Fn(i64) -> Integer + Send + Sync + 'a,
        q: impl Fn(i64) -> Integer + Send + Sync + 'a,
        first_term: (Integer, Integer),
        range: std::ops::Range<i64>,
    ) -> Self {
        SeriesSpec {
            p: Box::new(p),
            q: Box::new(q),
            first_numerator: first_term.0,
            first_denominator: first_term.1,
            start: range.start,
            end: range.end,
        }
    }

    pub fn range(&self) -> std::ops::Range<i64> {
        self.start..self.end
    }
}

/// Products over an index range [a, b):
/// `p = Π p(j)`, `q = Π q(j)` and `t` with Σ_{n=a}^{b−1} Π_{j=a}^{n−1} p(j)/q(j) = t/q.
struct Block {
    p: Integer,
    q: Integer,
    t: Integer,
}

impl Block {
    fn merge(left: Block, right: Block) -> Block {
        let t = left.t * &right.q + Integer::from(&left.p * &right.t);
        Block {
            p: left.p * right.p,
            q: left.q * right.q,
            t,
        }
    }
}

/// How a range is divided during recursion. Used by tests to check that the
/// merged result does not depend on the split points.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SplitRule {
    pub leaf: i64,
    /// Split at `a + (b − a) · num / den`, clamped to a proper sub-range.
    pub num: i64,
    pub den: i64,
}

impl Default for SplitRule {
    fn default() -> Self {
        SplitRule {
            leaf: 16,
            num: 1,
            den: 2,
        }
    }
}

/// Ranges larger than this are split across rayon workers.
const PARALLEL_THRESHOLD: i64 = 4096;

fn leaf_block(spec: &SeriesSpec<'_>, a: i64, b: i64) -> Result<Block> {
    let mut block: Option<Block> = None;
    for n in a..b {
        let q = (spec.q)(n);
        if q == 0 {
            return Err(HpError::MalformedSeries { index: n });
        }
        let p = (spec.p)(n);
        block = Some(match block {
            None => Block {
                t: q.clone(),
                p,
                q,
            },
            Some(acc) => {
                let t = acc.t * &q + Integer::from(&acc.p * &q);
                Block {
                    p: acc.p * p,
                    q: acc.q * q,
                    t,
                }
            }
        });
    }
    Ok(block.expect("leaf range is non-empty"))
}

fn split_block(spec: &SeriesSpec<'_>, a: i64, b: i64, rule: SplitRule) -> Result<Block> {
    let len = b - a;
    if len <= rule.leaf.max(1) {
        return leaf_block(spec, a, b);
    }
    let mid = (a + len * rule.num / rule.den).clamp(a + 1, b - 1);
    let (left, right) = if len > PARALLEL_THRESHOLD {
        rayon::join(
            || split_block(spec, a, mid, rule),
            || split_block(spec, mid, b, rule),
        )
    } else {
        (
            split_block(spec, a, mid, rule),
            split_block(spec, mid, b, rule),
        )
    };
    Ok(Block::merge(left?, right?))
}

pub(crate) fn binary_split_with_leaf(
    spec: &SeriesSpec<'_>,
    prec_bits: u32,
    rule: SplitRule,
) -> Result<HPNumber> {
    if spec.end <= spec.start {
        return Err(HpError::EmptyRange(format!(
            "empty index range [{}, {})",
            spec.start, spec.end
        )));
    }
    if spec.first_denominator == 0 {
        return Err(HpError::Domain("first term has a zero denominator".into()));
    }
    let block = split_block(spec, spec.start, spec.end, rule)?;
    let numerator = block.t * &spec.first_numerator;
    let denominator = block.q * &spec.first_denominator;
    HPNumber::from_ratio(&numerator, &denominator, prec_bits + OUTPUT_EXTRA_BITS)
}

/// Evaluates the truncated series exactly as a rational and truncates the
/// result to `prec_bits` (plus the output slack bits).
///
/// Halves of large ranges are evaluated concurrently; the merge is exact, so
/// the result is bit-identical for any thread count.
pub fn binary_split(spec: &SeriesSpec<'_>, prec_bits: u32) -> Result<HPNumber> {
    binary_split_with_leaf(spec, prec_bits, SplitRule::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rug::Rational;

    fn as_rational(x: &HPNumber) -> Rational {
        Rational::from((x.mantissa().clone(), Integer::from(1) << x.scale()))
    }

    fn one() -> (Integer, Integer) {
        (Integer::from(1), Integer::from(1))
    }

    fn alternating_odd_squares(terms: i64) -> SeriesSpec<'static> {
        SeriesSpec::new(
            |n| -Integer::from(2 * n + 1).square(),
            |n| Integer::from(2 * n + 3).square(),
            one(),
            0..terms,
        )
    }

    #[test]
    fn single_term() {
        let spec = SeriesSpec::new(|_| Integer::from(1), |_| Integer::from(1), one(), 0..1);
        let r = binary_split(&spec, 64).unwrap();
        assert!(r.is_exact());
        assert_eq!(r, HPNumber::from_int(1));
    }

    #[test]
    fn e_partial_sum() {
        // Σ_{n=0}^{20} 1/n!; ratio 1/(n+1).
        let spec = SeriesSpec::new(|_| Integer::from(1), |n| Integer::from(n + 1), one(), 0..21);
        let r = binary_split(&spec, 128).unwrap();
        let mut oracle = Rational::new();
        let mut fact = Integer::from(1);
        for n in 0..21u32 {
            if n > 0 {
                fact *= n;
            }
            oracle += Rational::from((1, fact.clone()));
        }
        let diff = (as_rational(&r) - oracle).abs();
        assert!(diff < Rational::from((1, Integer::from(1) << 128u32)));
        // 2.718281828459045235339784... (partial sum, not e itself)
        assert!((r.to_f64() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn three_alternating_terms() {
        let r = binary_split(&alternating_odd_squares(3), 100).unwrap();
        let exact = Rational::from((209, 225));
        let diff = (as_rational(&r) - exact).abs();
        assert!(diff < Rational::from((1, Integer::from(1) << 100u32)));
    }

    #[test]
    fn zero_denominator_is_reported() {
        let spec = SeriesSpec::new(|_| Integer::from(1), |n| Integer::from(n - 3), one(), 0..10);
        assert_eq!(
            binary_split(&spec, 64).unwrap_err(),
            HpError::MalformedSeries { index: 3 }
        );
    }

    #[test]
    fn empty_range_is_rejected() {
        let spec = SeriesSpec::new(|_| Integer::from(1), |_| Integer::from(1), one(), 5..5);
        assert!(matches!(binary_split(&spec, 64), Err(HpError::EmptyRange(_))));
    }

    #[test]
    fn parallel_sized_range_matches_sequential_sum() {
        let terms = 3 * PARALLEL_THRESHOLD;
        let spec = alternating_odd_squares(terms);
        let fast = binary_split(&spec, 300).unwrap();
        let serial = binary_split_with_leaf(
            &spec,
            300,
            SplitRule {
                leaf: terms,
                num: 1,
                den: 2,
            },
        )
        .unwrap();
        assert_eq!(fast.mantissa(), serial.mantissa());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn split_points_do_not_change_bits(
            terms in 1i64..400,
            leaf in 1i64..40,
            num in 1i64..7,
        ) {
            let spec = alternating_odd_squares(terms);
            let reference = binary_split(&spec, 256).unwrap();
            let other = binary_split_with_leaf(&spec, 256, SplitRule { leaf, num, den: 7 }).unwrap();
            prop_assert_eq!(reference.mantissa(), other.mantissa());
        }
    }
}
