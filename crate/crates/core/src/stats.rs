//! Frequency statistics of k-gram counts against the binomial model with
//! limiting frequency p = b⁻ᵏ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counts::KGramCounts;

pub const DEFAULT_BINS: u32 = 32;
/// Histogram range is p ± HISTOGRAM_HALF_WIDTH·σ.
pub const HISTOGRAM_HALF_WIDTH: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no positions counted")]
    NoPositions,
    #[error("need at least 2 categories, got {0}")]
    TooFewCategories(u64),
    #[error("stream of {n} digits is shorter than k = {k}")]
    StreamShorterThanK { n: u64, k: u32 },
    #[error("error must be positive, got {0}")]
    NonPositiveError(f64),
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(u32),
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyStats {
    pub base: u32,
    pub k: u32,
    pub categories: u64,
    pub total_positions: u64,
    pub limiting_frequency: f64,
    pub predicted_variance: f64,
    pub predicted_error: f64,
    pub actual_variance: f64,
    pub deviation_sigma: f64,
    /// Share of k-grams whose z-score lies in [−1, 1].
    pub within_one_sigma: f64,
    pub min_frequency: f64,
    pub min_label: String,
    pub max_frequency: f64,
    pub max_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramData {
    pub base: u32,
    pub k: u32,
    pub limiting_frequency: f64,
    pub sigma: f64,
    /// `bins + 1` edges from p − 4σ to p + 4σ.
    pub edges: Vec<f64>,
    /// Occupancy of each regular bin.
    pub occupancy: Vec<u64>,
    /// k-grams with frequency below the first edge.
    pub underflow: u64,
    /// k-grams with frequency at or above the last edge.
    pub overflow: u64,
    /// p − 2σ, p − σ, p + σ, p + 2σ.
    pub guides: [f64; 4],
}

impl HistogramData {
    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.occupancy.iter().sum::<u64>()
    }
}

fn check_positions(c: &KGramCounts) -> Result<()> {
    if c.total_positions == 0 {
        return Err(StatsError::NoPositions);
    }
    Ok(())
}

fn check_categories(m: u64) -> Result<()> {
    if m < 2 {
        return Err(StatsError::TooFewCategories(m));
    }
    Ok(())
}

pub fn frequencies(c: &KGramCounts) -> Result<Vec<f64>> {
    check_positions(c)?;
    let total = c.total_positions as f64;
    Ok(c.counts.iter().map(|&n| n as f64 / total).collect())
}

/// p(1 − p)/M with p = b⁻ᵏ and M = N − k + 1.
pub fn predicted_variance(base: u32, k: u32, n: u64) -> Result<f64> {
    if n < k as u64 || k == 0 {
        return Err(StatsError::StreamShorterThanK { n, k });
    }
    let p = 1.0 / (base as f64).powi(k as i32);
    let positions = (n - k as u64 + 1) as f64;
    Ok(p * (1.0 - p) / positions)
}

/// Standard error of a sample variance over m near-normal values.
pub fn predicted_error(variance: f64, m: u64) -> Result<f64> {
    check_categories(m)?;
    Ok(variance * (2.0 / (m - 1) as f64).sqrt())
}

/// Σ (f − 1/m)² / (m − 1).
///
/// Each f − 1/m equals (c·m − M)/(m·M); the numerators are summed exactly
/// whenever the sum fits in 128 bits.
pub fn actual_variance(c: &KGramCounts) -> Result<f64> {
    check_positions(c)?;
    let m = c.counts.len() as u64;
    check_categories(m)?;
    let total = c.total_positions as i128;
    let numerators = c.counts.iter().map(|&n| n as i128 * m as i128 - total);
    let exact = numerators.clone().try_fold(0u128, |acc, d| {
        d.unsigned_abs()
            .checked_mul(d.unsigned_abs())
            .and_then(|sq| acc.checked_add(sq))
    });
    let sum = match exact {
        Some(v) => v as f64,
        None => numerators.map(|d| (d as f64).powi(2)).sum(),
    };
    let scale = (m as f64 * c.total_positions as f64).powi(2);
    Ok(sum / scale / (m - 1) as f64)
}

/// (predicted − actual)/error, in units of the error.
pub fn deviation(predicted: f64, error: f64, actual: f64) -> Result<f64> {
    if error.is_nan() || error <= 0.0 {
        return Err(StatsError::NonPositiveError(error));
    }
    Ok((predicted - actual) / error)
}

/// Per k-gram (f − p)/√(p(1 − p)/M).
pub fn per_gram_z(c: &KGramCounts) -> Result<Vec<f64>> {
    let f = frequencies(c)?;
    let p = 1.0 / f.len() as f64;
    let sd = (p * (1.0 - p) / c.total_positions as f64).sqrt();
    Ok(f.into_iter().map(|x| (x - p) / sd).collect())
}

/// Share of k-grams with |z| ≤ `limit`.
pub fn fraction_within(c: &KGramCounts, limit: f64) -> Result<f64> {
    let z = per_gram_z(c)?;
    let inside = z.iter().filter(|v| v.abs() <= limit).count();
    Ok(inside as f64 / z.len() as f64)
}

pub fn histogram(c: &KGramCounts, bins: u32) -> Result<HistogramData> {
    if bins < 2 {
        return Err(StatsError::TooFewBins(bins));
    }
    let f = frequencies(c)?;
    let m = f.len() as u64;
    check_categories(m)?;
    let p = 1.0 / m as f64;
    let sigma = predicted_variance(c.base, c.k, c.digit_count())?.sqrt();
    let lo = p - HISTOGRAM_HALF_WIDTH * sigma;
    let width = 2.0 * HISTOGRAM_HALF_WIDTH * sigma / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let hi = edges[bins as usize];
    let mut occupancy = vec![0u64; bins as usize];
    let (mut underflow, mut overflow) = (0, 0);
    for x in f {
        if x < lo {
            underflow += 1;
        } else if x >= hi {
            overflow += 1;
        } else {
            let i = (((x - lo) / width) as usize).min(bins as usize - 1);
            occupancy[i] += 1;
        }
    }
    Ok(HistogramData {
        base: c.base,
        k: c.k,
        limiting_frequency: p,
        sigma,
        edges,
        occupancy,
        underflow,
        overflow,
        guides: [p - 2.0 * sigma, p - sigma, p + sigma, p + 2.0 * sigma],
    })
}

pub fn frequency_stats(c: &KGramCounts) -> Result<FrequencyStats> {
    let f = frequencies(c)?;
    let m = f.len() as u64;
    check_categories(m)?;
    let predicted = predicted_variance(c.base, c.k, c.digit_count())?;
    let error = predicted_error(predicted, m)?;
    let actual = actual_variance(c)?;
    // Ties resolve to the lowest index.
    let (mut lo, mut hi) = (0, 0);
    for (i, &x) in f.iter().enumerate() {
        if x < f[lo] {
            lo = i;
        }
        if x > f[hi] {
            hi = i;
        }
    }
    Ok(FrequencyStats {
        base: c.base,
        k: c.k,
        categories: m,
        total_positions: c.total_positions,
        limiting_frequency: 1.0 / m as f64,
        predicted_variance: predicted,
        predicted_error: error,
        actual_variance: actual,
        deviation_sigma: deviation(predicted, error, actual)?,
        within_one_sigma: fraction_within(c, 1.0)?,
        min_frequency: f[lo],
        min_label: c.label(lo),
        max_frequency: f[hi],
        max_label: c.label(hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::count_naive;
    use proptest::prelude::*;

    fn table(base: u32, k: u32, counts: Vec<u64>) -> KGramCounts {
        KGramCounts {
            source_label: String::new(),
            base,
            k,
            total_positions: counts.iter().sum(),
            counts,
        }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn uniform_frequencies() {
        let c = table(10, 1, vec![1; 10]);
        assert!(frequencies(&c).unwrap().iter().all(|&f| f == 0.1));
        assert_eq!(actual_variance(&c).unwrap(), 0.0);
        assert!(per_gram_z(&c).unwrap().iter().all(|&z| z == 0.0));
        assert!(matches!(frequencies(&table(10, 1, vec![0; 10])), Err(StatsError::NoPositions)));
    }

    #[test]
    fn hand_computed_variance() {
        let c = table(10, 1, vec![2, 1, 1, 1, 1, 1, 1, 1, 1, 0]);
        assert!(close(actual_variance(&c).unwrap(), 0.02 / 9.0, 1e-15));
    }

    #[test]
    fn predicted_values() {
        let v = predicted_variance(10, 1, 600_000_000_100).unwrap();
        assert!(close(v, 0.09 / 600_000_000_100.0, 1e-15));
        assert_eq!(format!("{v:.3e}"), "1.500e-13");
        let v = predicted_variance(16, 3, 498_289_214_317).unwrap();
        assert_eq!(format!("{v:.3e}"), "4.898e-16");
        let v = predicted_variance(10, 2, 600_000_000_000).unwrap();
        assert_eq!(format!("{v:.3e}"), "1.650e-14");
        assert!(predicted_variance(10, 3, 2).is_err());
    }

    #[test]
    fn predicted_errors() {
        assert_eq!(format!("{:.3}", predicted_error(1.5e-13, 10).unwrap() * 1e13), "0.707");
        assert_eq!(format!("{:.3}", predicted_error(1.176e-13, 16).unwrap() * 1e13), "0.429");
        assert_eq!(format!("{:.3}", predicted_error(1.665e-15, 1000).unwrap() * 1e15), "0.074");
        assert!(predicted_error(1.0, 1).is_err());
    }

    #[test]
    fn deviations() {
        assert_eq!(format!("{:.3}", deviation(1.5e-13, 0.707e-13, 1.097e-13).unwrap()), "0.570");
        assert!((deviation(1.65e-14, 0.235e-14, 1.939e-14).unwrap() + 1.232).abs() <= 0.02);
        assert_eq!(deviation(3.0, 0.5, 3.0).unwrap(), 0.0);
        assert!(deviation(1.0, 0.0, 1.0).is_err());
        assert!(deviation(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn two_category_z() {
        let z = per_gram_z(&table(2, 1, vec![2, 0])).unwrap();
        assert!((z[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((z[1] + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn uniform_histogram_has_one_bin() {
        let h = histogram(&table(10, 1, vec![7; 10]), DEFAULT_BINS).unwrap();
        assert_eq!(h.occupancy.iter().filter(|&&o| o > 0).count(), 1);
        assert_eq!(h.total(), 10);
        assert_eq!(h.edges.len(), DEFAULT_BINS as usize + 1);
        let p = h.limiting_frequency;
        assert!((h.guides[0] + h.guides[3] - 2.0 * p).abs() < 1e-15);
        assert!((h.guides[1] + h.guides[2] - 2.0 * p).abs() < 1e-15);
        assert!(histogram(&table(10, 1, vec![7; 10]), 1).is_err());
    }

    #[test]
    fn extremes_are_labelled() {
        let s = frequency_stats(&table(16, 1, (0..16).map(|i| 10 + i).collect())).unwrap();
        assert_eq!(s.min_label, "0");
        assert_eq!(s.max_label, "F");
        assert_eq!(s.categories, 16);
        assert_eq!(s.limiting_frequency, 1.0 / 16.0);
    }

    #[test]
    fn random_stream_variance_is_near_prediction() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240601);
        let d: Vec<u8> = (0..1_000_000).map(|_| rng.gen_range(0..10)).collect();
        for k in 1..=3 {
            let s = frequency_stats(&count_naive(&d, 10, k).unwrap()).unwrap();
            assert!(s.deviation_sigma.abs() <= 5.0, "k={k}: {}", s.deviation_sigma);
        }
    }

    fn compensated_sum(values: &[f64]) -> f64 {
        let (mut sum, mut carry) = (0.0f64, 0.0f64);
        for &x in values {
            let t = sum + x;
            carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
        sum + carry
    }

    proptest! {
        #[test]
        fn frequencies_sum_to_one(raw in prop::collection::vec(0u8..16, 3..3000), k in 1u32..4) {
            let c = count_naive(&raw, 16, k).unwrap();
            let sum = compensated_sum(&frequencies(&c).unwrap());
            prop_assert!((sum - 1.0).abs() <= 2f64.powi(-50));
            prop_assert!(actual_variance(&c).unwrap() >= 0.0);
            prop_assert_eq!(histogram(&c, 17).unwrap().total(), c.counts.len() as u64);
            let z: f64 = per_gram_z(&c).unwrap().iter().sum();
            prop_assert!(z.abs() < 1e-6 * c.counts.len() as f64);
        }

        #[test]
        fn deviation_is_antisymmetric(a in -1e3f64..1e3, b in -1e3f64..1e3, e in 1e-6f64..1e3) {
            let d1 = deviation(a, e, b).unwrap();
            let d2 = deviation(b, e, a).unwrap();
            prop_assert_eq!(d1, -d2);
        }
    }
}
