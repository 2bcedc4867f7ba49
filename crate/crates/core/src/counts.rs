//! Overlapping k-gram counts.
//!
//! A k-gram starting at position i has index Σ d_(i+j)·b^(k−1−j), so index
//! order is lexicographic order of the digit strings.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radix::{digit_char, MAX_BASE, MIN_BASE};
use crate::stream::{DigitChunk, StreamError};

pub const MAX_K: u32 = 8;
pub const DEFAULT_MAX_K: u32 = 3;

/// Digits per worker per batch.
const DIGITS_PER_WORKER: usize = 1 << 21;

#[derive(Debug, Error)]
pub enum CountError {
    #[error("stream has {available} digits, fewer than k = {k}")]
    TooShort { k: u32, available: u64 },
    #[error("digit value {digit} at position {position} is not valid in base {base}")]
    DigitOutOfRange { digit: u8, position: u64, base: u32 },
    #[error("k = {0} outside 1..={MAX_K}")]
    KOutOfRange(u32),
    #[error("base {0} outside 2..=36")]
    BaseOutOfRange(u32),
    #[error("cannot combine counts: {0}")]
    ShapeMismatch(String),
    #[error("cannot marginalize a table with k = 1")]
    MarginalizeUnigram,
    #[error("digit count overflows 64 bits")]
    Overflow,
    #[error("malformed counts document: {0}")]
    Document(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

pub type Result<T> = std::result::Result<T, CountError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    First,
    Last,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KGramCounts {
    pub source_label: String,
    pub base: u32,
    pub k: u32,
    pub total_positions: u64,
    pub counts: Vec<u64>,
}

fn check_shape(base: u32, k: u32) -> Result<usize> {
    if !(MIN_BASE..=MAX_BASE).contains(&base) {
        return Err(CountError::BaseOutOfRange(base));
    }
    if k == 0 || k > MAX_K {
        return Err(CountError::KOutOfRange(k));
    }
    (base as usize)
        .checked_pow(k)
        .ok_or(CountError::KOutOfRange(k))
}

impl KGramCounts {
    pub fn zero(base: u32, k: u32, source_label: impl Into<String>) -> Result<Self> {
        let len = check_shape(base, k)?;
        Ok(KGramCounts {
            source_label: source_label.into(),
            base,
            k,
            total_positions: 0,
            counts: vec![0; len],
        })
    }

    /// Number of categories bᵏ.
    pub fn categories(&self) -> usize {
        self.counts.len()
    }

    /// Stream length N implied by M = N − k + 1.
    pub fn digit_count(&self) -> u64 {
        self.total_positions + self.k as u64 - 1
    }

    /// The k-gram spelled out, e.g. index 255 with b=16, k=3 is "0FF".
    pub fn label(&self, index: usize) -> String {
        let mut chars = vec!['0'; self.k as usize];
        let mut v = index;
        for slot in chars.iter_mut().rev() {
            *slot = digit_char((v % self.base as usize) as u8);
            v /= self.base as usize;
        }
        chars.into_iter().collect()
    }

    fn is_consistent(&self) -> bool {
        check_shape(self.base, self.k).ok() == Some(self.counts.len())
            && self.counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c))
                == Some(self.total_positions)
    }
}

fn validate_digits(digits: &[u8], base: u32, first_position: u64) -> Result<()> {
    match digits.iter().position(|&d| d as u32 >= base) {
        Some(i) => Err(CountError::DigitOutOfRange {
            digit: digits[i],
            position: first_position + i as u64,
            base,
        }),
        None => Ok(()),
    }
}

/// Counts every window of `k` digits in one straightforward pass.
pub fn count_naive(digits: &[u8], base: u32, k: u32) -> Result<KGramCounts> {
    let mut out = KGramCounts::zero(base, k, "")?;
    validate_digits(digits, base, 0)?;
    let k = k as usize;
    if digits.len() < k {
        return Err(CountError::TooShort {
            k: k as u32,
            available: digits.len() as u64,
        });
    }
    for window in digits.windows(k) {
        let index = window
            .iter()
            .fold(0usize, |acc, &d| acc * base as usize + d as usize);
        out.counts[index] += 1;
    }
    out.total_positions = (digits.len() - k + 1) as u64;
    Ok(out)
}

/// Adds the windows that start in `segment[..segment.len() − k + 1]`.
fn count_segment(segment: &[u8], base: usize, k: usize, table: &mut [u64]) {
    if segment.len() < k {
        return;
    }
    let low = base.pow(k as u32 - 1);
    let mut v = segment[..k - 1]
        .iter()
        .fold(0usize, |acc, &d| acc * base + d as usize);
    for (&lead, &d) in segment.iter().zip(&segment[k - 1..]) {
        v = v * base + d as usize;
        table[v] += 1;
        v -= lead as usize * low;
    }
}

/// Streaming counter for all k = 1..=K in a single pass.
///
/// Windows are tallied only at length K; shorter lengths are recovered at the
/// end by marginalizing and adding the windows that start in the last K − 1
/// positions.
pub struct KGramCounter {
    base: u32,
    max_k: u32,
    pool: rayon::ThreadPool,
    workers: usize,
    table: Vec<u64>,
    /// Last K − 1 digits of everything consumed so far, followed by digits
    /// not yet counted.
    buffer: Vec<u8>,
    carried: usize,
    digits_seen: u64,
    batch: usize,
}

impl KGramCounter {
    pub fn new(base: u32, max_k: u32, workers: usize) -> Result<Self> {
        let len = check_shape(base, max_k)?;
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to start counting threads");
        Ok(KGramCounter {
            base,
            max_k,
            pool,
            workers,
            table: vec![0; len],
            buffer: Vec::new(),
            carried: 0,
            digits_seen: 0,
            batch: DIGITS_PER_WORKER * workers,
        })
    }

    pub fn digits_seen(&self) -> u64 {
        self.digits_seen
    }

    pub fn feed(&mut self, digits: &[u8]) -> Result<()> {
        let mut rest = digits;
        while !rest.is_empty() {
            let room = self.batch - (self.buffer.len() - self.carried);
            let take = room.min(rest.len());
            let start = self.digits_seen;
            validate_digits(&rest[..take], self.base, start)?;
            self.buffer.extend_from_slice(&rest[..take]);
            self.digits_seen = self
                .digits_seen
                .checked_add(take as u64)
                .ok_or(CountError::Overflow)?;
            rest = &rest[take..];
            if self.buffer.len() - self.carried >= self.batch {
                self.flush();
            }
        }
        Ok(())
    }

    fn flush(&mut self) {
        let k = self.max_k as usize;
        let base = self.base as usize;
        if self.buffer.len() >= k {
            let windows = self.buffer.len() - k + 1;
            let per = windows.div_ceil(self.workers).max(1);
            let buffer = &self.buffer;
            let len = self.table.len();
            let partials: Vec<Vec<u64>> = self.pool.install(|| {
                (0..windows)
                    .step_by(per)
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|start| {
                        let end = (start + per).min(windows);
                        let mut table = vec![0u64; len];
                        count_segment(&buffer[start..end + k - 1], base, k, &mut table);
                        table
                    })
                    .collect()
            });
            for partial in partials {
                for (total, c) in self.table.iter_mut().zip(partial) {
                    *total += c;
                }
            }
        }
        let keep = self.buffer.len().min(k - 1);
        self.buffer.drain(..self.buffer.len() - keep);
        self.carried = keep;
    }

    /// Tables for k = 1..=K, in that order.
    pub fn finish(mut self, source_label: &str) -> Result<Vec<KGramCounts>> {
        self.flush();
        let n = self.digits_seen;
        if n < self.max_k as u64 {
            return Err(CountError::TooShort {
                k: self.max_k,
                available: n,
            });
        }
        let tail = self.buffer;
        let mut top = KGramCounts {
            source_label: source_label.to_string(),
            base: self.base,
            k: self.max_k,
            total_positions: n - self.max_k as u64 + 1,
            counts: self.table,
        };
        let mut tables = Vec::with_capacity(self.max_k as usize);
        while top.k > 1 {
            let mut lower = marginalize(&top, Position::Last)?;
            // The window of length k − 1 starting at position N − k + 1.
            let start = tail.len() - (lower.k as usize);
            let index = tail[start..]
                .iter()
                .fold(0usize, |acc, &d| acc * self.base as usize + d as usize);
            lower.counts[index] += 1;
            lower.total_positions += 1;
            tables.push(top);
            top = lower;
        }
        tables.push(top);
        tables.reverse();
        Ok(tables)
    }
}

/// Counts k = 1..=K over a chunked stream.
pub fn count_stream<I>(chunks: I, base: u32, max_k: u32, workers: usize, source_label: &str) -> Result<Vec<KGramCounts>>
where
    I: IntoIterator<Item = std::result::Result<DigitChunk, StreamError>>,
{
    let mut counter = KGramCounter::new(base, max_k, workers)?;
    for chunk in chunks {
        counter.feed(&chunk?.digits)?;
    }
    counter.finish(source_label)
}

/// Counts k-grams of a single length over a chunked stream.
pub fn count_kgrams<I>(chunks: I, base: u32, k: u32, workers: usize) -> Result<KGramCounts>
where
    I: IntoIterator<Item = std::result::Result<DigitChunk, StreamError>>,
{
    let mut tables = count_stream(chunks, base, k, workers, "")?;
    Ok(tables.pop().expect("at least one table"))
}

/// Counts k = 1..=K over digits already in memory.
pub fn count_slice(digits: &[u8], base: u32, max_k: u32, workers: usize) -> Result<Vec<KGramCounts>> {
    let mut counter = KGramCounter::new(base, max_k, workers)?;
    counter.feed(digits)?;
    counter.finish("")
}

pub fn merge_counts(a: &KGramCounts, b: &KGramCounts) -> Result<KGramCounts> {
    if a.base != b.base || a.k != b.k || a.counts.len() != b.counts.len() {
        return Err(CountError::ShapeMismatch(format!(
            "base {} k {} vs base {} k {}",
            a.base, a.k, b.base, b.k
        )));
    }
    let counts = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(x, y)| x.checked_add(*y).ok_or(CountError::Overflow))
        .collect::<Result<Vec<_>>>()?;
    Ok(KGramCounts {
        source_label: a.source_label.clone(),
        base: a.base,
        k: a.k,
        total_positions: a
            .total_positions
            .checked_add(b.total_positions)
            .ok_or(CountError::Overflow)?,
        counts,
    })
}

/// Sums out the first or last digit of every k-gram.
pub fn marginalize(c: &KGramCounts, position: Position) -> Result<KGramCounts> {
    if c.k < 2 {
        return Err(CountError::MarginalizeUnigram);
    }
    let mut out = KGramCounts::zero(c.base, c.k - 1, c.source_label.clone())?;
    let base = c.base as usize;
    let lower = out.counts.len();
    for (v, &count) in c.counts.iter().enumerate() {
        let index = match position {
            Position::Last => v / base,
            Position::First => v % lower,
        };
        out.counts[index] += count;
    }
    out.total_positions = c.total_positions;
    Ok(out)
}

/// On-disk form: one record per k, each a complete table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum CountsFile {
    Many(Vec<CountsRecord>),
    One(CountsRecord),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsRecord {
    #[serde(flatten)]
    pub table: KGramCounts,
    /// SHA-256 of the digit file the counts came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_checksum: Option<String>,
}

pub fn write_counts(path: &Path, records: &[CountsRecord]) -> Result<()> {
    let text = serde_json::to_string_pretty(&CountsFile::Many(records.to_vec()))
        .map_err(|e| CountError::Document(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Reads a counts file holding either one record or a list of them.
pub fn read_counts(path: &Path) -> Result<Vec<CountsRecord>> {
    let text = fs::read_to_string(path)?;
    let parsed: CountsFile =
        serde_json::from_str(&text).map_err(|e| CountError::Document(e.to_string()))?;
    let records = match parsed {
        CountsFile::Many(v) => v,
        CountsFile::One(r) => vec![r],
    };
    for r in &records {
        if !r.table.is_consistent() {
            return Err(CountError::Document(format!(
                "table k = {} in base {} does not sum to its total",
                r.table.k, r.table.base
            )));
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn digits(text: &str) -> Vec<u8> {
        text.bytes().map(|b| b - b'0').collect()
    }

    #[test]
    fn unigrams_of_ten_digits() {
        let c = count_naive(&digits("0123456789"), 10, 1).unwrap();
        assert_eq!(c.counts, vec![1; 10]);
        assert_eq!(c.total_positions, 10);
        let fast = count_slice(&digits("0123456789"), 10, 1, 2).unwrap();
        assert_eq!(fast[0].counts, c.counts);
    }

    #[test]
    fn overlapping_pairs() {
        let c = count_naive(&digits("111"), 10, 2).unwrap();
        assert_eq!(c.counts[11], 2);
        assert_eq!(c.counts.iter().sum::<u64>(), 2);
        let fast = count_slice(&digits("111"), 10, 2, 1).unwrap();
        assert_eq!(fast[1], c);
    }

    #[test]
    fn minimal_window() {
        let c = count_naive(&digits("00"), 10, 2).unwrap();
        assert_eq!(c.counts[0], 1);
        assert_eq!(c.total_positions, 1);
        let pairs = count_naive(&digits("0123456789"), 10, 2).unwrap();
        for v in [1usize, 12, 23, 34, 45, 56, 67, 78, 89] {
            assert_eq!(pairs.counts[v], 1);
        }
        assert_eq!(pairs.total_positions, 9);
    }

    #[test]
    fn short_and_invalid_streams() {
        assert!(matches!(
            count_naive(&digits("12"), 10, 3),
            Err(CountError::TooShort { k: 3, available: 2 })
        ));
        assert!(matches!(
            count_slice(&digits("12"), 10, 3, 1),
            Err(CountError::TooShort { k: 3, available: 2 })
        ));
        assert!(matches!(
            count_naive(&[1, 2, 10], 10, 1),
            Err(CountError::DigitOutOfRange { digit: 10, position: 2, .. })
        ));
        assert!(matches!(count_naive(&[1], 10, 0), Err(CountError::KOutOfRange(0))));
        assert!(matches!(count_naive(&[1], 10, 9), Err(CountError::KOutOfRange(9))));
    }

    #[test]
    fn labels_are_big_endian() {
        let c = KGramCounts::zero(16, 3, "x").unwrap();
        assert_eq!(c.label(0), "000");
        assert_eq!(c.label(255), "0FF");
        assert_eq!(c.label(4095), "FFF");
    }

    #[test]
    fn marginals() {
        let pairs = count_naive(&digits("0123456789"), 10, 2).unwrap();
        let last = marginalize(&pairs, Position::Last).unwrap();
        let mut expected = vec![1u64; 9];
        expected.push(0);
        assert_eq!(last.counts, expected);
        let first = marginalize(&pairs, Position::First).unwrap();
        assert_eq!(first.total_positions, pairs.total_positions);
        assert_eq!(last.total_positions, pairs.total_positions);
        assert!(matches!(
            marginalize(&last, Position::Last),
            Err(CountError::MarginalizeUnigram)
        ));
    }

    #[test]
    fn merge_identity_and_mismatch() {
        let x = count_naive(&digits("31415926535"), 10, 2).unwrap();
        let zero = KGramCounts::zero(10, 2, "").unwrap();
        assert_eq!(merge_counts(&x, &zero).unwrap(), x);
        let y = count_naive(&digits("31415926535"), 10, 1).unwrap();
        assert!(matches!(merge_counts(&x, &y), Err(CountError::ShapeMismatch(_))));
    }

    #[test]
    fn batches_smaller_than_input() {
        let mut counter = KGramCounter::new(10, 3, 3).unwrap();
        counter.batch = 5;
        let d: Vec<u8> = (0..1000u32).map(|i| ((i * i + 7 * i) % 10) as u8).collect();
        for piece in d.chunks(3) {
            counter.feed(piece).unwrap();
        }
        let tables = counter.finish("t").unwrap();
        for k in 1..=3 {
            assert_eq!(tables[k - 1].counts, count_naive(&d, 10, k as u32).unwrap().counts);
        }
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let tables = count_slice(&digits("9159655941772190150546"), 10, 2, 1).unwrap();
        let records: Vec<_> = tables
            .into_iter()
            .map(|table| CountsRecord { table, input_checksum: Some("abc".into()) })
            .collect();
        write_counts(&path, &records).unwrap();
        assert_eq!(read_counts(&path).unwrap(), records);

        let single = serde_json::to_string(&records[0]).unwrap();
        fs::write(&path, single).unwrap();
        assert_eq!(read_counts(&path).unwrap(), vec![records[0].clone()]);

        let mut bad = records[0].clone();
        bad.table.counts[0] += 1;
        fs::write(&path, serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(matches!(read_counts(&path), Err(CountError::Document(_))));
    }

    proptest! {
        #[test]
        fn fast_matches_naive(
            base in prop::sample::select(vec![10u32, 16]),
            raw in prop::collection::vec(any::<u8>(), 3..2000),
            workers in 1usize..5,
            batch in 1usize..64,
        ) {
            let d: Vec<u8> = raw.iter().map(|x| x % base as u8).collect();
            let mut counter = KGramCounter::new(base, 3, workers).unwrap();
            counter.batch = batch;
            counter.feed(&d).unwrap();
            let tables = counter.finish("").unwrap();
            for k in 1..=3u32 {
                let naive = count_naive(&d, base, k).unwrap();
                prop_assert_eq!(&tables[k as usize - 1].counts, &naive.counts);
                prop_assert_eq!(tables[k as usize - 1].total_positions, d.len() as u64 - k as u64 + 1);
            }
        }

        #[test]
        fn marginal_last_equals_prefix_count(raw in prop::collection::vec(0u8..10, 4..500)) {
            let three = count_naive(&raw, 10, 3).unwrap();
            let direct = count_naive(&raw[..raw.len() - 1], 10, 2).unwrap();
            prop_assert_eq!(marginalize(&three, Position::Last).unwrap().counts, direct.counts);
            let tail = count_naive(&raw[1..], 10, 2).unwrap();
            prop_assert_eq!(marginalize(&three, Position::First).unwrap().counts, tail.counts);
        }
    }
}
