//! Rendering of analysis results: a variance table (CSV or Markdown), a full
//! JSON document and histogram CSV files.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counts::KGramCounts;
use crate::stats::{frequency_stats, histogram, FrequencyStats, HistogramData, StatsError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no rows")]
    Empty,
    #[error("tables in base {base} disagree on the digit count ({a} vs {b})")]
    InconsistentDigitCount { base: u32, a: u64, b: u64 },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown table format '{other}'")),
        }
    }
}

/// Results for one base of one digit source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSection {
    pub source_label: String,
    pub base: u32,
    pub digit_count: u64,
    /// SHA-256 of the digit text the counts came from, when known.
    pub input_checksum: Option<String>,
    pub stats: Vec<FrequencyStats>,
    pub histograms: Vec<HistogramData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub label: String,
    pub tool_version: String,
    pub sections: Vec<ReportSection>,
}

impl AnalysisReport {
    pub fn new(label: impl Into<String>) -> Self {
        AnalysisReport {
            label: label.into(),
            tool_version: TOOL_VERSION.to_string(),
            sections: Vec::new(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &FrequencyStats> {
        self.sections.iter().flat_map(|s| s.stats.iter())
    }
}

/// Builds a section from count tables of one base, ordered by k.
pub fn build_section(
    tables: &[KGramCounts],
    input_checksum: Option<String>,
    bins: u32,
) -> Result<ReportSection> {
    let first = tables.first().ok_or(ReportError::Empty)?;
    let mut sorted: Vec<&KGramCounts> = tables.iter().collect();
    sorted.sort_by_key(|t| t.k);
    let digit_count = first.digit_count();
    let mut stats = Vec::with_capacity(sorted.len());
    let mut histograms = Vec::with_capacity(sorted.len());
    for t in sorted {
        if t.digit_count() != digit_count || t.base != first.base {
            return Err(ReportError::InconsistentDigitCount {
                base: first.base,
                a: digit_count,
                b: t.digit_count(),
            });
        }
        stats.push(frequency_stats(t)?);
        histograms.push(histogram(t, bins)?);
    }
    Ok(ReportSection {
        source_label: first.source_label.clone(),
        base: first.base,
        digit_count,
        input_checksum,
        stats,
        histograms,
    })
}

/// Splits `x` into a 4-significant-figure mantissa and a decimal exponent.
fn sci(x: f64) -> (String, i32) {
    let text = format!("{x:.3e}");
    let (mantissa, exponent) = text.split_once('e').expect("exponent marker");
    (mantissa.to_string(), exponent.parse().expect("integer exponent"))
}

fn fixed3(x: f64) -> String {
    let text = format!("{x:.3}");
    if text == "-0.000" {
        "0.000".to_string()
    } else {
        text
    }
}

fn markdown_cells(s: &FrequencyStats) -> [String; 5] {
    let (predicted, e) = sci(s.predicted_variance);
    let error = fixed3(s.predicted_error / 10f64.powi(e));
    let (actual, ea) = sci(s.actual_variance);
    [
        s.base.to_string(),
        s.k.to_string(),
        format!("({predicted} ± {error})×10^{e}"),
        format!("{actual}×10^{ea}"),
        fixed3(s.deviation_sigma),
    ]
}

pub const CSV_HEADER: &str =
    "base,k,digit_count,predicted_variance,predicted_error,actual_variance,deviation_sigma";

/// One row per (base, k). Numbers carry 4 significant figures; deviations
/// three decimals.
pub fn render_table(r: &AnalysisReport, format: TableFormat) -> Result<String> {
    if r.rows().next().is_none() {
        return Err(ReportError::Empty);
    }
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for section in &r.sections {
                for s in &section.stats {
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.3e},{:.3e},{:.3e},{}",
                        s.base,
                        s.k,
                        section.digit_count,
                        s.predicted_variance,
                        s.predicted_error,
                        s.actual_variance,
                        fixed3(s.deviation_sigma)
                    );
                }
            }
        }
        TableFormat::Markdown => {
            out.push_str(
                "| Base | Length of Sequence | Predicted Variance and Error of Frequencies \
                 | Actual Variance of Frequencies | Deviation [σ] |\n",
            );
            out.push_str("|---:|---:|:---:|:---:|---:|\n");
            for s in r.rows() {
                let _ = writeln!(out, "| {} |", markdown_cells(s).join(" | "));
            }
        }
    }
    Ok(out)
}

/// The whole report as pretty-printed JSON with full-precision numbers.
pub fn render_structured(r: &AnalysisReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(r)? + "\n")
}

/// `bin_lo,bin_hi,occupancy` rows (outer bins open-ended), then the four
/// guide-line positions.
pub fn render_histogram_csv(h: &HistogramData) -> String {
    let mut out = String::from("bin_lo,bin_hi,occupancy\n");
    let first = h.edges[0];
    let last = *h.edges.last().expect("edges");
    let _ = writeln!(out, "-inf,{first:e},{}", h.underflow);
    for (pair, occupancy) in h.edges.windows(2).zip(&h.occupancy) {
        let _ = writeln!(out, "{:e},{:e},{occupancy}", pair[0], pair[1]);
    }
    let _ = writeln!(out, "{last:e},inf,{}", h.overflow);
    out.push_str("\nguide,frequency\n");
    for (name, value) in ["p-2sigma", "p-sigma", "p+sigma", "p+2sigma"]
        .iter()
        .zip(h.guides)
    {
        let _ = writeln!(out, "{name},{value:e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{deviation, predicted_error, predicted_variance};

    fn row(base: u32, k: u32, n: u64, actual: f64) -> FrequencyStats {
        let m = (base as u64).pow(k);
        let predicted = predicted_variance(base, k, n).unwrap();
        let error = predicted_error(predicted, m).unwrap();
        FrequencyStats {
            base,
            k,
            categories: m,
            total_positions: n - k as u64 + 1,
            limiting_frequency: 1.0 / m as f64,
            predicted_variance: predicted,
            predicted_error: error,
            actual_variance: actual,
            deviation_sigma: deviation(predicted, error, actual).unwrap(),
            within_one_sigma: 0.0,
            min_frequency: 0.0,
            min_label: String::new(),
            max_frequency: 0.0,
            max_label: String::new(),
        }
    }

    fn report(rows: Vec<FrequencyStats>) -> AnalysisReport {
        let mut r = AnalysisReport::new("test");
        r.sections.push(ReportSection {
            source_label: "test".into(),
            base: rows[0].base,
            digit_count: rows[0].total_positions + rows[0].k as u64 - 1,
            input_checksum: None,
            stats: rows,
            histograms: Vec::new(),
        });
        r
    }

    #[test]
    fn markdown_row_layout() {
        let r = report(vec![row(10, 1, 600_000_000_100, 1.097e-13)]);
        let text = render_table(&r, TableFormat::Markdown).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "| 10 | 1 | (1.500 ± 0.707)×10^-13 | 1.097×10^-13 | 0.570 |");
    }

    #[test]
    fn single_row_csv() {
        let r = report(vec![row(16, 3, 498_289_214_317, 4.9e-16)]);
        let text = render_table(&r, TableFormat::Csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn csv_round_trip() {
        let r = report(vec![
            row(10, 1, 600_000_000_100, 1.097e-13),
            row(10, 2, 600_000_000_100, 1.939e-14),
            row(10, 3, 600_000_000_100, 1.623e-15),
        ]);
        let text = render_table(&r, TableFormat::Csv).unwrap();
        let mut parsed = r.clone();
        for (s, line) in parsed.sections[0].stats.iter_mut().zip(text.lines().skip(1)) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[0].parse::<u32>().unwrap(), s.base);
            assert_eq!(f[1].parse::<u32>().unwrap(), s.k);
            s.predicted_variance = f[3].parse().unwrap();
            s.predicted_error = f[4].parse().unwrap();
            s.actual_variance = f[5].parse().unwrap();
            s.deviation_sigma = f[6].parse().unwrap();
        }
        assert_eq!(render_table(&parsed, TableFormat::Csv).unwrap(), text);
    }

    #[test]
    fn empty_report_is_an_error() {
        let r = AnalysisReport::new("nothing");
        assert!(matches!(render_table(&r, TableFormat::Csv), Err(ReportError::Empty)));
    }

    #[test]
    fn histogram_csv_shape() {
        let counts = KGramCounts {
            source_label: String::new(),
            base: 10,
            k: 1,
            total_positions: 100,
            counts: vec![10; 10],
        };
        let h = histogram(&counts, 8).unwrap();
        let text = render_histogram_csv(&h);
        let rows: Vec<&str> = text.lines().skip(1).take_while(|l| !l.is_empty()).collect();
        assert_eq!(rows.len(), 10);
        let occupancy: Vec<u64> = rows
            .iter()
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(occupancy.iter().sum::<u64>(), 10);
        assert_eq!(occupancy.iter().filter(|&&o| o > 0).count(), 1);
        let guides: Vec<f64> = text
            .lines()
            .skip_while(|l| *l != "guide,frequency")
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        let sigma = predicted_variance(10, 1, 100).unwrap().sqrt();
        assert_eq!(guides, vec![0.1 - 2.0 * sigma, 0.1 - sigma, 0.1 + sigma, 0.1 + 2.0 * sigma]);
    }

    #[test]
    fn structured_is_parseable() {
        let r = report(vec![row(10, 1, 1000, 1e-4)]);
        let text = render_structured(&r).unwrap();
        let back: AnalysisReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
