//! compute → emit → count → stats → report.

use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constants::{constant_bits, ConstantId, DIGIT_GUARD_BITS};
use crate::counts::{count_slice, count_stream, CountError, DEFAULT_MAX_K};
use crate::hp::HpError;
use crate::radix::{emit_digits, RadixError};
use crate::report::{build_section, AnalysisReport, ReportError};
use crate::stats::DEFAULT_BINS;
use crate::stream::{open_stream_chunked, write_digits_to, ParseMode, StreamError, DEFAULT_CHUNK_SIZE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no bases requested")]
    NoBases,
    #[error("a digit file has exactly one base")]
    FileBaseCount,
    #[error(transparent)]
    Hp(#[from] HpError),
    #[error(transparent)]
    Radix(#[from] RadixError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipelineSource {
    /// Compute the constant and analyze its first `digits` fractional digits
    /// in every requested base.
    Constant { id: ConstantId, digits: usize },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub source: PipelineSource,
    pub bases: Vec<u32>,
    pub max_k: u32,
    pub bins: u32,
    pub workers: usize,
    pub chunk_size: usize,
    pub parse_mode: ParseMode,
}

impl PipelineConfig {
    pub fn for_constant(id: ConstantId, digits: usize, bases: Vec<u32>) -> Self {
        Self::with_source(PipelineSource::Constant { id, digits }, bases)
    }

    pub fn for_file(path: impl Into<PathBuf>, base: u32) -> Self {
        Self::with_source(PipelineSource::File { path: path.into() }, vec![base])
    }

    fn with_source(source: PipelineSource, bases: Vec<u32>) -> Self {
        PipelineConfig {
            source,
            bases,
            max_k: DEFAULT_MAX_K,
            bins: DEFAULT_BINS,
            workers: 1,
            chunk_size: DEFAULT_CHUNK_SIZE,
            parse_mode: ParseMode::Lenient,
        }
    }
}

/// Bits that cover `digits` fractional digits in every base listed.
pub fn bits_for_bases(digits: usize, bases: &[u32]) -> u32 {
    let widest = bases
        .iter()
        .map(|&b| (b as f64).log2())
        .fold(0.0, f64::max);
    (digits as f64 * widest).ceil() as u32 + DIGIT_GUARD_BITS
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<AnalysisReport, PipelineError> {
    if config.bases.is_empty() {
        return Err(PipelineError::NoBases);
    }
    match &config.source {
        PipelineSource::Constant { id, digits } => {
            // One binary value feeds every base.
            let value = constant_bits(*id, bits_for_bases(*digits, &config.bases))?;
            let mut report = AnalysisReport::new(id.name());
            for &base in &config.bases {
                let emitted = emit_digits(&value, base, *digits)?;
                let mut text = Vec::with_capacity(*digits + 8);
                write_digits_to(&emitted, &mut text, 0)?;
                let checksum = format!("{:x}", Sha256::digest(&text));
                let mut tables =
                    count_slice(emitted.fractional_digits(), base, config.max_k, config.workers)?;
                for t in &mut tables {
                    t.source_label = id.name().to_string();
                }
                report
                    .sections
                    .push(build_section(&tables, Some(checksum), config.bins)?);
            }
            Ok(report)
        }
        PipelineSource::File { path } => {
            let [base] = config.bases[..] else {
                return Err(PipelineError::FileBaseCount);
            };
            let label = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mut reader = open_stream_chunked(path, base, config.parse_mode, config.chunk_size)?;
            let tables = count_stream(reader.by_ref(), base, config.max_k, config.workers, &label)?;
            let mut report = AnalysisReport::new(label);
            report
                .sections
                .push(build_section(&tables, Some(reader.checksum()), config.bins)?);
            Ok(report)
        }
    }
}
