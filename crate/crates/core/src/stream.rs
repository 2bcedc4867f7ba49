//! Digit files: `[integer digits][.]fractional digits`.
//!
//! Only fractional digits are delivered. Everything before the first `.` is
//! the integer part and is skipped. A file with no `.` in its first
//! [`RADIX_LOOKAHEAD`] digits is taken to hold fractional digits only, and a
//! `.` appearing after that point is an error.
//!
//! LENIENT mode ignores space, tab, CR and LF anywhere. STRICT mode accepts
//! nothing but digits and the single radix point.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::radix::{digit_char, DigitString, MAX_BASE, MIN_BASE};

pub const DEFAULT_CHUNK_SIZE: usize = 1 << 20;

/// Digits buffered while looking for the radix point.
pub const RADIX_LOOKAHEAD: usize = 1 << 20;

const READ_BLOCK: usize = 1 << 20;
const BOUNDARY_DIGITS: usize = 32;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("base {0} outside 2..=36")]
    BaseOutOfRange(u32),
    #[error("invalid byte 0x{byte:02x} at offset {offset}")]
    InvalidCharacter { byte: u8, offset: u64 },
    #[error("unexpected radix point at offset {offset}")]
    UnexpectedRadixPoint { offset: u64 },
    #[error("digit '{character}' at offset {offset} is not valid in base {base}")]
    DigitOutOfRange {
        character: char,
        offset: u64,
        base: u32,
    },
    #[error("digit count mismatch: declared {declared}, found {actual}")]
    CountMismatch { declared: u64, actual: u64 },
}

pub type Result<T> = std::result::Result<T, StreamError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitStreamHeader {
    pub base: u32,
    pub declared_fractional_count: Option<u64>,
    pub source_label: String,
    pub parse_mode: ParseMode,
}

impl DigitStreamHeader {
    pub fn new(base: u32, source_label: impl Into<String>) -> Self {
        DigitStreamHeader {
            base,
            declared_fractional_count: None,
            source_label: source_label.into(),
            parse_mode: ParseMode::default(),
        }
    }
}

/// A contiguous block of fractional digit values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitChunk {
    pub digits: Vec<u8>,
    /// Index of the first digit; 0 is the first digit after the radix point.
    pub offset: u64,
}

const CLASS_SPACE: u8 = 0xFE;
const CLASS_POINT: u8 = 0xFD;
const CLASS_INVALID: u8 = 0xFF;

fn byte_classes() -> [u8; 256] {
    let mut table = [CLASS_INVALID; 256];
    for (i, slot) in table.iter_mut().enumerate() {
        let b = i as u8;
        *slot = match b {
            b'0'..=b'9' => b - b'0',
            b'a'..=b'z' => b - b'a' + 10,
            b'A'..=b'Z' => b - b'A' + 10,
            b' ' | b'\t' | b'\r' | b'\n' => CLASS_SPACE,
            b'.' => CLASS_POINT,
            _ => CLASS_INVALID,
        };
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// No radix point seen yet; digits so far may be the integer part.
    Leading,
    /// After the radix point.
    Fraction,
    /// No radix point within the lookahead: everything is fractional and a
    /// later point is an error.
    FractionOnly,
}

/// Iterator over the fractional digits of a digit file, in chunks.
pub struct DigitReader<R> {
    inner: R,
    base: u32,
    mode: ParseMode,
    chunk_size: usize,
    classes: [u8; 256],
    phase: Phase,
    raw: Vec<u8>,
    /// Digits decoded but not yet handed out.
    pending: Vec<u8>,
    integer_part: Vec<u8>,
    next_offset: u64,
    byte_offset: u64,
    hasher: Sha256,
    eof: bool,
    failed: bool,
}

impl<R: Read> DigitReader<R> {
    pub fn new(inner: R, base: u32, mode: ParseMode, chunk_size: usize) -> Result<Self> {
        if !(MIN_BASE..=MAX_BASE).contains(&base) {
            return Err(StreamError::BaseOutOfRange(base));
        }
        Ok(DigitReader {
            inner,
            base,
            mode,
            chunk_size: chunk_size.max(1),
            classes: byte_classes(),
            phase: Phase::Leading,
            raw: vec![0; READ_BLOCK],
            pending: Vec::new(),
            integer_part: Vec::new(),
            next_offset: 0,
            byte_offset: 0,
            hasher: Sha256::new(),
            eof: false,
            failed: false,
        })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// Integer-part digits skipped so far (empty for fraction-only files).
    pub fn integer_part(&self) -> &[u8] {
        &self.integer_part
    }

    /// Fractional digits delivered so far.
    pub fn digits_delivered(&self) -> u64 {
        self.next_offset
    }

    /// SHA-256 of every byte read so far, hex encoded. After the iterator is
    /// exhausted this is the checksum of the whole input.
    pub fn checksum(&self) -> String {
        format!("{:x}", self.hasher.clone().finalize())
    }

    fn decode_block(&mut self, len: usize) -> Result<()> {
        let lenient = self.mode == ParseMode::Lenient;
        for i in 0..len {
            let byte = self.raw[i];
            let class = self.classes[byte as usize];
            let offset = self.byte_offset + i as u64;
            if (class as u32) < self.base {
                self.pending.push(class);
                if self.phase == Phase::Leading && self.pending.len() >= RADIX_LOOKAHEAD {
                    self.phase = Phase::FractionOnly;
                }
                continue;
            }
            match class {
                CLASS_SPACE if lenient => {}
                CLASS_POINT if self.phase == Phase::Leading => {
                    self.integer_part = std::mem::take(&mut self.pending);
                    self.phase = Phase::Fraction;
                }
                CLASS_POINT => return Err(StreamError::UnexpectedRadixPoint { offset }),
                c if c < 36 => {
                    return Err(StreamError::DigitOutOfRange {
                        character: byte as char,
                        offset,
                        base: self.base,
                    })
                }
                _ => return Err(StreamError::InvalidCharacter { byte, offset }),
            }
        }
        self.byte_offset += len as u64;
        Ok(())
    }

    fn fill(&mut self) -> Result<()> {
        while !self.eof && (self.phase == Phase::Leading || self.pending.len() < self.chunk_size) {
            let n = match self.inner.read(&mut self.raw) {
                Ok(0) => {
                    self.eof = true;
                    if self.phase == Phase::Leading {
                        self.phase = Phase::FractionOnly;
                    }
                    break;
                }
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            self.hasher.update(&self.raw[..n]);
            self.decode_block(n)?;
        }
        Ok(())
    }

    fn next_chunk(&mut self) -> Result<Option<DigitChunk>> {
        self.fill()?;
        if self.pending.is_empty() {
            return Ok(None);
        }
        let take = self.pending.len().min(self.chunk_size);
        let digits = if take == self.pending.len() {
            std::mem::take(&mut self.pending)
        } else {
            let rest = self.pending.split_off(take);
            std::mem::replace(&mut self.pending, rest)
        };
        let chunk = DigitChunk {
            offset: self.next_offset,
            digits,
        };
        self.next_offset += take as u64;
        Ok(Some(chunk))
    }
}

impl<R: Read> Iterator for DigitReader<R> {
    type Item = Result<DigitChunk>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_chunk() {
            Ok(Some(chunk)) => Some(Ok(chunk)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

pub fn open_stream(path: &Path, base: u32, mode: ParseMode) -> Result<DigitReader<File>> {
    open_stream_chunked(path, base, mode, DEFAULT_CHUNK_SIZE)
}

pub fn open_stream_chunked(
    path: &Path,
    base: u32,
    mode: ParseMode,
    chunk_size: usize,
) -> Result<DigitReader<File>> {
    DigitReader::new(File::open(path)?, base, mode, chunk_size)
}

/// Collects every fractional digit of a reader into memory.
pub fn read_all_digits<R: Read>(reader: &mut DigitReader<R>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for chunk in reader.by_ref() {
        out.extend_from_slice(&chunk?.digits);
    }
    Ok(out)
}

/// Writes `<int>.<frac>`, breaking the fractional digits into lines of
/// `line_width` (0 = a single line). No trailing newline. Returns the number
/// of fractional digits written.
pub fn write_digits_to<W: Write>(digits: &DigitString, out: W, line_width: usize) -> Result<u64> {
    let mut out = BufWriter::new(out);
    out.write_all(digits.integer_text().as_bytes())?;
    out.write_all(b".")?;
    let text: Vec<u8> = digits
        .fractional_digits()
        .iter()
        .map(|&d| digit_char(d) as u8)
        .collect();
    if line_width == 0 {
        out.write_all(&text)?;
    } else {
        for (i, line) in text.chunks(line_width).enumerate() {
            if i > 0 {
                out.write_all(b"\n")?;
            }
            out.write_all(line)?;
        }
    }
    out.flush()?;
    Ok(text.len() as u64)
}

pub fn write_stream(digits: &DigitString, path: &Path, line_width: usize) -> Result<u64> {
    write_digits_to(digits, File::create(path)?, line_width)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub digit_count: u64,
    pub integer_part: String,
    pub first_digits: String,
    pub last_digits: String,
    pub checksum: String,
}

/// Reads the whole stream, checks the declared count and reports the boundary
/// digits for comparison against published values.
pub fn validate_reader<R: Read>(
    reader: &mut DigitReader<R>,
    header: &DigitStreamHeader,
) -> Result<ValidationReport> {
    let mut first = String::new();
    let mut last: Vec<u8> = Vec::with_capacity(2 * BOUNDARY_DIGITS);
    for chunk in reader.by_ref() {
        let chunk = chunk?;
        if first.len() < BOUNDARY_DIGITS {
            let need = BOUNDARY_DIGITS - first.len();
            first.extend(chunk.digits.iter().take(need).map(|&d| digit_char(d)));
        }
        let tail_start = chunk.digits.len().saturating_sub(BOUNDARY_DIGITS);
        last.extend_from_slice(&chunk.digits[tail_start..]);
        if last.len() > BOUNDARY_DIGITS {
            last.drain(..last.len() - BOUNDARY_DIGITS);
        }
    }
    let digit_count = reader.digits_delivered();
    if let Some(declared) = header.declared_fractional_count {
        if declared != digit_count {
            return Err(StreamError::CountMismatch {
                declared,
                actual: digit_count,
            });
        }
    }
    Ok(ValidationReport {
        digit_count,
        integer_part: reader.integer_part().iter().map(|&d| digit_char(d)).collect(),
        first_digits: first,
        last_digits: last.iter().map(|&d| digit_char(d)).collect(),
        checksum: reader.checksum(),
    })
}

pub fn validate_stream(path: &Path, header: &DigitStreamHeader) -> Result<ValidationReport> {
    let mut reader = open_stream(path, header.base, header.parse_mode)?;
    validate_reader(&mut reader, header)
}
