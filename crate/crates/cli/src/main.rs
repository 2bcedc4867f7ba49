use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use normdigits::constants::{constant_bits, ConstantId};
use normdigits::counts::{
    count_naive, count_stream, read_counts, write_counts, CountsRecord, KGramCounts, MAX_K,
};
use normdigits::hp::HpError;
use normdigits::pipeline::bits_for_bases;
use normdigits::radix::{convert_base, emit_digits, DigitString, RadixError};
use normdigits::report::{
    build_section, render_histogram_csv, render_structured, render_table, AnalysisReport,
    TableFormat,
};
use normdigits::stats::DEFAULT_BINS;
use normdigits::stream::{
    open_stream, open_stream_chunked, read_all_digits, write_stream, ParseMode, DEFAULT_CHUNK_SIZE,
};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_PRECISION: u8 = 3;

#[derive(Parser)]
#[command(name = "normdigits", version, about = "Compute constants and test their digits for normality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a constant and write its digits.
    Compute {
        #[arg(long, value_parser = parse_constant)]
        constant: ConstantId,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        digits: u64,
        #[arg(long, value_parser = ["10", "16"])]
        base: String,
        #[arg(long)]
        out: PathBuf,
        /// Fractional digits per line; 0 writes a single line.
        #[arg(long, default_value_t = 0)]
        line_width: usize,
    },
    /// Count k-grams of a digit file for k = 1..=K.
    Count {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_base)]
        base: u32,
        #[arg(long, value_parser = parse_k)]
        max_k: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
        chunk_size: usize,
    },
    /// Turn counts into a variance report.
    Analyze {
        #[arg(long, num_args = 1.., required = true)]
        counts: Vec<PathBuf>,
        #[arg(long)]
        out_report: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_BINS, value_parser = clap::value_parser!(u32).range(2..))]
        bins: u32,
    },
    /// Cross-check the streaming counter against the naive one.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_base)]
        base: u32,
        #[arg(long, value_parser = parse_k)]
        max_k: u32,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long)]
        strict: bool,
    },
    /// Re-express a digit file in another base.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_base)]
        from_base: u32,
        #[arg(long, value_parser = parse_base)]
        to_base: u32,
        #[arg(long)]
        digits: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        line_width: usize,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
    Structured,
}

fn parse_constant(s: &str) -> Result<ConstantId, String> {
    s.parse()
}

fn parse_base(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(b) if (2..=36).contains(&b) => Ok(b),
        _ => Err(format!("base must be an integer in 2..=36, got '{s}'")),
    }
}

fn parse_k(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(k) if (1..=MAX_K).contains(&k) => Ok(k),
        _ => Err(format!("k must be an integer in 1..={MAX_K}, got '{s}'")),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn mode(strict: bool) -> ParseMode {
    if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

fn compute(id: ConstantId, digits: u64, base: u32, out: &Path, line_width: usize) -> anyhow::Result<()> {
    let digits = usize::try_from(digits).context("digit count too large")?;
    let value = constant_bits(id, bits_for_bases(digits, &[base]))?;
    let text = emit_digits(&value, base, digits)?;
    write_stream(&text, out, line_width).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("{id}: {digits} base-{base} digits written to {}", out.display());
    Ok(())
}

fn count(
    input: &Path,
    base: u32,
    max_k: u32,
    out: &Path,
    workers: usize,
    parse_mode: ParseMode,
    chunk_size: usize,
) -> anyhow::Result<()> {
    let label = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut reader = open_stream_chunked(input, base, parse_mode, chunk_size)
        .with_context(|| format!("opening {}", input.display()))?;
    let tables = count_stream(reader.by_ref(), base, max_k, workers, &label)?;
    let checksum = reader.checksum();
    let n = tables[0].total_positions;
    let records: Vec<CountsRecord> = tables
        .into_iter()
        .map(|table| CountsRecord {
            table,
            input_checksum: Some(checksum.clone()),
        })
        .collect();
    write_counts(out, &records).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("{label}: {n} digits, k = 1..={max_k}, counts written to {}", out.display());
    Ok(())
}

fn analyze(counts: &[PathBuf], out: &Path, format: Format, bins: u32) -> anyhow::Result<()> {
    // Sections keyed by (source, base, checksum), in first-seen order.
    let mut order: Vec<(String, u32, Option<String>)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<KGramCounts>> = BTreeMap::new();
    for path in counts {
        for record in read_counts(path).with_context(|| format!("reading {}", path.display()))? {
            let key = (
                record.table.source_label.clone(),
                record.table.base,
                record.input_checksum.clone(),
            );
            let slot = match order.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    order.push(key);
                    order.len() - 1
                }
            };
            let group = groups.entry(slot).or_default();
            if group.iter().any(|t| t.k == record.table.k) {
                bail!(
                    "duplicate k = {} for {} in base {}",
                    record.table.k,
                    record.table.source_label,
                    record.table.base
                );
            }
            group.push(record.table);
        }
    }
    let mut labels: Vec<&str> = Vec::new();
    for (label, _, _) in &order {
        if !labels.contains(&label.as_str()) {
            labels.push(label);
        }
    }
    let mut report = AnalysisReport::new(labels.join(","));
    for (slot, tables) in &groups {
        report
            .sections
            .push(build_section(tables, order[*slot].2.clone(), bins)?);
    }
    let text = match format {
        Format::Csv => render_table(&report, TableFormat::Csv)?,
        Format::Markdown => render_table(&report, TableFormat::Markdown)?,
        Format::Structured => render_structured(&report)?,
    };
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    if !matches!(format, Format::Structured) {
        for (i, section) in report.sections.iter().enumerate() {
            for h in &section.histograms {
                let path = histogram_path(out, i, report.sections.len(), h.base, h.k);
                fs::write(&path, render_histogram_csv(h))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    eprintln!("{} rows written to {}", report.rows().count(), out.display());
    Ok(())
}

/// `<report stem>.b<base>-k<k>.hist.csv` next to the report, with a section
/// index when several sources share a base.
fn histogram_path(report: &Path, section: usize, sections: usize, base: u32, k: u32) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    let tag = if sections > 1 {
        format!("{stem}.s{section}.b{base}-k{k}.hist.csv")
    } else {
        format!("{stem}.b{base}-k{k}.hist.csv")
    };
    report.with_file_name(tag)
}

fn verify(input: &Path, base: u32, max_k: u32, workers: usize, parse_mode: ParseMode) -> anyhow::Result<bool> {
    let mut reader = open_stream(input, base, parse_mode)
        .with_context(|| format!("opening {}", input.display()))?;
    let digits = read_all_digits(&mut reader)?;
    let reader = open_stream(input, base, parse_mode)?;
    let fast = count_stream(reader, base, max_k, workers, "")?;
    let mut all_match = true;
    for table in &fast {
        let naive = count_naive(&digits, base, table.k)?;
        let same = naive.counts == table.counts && naive.total_positions == table.total_positions;
        println!(
            "k={} positions={} {}",
            table.k,
            table.total_positions,
            if same { "match" } else { "MISMATCH" }
        );
        all_match &= same;
    }
    Ok(all_match)
}

fn convert(
    input: &Path,
    from_base: u32,
    to_base: u32,
    digits: usize,
    out: &Path,
    line_width: usize,
    parse_mode: ParseMode,
) -> anyhow::Result<()> {
    let mut reader = open_stream(input, from_base, parse_mode)
        .with_context(|| format!("opening {}", input.display()))?;
    let fraction = read_all_digits(&mut reader)?;
    let source = DigitString::new(from_base, reader.integer_part().to_vec(), fraction)?;
    let converted = convert_base(&source, to_base, digits)?;
    write_stream(&converted, out, line_width).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("{digits} base-{to_base} digits written to {}", out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(
            RadixError::InsufficientPrecision(_) | RadixError::InsufficientSourceDigits { .. },
        ) = cause.downcast_ref::<RadixError>()
        {
            return EXIT_PRECISION;
        }
        if let Some(HpError::Verification(_)) = cause.downcast_ref::<HpError>() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_VALIDATION
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Compute { constant, digits, base, out, line_width } => {
            compute(constant, digits, base.parse()?, &out, line_width)?;
        }
        Command::Count { input, base, max_k, out, workers, strict, chunk_size } => {
            count(&input, base, max_k, &out, workers, mode(strict), chunk_size)?;
        }
        Command::Analyze { counts, out_report, format, bins } => {
            analyze(&counts, &out_report, format, bins)?;
        }
        Command::Verify { input, base, max_k, workers, strict } => {
            return verify(&input, base, max_k, workers, mode(strict));
        }
        Command::Convert { input, from_base, to_base, digits, out, line_width, strict } => {
            convert(&input, from_base, to_base, digits, &out, line_width, mode(strict))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: counters disagree");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
