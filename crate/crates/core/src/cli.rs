//! `gpz` command line.
//!
//! Exit status: 0 on success, 1 when an operation fails (format, integrity,
//! I/O, failed benchmark roundtrip), 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::bench::{render_report, run_benchmark, Dataset, ReportFormat};
use crate::container::{
    compress_file, decompress_file_with, CompressOptions, PredictorChoice, TokenizerChoice,
    DEFAULT_LEVEL,
};
use crate::corpusgen::{generate_logs, repeat_to_size, LogGenSpec};
use crate::error::{Error, Result};
use crate::external::split_command;
use crate::predictor::DEFAULT_ORDER;

#[derive(Debug, Parser)]
#[command(
    name = "gpz",
    version,
    about = "Predictive rank-coding preprocessor + gzip, with a log benchmark harness"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a file into a .gpz container.
    Compress(CompressArgs),
    /// Restore the original bytes from a .gpz container.
    Decompress(DecompressArgs),
    /// Generate a synthetic structured log corpus.
    GenLogs(GenLogsArgs),
    /// Repeat a block whole until it reaches a target size.
    Repeat(RepeatArgs),
    /// Compare gzip alone against the pipeline.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PredictorArg {
    Builtin,
    External,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Context order of the builtin predictor (0-8).
    #[arg(short = 'k', long = "order", default_value_t = DEFAULT_ORDER,
          value_parser = clap::value_parser!(u8).range(0..=8))]
    order: u8,
    /// Train a BPE vocabulary of this many tokens instead of byte-level tokens.
    #[arg(long, value_name = "SIZE", value_parser = clap::value_parser!(u32).range(256..=65536))]
    bpe: Option<u32>,
    /// Gzip compression level.
    #[arg(long, env = "GPZ_LEVEL", default_value_t = DEFAULT_LEVEL,
          value_parser = clap::value_parser!(u32).range(1..=9))]
    level: u32,
    #[arg(long, value_enum, default_value_t = PredictorArg::Builtin)]
    predictor: PredictorArg,
    /// Command line launching an external predictor plugin.
    #[arg(long = "predictor-cmd", value_name = "CMD")]
    predictor_cmd: Option<String>,
    /// Put the long-range match model in front of the builtin predictor.
    #[arg(long = "match")]
    match_model: bool,
}

impl PipelineArgs {
    fn options(&self) -> std::result::Result<CompressOptions, String> {
        let predictor = match (self.predictor, &self.predictor_cmd) {
            (PredictorArg::External, None) => {
                return Err("--predictor external requires --predictor-cmd".into())
            }
            (PredictorArg::External, Some(_)) if self.match_model => {
                return Err("--match only applies to the builtin predictor".into())
            }
            (PredictorArg::External, Some(cmd)) => PredictorChoice::External {
                argv: split_command(cmd).map_err(|e| e.to_string())?,
            },
            (PredictorArg::Builtin, Some(_)) => {
                return Err("--predictor-cmd requires --predictor external".into())
            }
            (PredictorArg::Builtin, None) if self.match_model => {
                PredictorChoice::ContextMatch { order: self.order }
            }
            (PredictorArg::Builtin, None) => PredictorChoice::Builtin { order: self.order },
        };
        Ok(CompressOptions {
            tokenizer: self.bpe.map_or(TokenizerChoice::ByteLevel, TokenizerChoice::Bpe),
            predictor,
            level: self.level,
        })
    }
}

#[derive(Debug, Args)]
struct CompressArgs {
    /// Input file, `-` for stdin.
    #[arg(short, long, default_value = "-")]
    input: PathBuf,
    /// Output file, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct DecompressArgs {
    #[arg(short, long, default_value = "-")]
    input: PathBuf,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Predictor plugin command, needed for containers made with one.
    #[arg(long = "predictor-cmd", value_name = "CMD")]
    predictor_cmd: Option<String>,
}

#[derive(Debug, Args)]
struct GenSpecArgs {
    /// key = value spec file layered over the built-in defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lines: Option<usize>,
    /// Comma-separated level pool.
    #[arg(long)]
    levels: Option<String>,
    /// Comma-separated component pool.
    #[arg(long)]
    components: Option<String>,
    /// Message template; repeat to build the pool.
    #[arg(long = "template")]
    templates: Vec<String>,
    /// First timestamp, `YYYY-MM-DD HH:MM:SS`.
    #[arg(long)]
    start: Option<String>,
    /// Seconds between consecutive lines.
    #[arg(long)]
    step: Option<i64>,
}

impl GenSpecArgs {
    fn spec(&self) -> Result<LogGenSpec> {
        let mut spec = LogGenSpec::default();
        if let Some(path) = &self.config {
            spec.merge(&fs::read_to_string(path)?)?;
        }
        let mut overlay = String::new();
        let mut add = |k: &str, v: &dyn std::fmt::Display| overlay.push_str(&format!("{k} = {v}\n"));
        if let Some(v) = self.seed {
            add("seed", &v);
        }
        if let Some(v) = self.lines {
            add("lines", &v);
        }
        if let Some(v) = &self.levels {
            add("levels", v);
        }
        if let Some(v) = &self.components {
            add("components", v);
        }
        if let Some(v) = &self.start {
            add("start", v);
        }
        if let Some(v) = self.step {
            add("step", &v);
        }
        for t in &self.templates {
            add("template", t);
        }
        spec.merge(&overlay)?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct GenLogsArgs {
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    #[command(flatten)]
    spec: GenSpecArgs,
}

#[derive(Debug, Args)]
struct RepeatArgs {
    #[arg(short, long, default_value = "-")]
    input: PathBuf,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Minimum output size: bytes, or with K/M/G (binary) or KB/MB/GB (decimal).
    #[arg(long, value_parser = parse_size)]
    target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// External files to benchmark, labelled by file name.
    files: Vec<PathBuf>,
    /// Also benchmark a generated log corpus of this many lines.
    #[arg(long = "gen-lines")]
    gen_lines: Option<usize>,
    /// Also benchmark the generated corpus repeated whole to this size.
    #[arg(long = "repeat-to", value_parser = parse_size, requires = "gen_lines")]
    repeat_to: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Report destination, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    spec: GenSpecArgs,
}

fn parse_size(s: &str) -> std::result::Result<usize, String> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (digits, unit) = s.split_at(split);
    let n: usize = digits.parse().map_err(|_| format!("bad size {s:?}"))?;
    let mult: usize = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kib" => 1 << 10,
        "m" | "mib" => 1 << 20,
        "g" | "gib" => 1 << 30,
        "kb" => 1_000,
        "mb" => 1_000_000,
        "gb" => 1_000_000_000,
        _ => return Err(format!("unknown size unit in {s:?}")),
    };
    n.checked_mul(mult)
        .filter(|&v| v > 0)
        .ok_or_else(|| format!("size {s:?} must be positive and fit in memory"))
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    if is_stdio(path) {
        let mut buf = Vec::new();
        io::stdin().lock().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        Ok(fs::read(path)?)
    }
}

/// Writes via a temporary file in the destination directory and renames it
/// into place, so a failed run never leaves a partial file behind.
fn write_output(path: &Path, data: &[u8]) -> Result<()> {
    if is_stdio(path) {
        let mut out = io::stdout().lock();
        out.write_all(data)?;
        return Ok(out.flush()?);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(data)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn ratio_summary(verb: &str, from: usize, to: usize) -> String {
    let ratio = if from == 0 { 0.0 } else { to as f64 / from as f64 };
    format!("{verb} {from} B -> {to} B (ratio {ratio:.4})")
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let usage_error = |msg: String| {
        let _ = Cli::command().error(ErrorKind::ArgumentConflict, msg).print();
        2
    };

    let (stage, result) = match cli.command {
        Command::Compress(args) => match args.pipeline.options() {
            Ok(opts) => ("compress", compress_cmd(&args, &opts)),
            Err(msg) => return usage_error(msg),
        },
        Command::Decompress(args) => ("decompress", decompress_cmd(&args)),
        Command::GenLogs(args) => ("gen-logs", gen_logs_cmd(&args)),
        Command::Repeat(args) => ("repeat", repeat_cmd(&args)),
        Command::Bench(args) => match args.pipeline.options() {
            Ok(opts) => {
                if args.files.is_empty() && args.gen_lines.is_none() {
                    return usage_error("bench needs input files or --gen-lines".into());
                }
                ("bench", bench_cmd(&args, &opts))
            }
            Err(msg) => return usage_error(msg),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gpz: {stage} failed: {e}");
            1
        }
    }
}

fn compress_cmd(args: &CompressArgs, opts: &CompressOptions) -> Result<()> {
    let input = read_input(&args.input)?;
    let artifact = compress_file(&input, opts)?;
    write_output(&args.output, &artifact)?;
    eprintln!("{}", ratio_summary("compressed", input.len(), artifact.len()));
    Ok(())
}

fn decompress_cmd(args: &DecompressArgs) -> Result<()> {
    let artifact = read_input(&args.input)?;
    let argv = args.predictor_cmd.as_deref().map(split_command).transpose()?;
    let output = decompress_file_with(&artifact, argv.as_deref())?;
    write_output(&args.output, &output)?;
    eprintln!("{}", ratio_summary("restored", artifact.len(), output.len()));
    Ok(())
}

fn gen_logs_cmd(args: &GenLogsArgs) -> Result<()> {
    let spec = args.spec.spec()?;
    let logs = generate_logs(&spec)?;
    write_output(&args.output, &logs)?;
    eprintln!("generated {} lines, {} B", spec.line_count, logs.len());
    Ok(())
}

fn repeat_cmd(args: &RepeatArgs) -> Result<()> {
    let block = read_input(&args.input)?;
    let out = repeat_to_size(&block, args.target)?;
    write_output(&args.output, &out)?;
    eprintln!(
        "repeated {} B block x{} -> {} B",
        block.len(),
        out.len() / block.len(),
        out.len()
    );
    Ok(())
}

fn bench_cmd(args: &BenchArgs, opts: &CompressOptions) -> Result<()> {
    let mut datasets = Vec::new();
    if let Some(lines) = args.gen_lines {
        let mut spec = args.spec.spec()?;
        spec.line_count = lines;
        let logs = generate_logs(&spec)?;
        if let Some(target) = args.repeat_to {
            if logs.is_empty() {
                return Err(Error::Config("cannot repeat an empty generated corpus".into()));
            }
            let big = repeat_to_size(&logs, target)?;
            datasets.push(Dataset::new(format!("synthetic-{lines}-lines"), logs));
            datasets.push(Dataset::new(format!("repeated-{}", big.len()), big));
        } else {
            datasets.push(Dataset::new(format!("synthetic-{lines}-lines"), logs));
        }
    }
    for path in &args.files {
        let label = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        datasets.push(Dataset::new(label, fs::read(path)?));
    }

    let outcome = run_benchmark(&datasets, opts);
    let format = match args.format {
        FormatArg::Table => ReportFormat::Table,
        FormatArg::Csv => ReportFormat::Csv,
    };
    write_output(&args.output, &render_report(&outcome.records, format))?;
    for (label, why) in &outcome.failures {
        eprintln!("gpz: bench: {label}: {why}");
    }
    if !outcome.all_verified() {
        return Err(Error::Integrity(format!(
            "{} of {} datasets failed roundtrip verification",
            outcome.failures.len(),
            datasets.len()
        )));
    }
    Ok(())
}
