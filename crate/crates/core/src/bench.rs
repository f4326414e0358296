//! Gzip-only vs pipeline measurements and their reports.

use std::fmt::Write as _;
use std::time::Instant;

use crate::container::{compress_file, decompress_file_with, gzip_compress, CompressOptions};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "label",
    "original_bytes",
    "gzip_bytes",
    "pipeline_bytes",
    "improvement_pct",
    "gzip_seconds",
    "pipeline_seconds",
    "verified",
];

/// Relative reduction of the gzip-only size, in percent. Negative when the
/// pipeline output is larger.
pub fn improvement(gzip_size: u64, pipeline_size: u64) -> Result<f64> {
    if gzip_size == 0 {
        return Err(Error::UndefinedMetric("gzip-only size is zero".into()));
    }
    Ok(100.0 * (gzip_size as f64 - pipeline_size as f64) / gzip_size as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub label: String,
    pub original_bytes: u64,
    pub gzip_bytes: u64,
    pub pipeline_bytes: u64,
    pub improvement_pct: f64,
    pub gzip_seconds: f64,
    pub pipeline_seconds: f64,
    pub verified: bool,
}

impl BenchRecord {
    /// Builds a record from measured sizes; the improvement is derived.
    pub fn new(
        label: impl Into<String>,
        original_bytes: u64,
        gzip_bytes: u64,
        pipeline_bytes: u64,
        gzip_seconds: f64,
        pipeline_seconds: f64,
    ) -> Result<Self> {
        Ok(BenchRecord {
            label: label.into(),
            original_bytes,
            gzip_bytes,
            pipeline_bytes,
            improvement_pct: improvement(gzip_bytes, pipeline_bytes)?,
            gzip_seconds,
            pipeline_seconds,
            verified: true,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub label: String,
    pub data: Vec<u8>,
}

impl Dataset {
    pub fn new(label: impl Into<String>, data: Vec<u8>) -> Self {
        Dataset {
            label: label.into(),
            data,
        }
    }
}

/// One timed region, relative to the start of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Span {
    pub label: String,
    pub stage: &'static str,
    pub start_seconds: f64,
    pub end_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    /// Datasets that failed, with the reason; never reported as records.
    pub failures: Vec<(String, String)>,
    pub spans: Vec<Span>,
}

impl BenchOutcome {
    pub fn all_verified(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Measures each dataset in turn on the calling thread: gzip-only, then
/// the pipeline, then a roundtrip check of the pipeline output. Only the
/// compression calls are timed.
pub fn run_benchmark(datasets: &[Dataset], options: &CompressOptions) -> BenchOutcome {
    let origin = Instant::now();
    let mut outcome = BenchOutcome::default();
    let argv = options.predictor.external_argv();

    for ds in datasets {
        let mut timed = |stage: &'static str, f: &mut dyn FnMut() -> Result<Vec<u8>>| {
            let start = Instant::now();
            let out = f();
            let end = Instant::now();
            outcome.spans.push(Span {
                label: ds.label.clone(),
                stage,
                start_seconds: (start - origin).as_secs_f64(),
                end_seconds: (end - origin).as_secs_f64(),
            });
            out.map(|o| (o, (end - start).as_secs_f64()))
        };

        let result = (|| {
            let (gz, gzip_seconds) = timed("gzip", &mut || gzip_compress(&ds.data, options.level))?;
            let (art, pipeline_seconds) =
                timed("pipeline", &mut || compress_file(&ds.data, options))?;
            let restored = decompress_file_with(&art, argv)?;
            if restored != ds.data {
                return Err(Error::Integrity("roundtrip output differs from input".into()));
            }
            BenchRecord::new(
                ds.label.clone(),
                ds.data.len() as u64,
                gz.len() as u64,
                art.len() as u64,
                gzip_seconds,
                pipeline_seconds,
            )
        })();

        match result {
            Ok(r) => outcome.records.push(r),
            Err(e) => outcome.failures.push((ds.label.clone(), e.to_string())),
        }
    }
    outcome
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn render_report(records: &[BenchRecord], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Table => render_table(records).into_bytes(),
        ReportFormat::Csv => render_csv(records),
    }
}

fn render_table(records: &[BenchRecord]) -> String {
    let header = [
        "Dataset",
        "Original Size",
        "Gzip Size",
        "Pipeline Size",
        "Improvement",
        "Gzip Time (s)",
        "Pipeline Time (s)",
    ];
    let rows: Vec<[String; 7]> = records
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                format!("{} B", thousands(r.original_bytes)),
                format!("{} B", thousands(r.gzip_bytes)),
                format!("{} B", thousands(r.pipeline_bytes)),
                format!("~{:.2}%", r.improvement_pct),
                format!("{:.3}", r.gzip_seconds),
                format!("{:.3}", r.pipeline_seconds),
            ]
        })
        .collect();

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let rule: String = {
        let mut s = String::from("+");
        for w in &widths {
            s.push_str(&"-".repeat(w + 2));
            s.push('+');
        }
        s
    };
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::from("|");
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, " {cell:<w$} |");
            } else {
                let _ = write!(s, " {cell:>w$} |");
            }
        }
        s
    };

    let mut out = String::new();
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "{}", line(&mut header.iter().copied()));
    let _ = writeln!(out, "{rule}");
    for row in &rows {
        let _ = writeln!(out, "{}", line(&mut row.iter().map(String::as_str)));
    }
    let _ = writeln!(out, "{rule}");
    out
}

fn render_csv(records: &[BenchRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv write");
    for r in records {
        w.write_record([
            r.label.clone(),
            r.original_bytes.to_string(),
            r.gzip_bytes.to_string(),
            r.pipeline_bytes.to_string(),
            format!("{:.2}", r.improvement_pct),
            r.gzip_seconds.to_string(),
            r.pipeline_seconds.to_string(),
            r.verified.to_string(),
        ])
        .expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Reads a CSV report back. The improvement column is rounded in the
/// file, so it is recomputed from the sizes and checked against it.
pub fn parse_csv(data: &[u8]) -> Result<Vec<BenchRecord>> {
    let bad = |m: String| Error::Format(format!("csv report: {m}"));
    let mut reader = csv::Reader::from_reader(data);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad(format!("bad {}", CSV_HEADER[i])));
        let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(format!("bad {}", CSV_HEADER[i])));
        let mut record = BenchRecord::new(
            field(0),
            int(1)?,
            int(2)?,
            int(3)?,
            float(5)?,
            float(6)?,
        )?;
        record.verified = field(7)
            .parse()
            .map_err(|_| bad("bad verified flag".into()))?;
        if (record.improvement_pct - float(4)?).abs() > 0.005 + 1e-9 {
            return Err(bad(format!(
                "improvement {} inconsistent with sizes for {:?}",
                field(4),
                record.label
            )));
        }
        out.push(record);
    }
    Ok(out)
}
