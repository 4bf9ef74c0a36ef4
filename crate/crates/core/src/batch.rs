//! Manifest-driven batch evaluation and cross-scan aggregation.
//!
//! Scans run concurrently on a dedicated thread pool; results keep
//! manifest order and the aggregate is a sequential fold in `scan_id`
//! order, so the written outputs do not depend on the thread count.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lesion::EvalConfig;
use crate::report::{evaluate_scan, format_metric, metric_repr, to_json, write_csv, CsvTable, ScanReport};

const REQUIRED_COLUMNS: [&str; 3] = ["scan_id", "pred_path", "gt_path"];
const THRESHOLD_COLUMN: &str = "prob_threshold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub scan_id: String,
    pub pred_path: PathBuf,
    pub gt_path: PathBuf,
    /// Per-scan override of the configured probability threshold.
    pub prob_threshold: Option<f64>,
}

/// Rows of `scan_id,pred_path,gt_path[,prob_threshold]` with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchManifest {
    rows: Vec<ManifestRow>,
}

impl BatchManifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if r.scan_id.is_empty() {
                return Err(Error::Manifest("empty scan_id".into()));
            }
            if !seen.insert(r.scan_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate scan_id `{}`", r.scan_id)));
            }
            if let Some(t) = r.prob_threshold {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Manifest(format!(
                        "scan `{}`: prob_threshold must lie in [0, 1], got {t}",
                        r.scan_id
                    )));
                }
            }
        }
        Ok(BatchManifest { rows })
    }

    /// Reads a manifest file; relative paths are resolved against the
    /// manifest's own directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Manifest(format!("{} is not UTF-8", path.display())),
            _ => Error::Manifest(format!("cannot read {}: {e}", path.display())),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .quoting(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Manifest(format!("unreadable header: {e}")))?
            .clone();
        let names: Vec<&str> = header.iter().collect();
        let with_threshold = match names.as_slice() {
            [a, b, c] if [*a, *b, *c] == REQUIRED_COLUMNS => false,
            [a, b, c, d] if [*a, *b, *c] == REQUIRED_COLUMNS && *d == THRESHOLD_COLUMN => true,
            _ => {
                return Err(Error::Manifest(format!(
                    "header must be `scan_id,pred_path,gt_path[,prob_threshold]`, found `{}`",
                    names.join(",")
                )))
            }
        };

        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::Manifest(format!(
                    "line {}: expected {expected_len} fields, found {len} (paths containing commas are not supported)",
                    pos.as_ref().map_or(0, |p| p.line())
                )),
                _ => Error::Manifest(e.to_string()),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.iter().any(|f| f.starts_with('"')) {
                return Err(Error::Manifest(format!("line {line}: quoted fields are not supported")));
            }
            if record.iter().take(3).any(str::is_empty) {
                return Err(Error::Manifest(format!("line {line}: scan_id, pred_path and gt_path are required")));
            }
            let prob_threshold = match record.get(3) {
                Some(cell) if with_threshold && !cell.is_empty() => Some(
                    cell.parse::<f64>()
                        .map_err(|_| Error::Manifest(format!("line {line}: bad prob_threshold `{cell}`")))?,
                ),
                _ => None,
            };
            rows.push(ManifestRow {
                scan_id: record[0].to_owned(),
                pred_path: resolve(&record[1]),
                gt_path: resolve(&record[2]),
                prob_threshold,
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanError {
    pub scan_id: String,
    pub message: String,
}

/// Mean of one metric across scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Unweighted mean over the scans where the metric is defined;
    /// infinite if any of them is infinite; null if none is defined.
    #[serde(with = "metric_repr")]
    pub mean: Option<f64>,
    pub included: usize,
    /// Scans where the metric was undefined (left out of the mean).
    pub excluded_undefined: usize,
    /// Scans whose infinite value made the mean infinite.
    pub infinite_scans: Vec<String>,
}

impl MetricSummary {
    /// `values` must already be in the order the fold should use.
    pub fn from_values<'a>(values: impl IntoIterator<Item = (&'a str, Option<f64>)>) -> Self {
        let mut sum = 0.0;
        let mut included = 0;
        let mut excluded_undefined = 0;
        let mut infinite_scans = Vec::new();
        for (id, v) in values {
            match v {
                None => excluded_undefined += 1,
                Some(x) => {
                    included += 1;
                    if x.is_infinite() {
                        infinite_scans.push(id.to_owned());
                    } else {
                        sum += x;
                    }
                }
            }
        }
        let mean = match included {
            0 => None,
            _ if !infinite_scans.is_empty() => Some(f64::INFINITY),
            n => Some(sum / n as f64),
        };
        MetricSummary {
            mean,
            included,
            excluded_undefined,
            infinite_scans,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_scans: usize,
    pub n_failed: usize,
    pub tp: MetricSummary,
    pub fp: MetricSummary,
    #[serde(rename = "fn")]
    pub fn_: MetricSummary,
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub dice: MetricSummary,
    pub lesion_wise_dice: MetricSummary,
    pub hd95_mm: MetricSummary,
    pub lesion_wise_hd95_mm: MetricSummary,
}

impl AggregateReport {
    pub fn from_reports(reports: &[ScanReport], n_failed: usize) -> Self {
        let mut sorted: Vec<&ScanReport> = reports.iter().collect();
        sorted.sort_by(|a, b| a.scan_id.cmp(&b.scan_id));
        let summary = |f: &dyn Fn(&ScanReport) -> Option<f64>| {
            MetricSummary::from_values(sorted.iter().map(|r| (r.scan_id.as_str(), f(r))))
        };
        AggregateReport {
            n_scans: reports.len() + n_failed,
            n_failed,
            tp: summary(&|r| Some(r.metrics.counts.tp as f64)),
            fp: summary(&|r| Some(r.metrics.counts.fp as f64)),
            fn_: summary(&|r| Some(r.metrics.counts.fn_ as f64)),
            sensitivity: summary(&|r| r.metrics.sensitivity),
            specificity: summary(&|r| r.metrics.specificity),
            dice: summary(&|r| r.metrics.dice),
            lesion_wise_dice: summary(&|r| r.metrics.lesion_wise_dice),
            hd95_mm: summary(&|r| r.metrics.hd95_mm),
            lesion_wise_hd95_mm: summary(&|r| r.metrics.lesion_wise_hd95_mm),
        }
    }

    /// `(name, summary)` in the fixed column order of the CSV output.
    pub fn entries(&self) -> [(&'static str, &MetricSummary); 9] {
        [
            ("tp", &self.tp),
            ("fp", &self.fp),
            ("fn", &self.fn_),
            ("sensitivity", &self.sensitivity),
            ("specificity", &self.specificity),
            ("dice", &self.dice),
            ("lesion_wise_dice", &self.lesion_wise_dice),
            ("hd95_mm", &self.hd95_mm),
            ("lesion_wise_hd95_mm", &self.lesion_wise_hd95_mm),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    /// Successful scans, in manifest order.
    pub reports: Vec<ScanReport>,
    /// Failed scans, in manifest order.
    pub errors: Vec<ScanError>,
    pub aggregate: AggregateReport,
}

impl BatchReport {
    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }
}

/// Evaluate every manifest row with at most `jobs` worker threads.
///
/// Per-scan failures are collected into [`BatchReport::errors`]; only an
/// invalid configuration or thread count fails the whole batch.
pub fn evaluate_batch(manifest: &BatchManifest, cfg: &EvalConfig, jobs: usize) -> Result<BatchReport> {
    cfg.validate()?;
    if jobs == 0 {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let outcomes: Vec<Result<ScanReport>> = pool.install(|| {
        manifest
            .rows()
            .par_iter()
            .with_max_len(1)
            .map(|row| {
                let cfg = EvalConfig {
                    prob_threshold: row.prob_threshold.unwrap_or(cfg.prob_threshold),
                    ..cfg.clone()
                };
                evaluate_scan(&row.scan_id, &row.pred_path, &row.gt_path, None, &cfg)
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (row, outcome) in manifest.rows().iter().zip(outcomes) {
        match outcome {
            Ok(r) => reports.push(r),
            Err(e) => errors.push(ScanError {
                scan_id: row.scan_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    let aggregate = AggregateReport::from_reports(&reports, errors.len());
    Ok(BatchReport {
        reports,
        errors,
        aggregate,
    })
}

/// `metric,mean,included,excluded_undefined,infinite_scans` with the
/// infinite scan ids joined by `;`.
pub fn aggregate_csv(aggregate: &AggregateReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Data(format!("writing CSV: {e}"));
    w.write_record(["metric", "mean", "included", "excluded_undefined", "infinite_scans"])
        .map_err(to_err)?;
    for (name, s) in aggregate.entries() {
        w.write_record([
            name.to_owned(),
            format_metric(s.mean),
            s.included.to_string(),
            s.excluded_undefined.to_string(),
            s.infinite_scans.join(";"),
        ])
        .map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("writing CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Files written by [`write_batch_outputs`], relative to the output
/// directory.
pub const BATCH_REPORT_FILE: &str = "batch_report.json";
pub const AGGREGATE_CSV_FILE: &str = "aggregate.csv";
pub const ERRORS_CSV_FILE: &str = "errors.csv";

/// Writes `batch_report.json`, the four per-scan CSV tables,
/// `aggregate.csv` and `errors.csv` into `out_dir` (created if missing).
pub fn write_batch_outputs(batch: &BatchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    put(BATCH_REPORT_FILE, to_json(batch)?.as_bytes())?;
    for table in CsvTable::ALL {
        let mut buf = Vec::new();
        write_csv(&batch.reports, table, &mut buf)?;
        put(table.file_name(), &buf)?;
    }
    put(AGGREGATE_CSV_FILE, aggregate_csv(&batch.aggregate)?.as_bytes())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Data(format!("writing CSV: {e}"));
    w.write_record(["scan_id", "message"]).map_err(to_err)?;
    for e in &batch.errors {
        w.write_record([&e.scan_id, &e.message]).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("writing CSV: {e}")))?;
    put(ERRORS_CSV_FILE, &bytes)?;
    Ok(written)
}
