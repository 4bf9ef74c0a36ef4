//! Per-scan evaluation reports: the two-track metric computation, file
//! provenance, and the JSON / CSV renderings.
//!
//! Serialized metrics are a finite number, the string `"inf"`, or `null`
//! (undefined, e.g. a zero denominator). NaN never reaches the output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{nonzero, threshold, BinaryMask, GridSpec};
use crate::lesion::{lesion_wise_dice, lesion_wise_hd95, match_lesions, EvalConfig, LesionRecord};
use crate::nifti::{decode_nifti, Datatype};
use crate::resample::resample_mask;
use crate::voxel_metrics::{confusion_within, surface_distances, VoxelConfusion};

/// JSON schema every serialized [`ScanReport`] validates against.
pub const SCAN_REPORT_SCHEMA: &str = include_str!("../schema/scan_report.schema.json");

/// `Option<f64>` as number / `"inf"` / `null`.
pub(crate) mod metric_repr {
    use serde::de::Error as _;
    use serde::ser::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match *v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_f64(x),
            Some(x) if x == f64::INFINITY => s.serialize_str("inf"),
            Some(x) => Err(S::Error::custom(format!("metric value {x} is not representable"))),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Number(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(D::Error::custom(format!("expected a number, \"inf\" or null, got {t:?}"))),
        }
    }
}

/// CSV cell for a metric: shortest round-trip decimal, `inf`, or empty.
pub fn format_metric(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x == f64::INFINITY => "inf".to_owned(),
        Some(x) => format!("{x:?}"),
    }
}

/// Lesion-level detection counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LesionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Every metric of one prediction/reference pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetrics {
    pub counts: LesionCounts,
    #[serde(with = "metric_repr")]
    pub sensitivity: Option<f64>,
    #[serde(with = "metric_repr")]
    pub specificity: Option<f64>,
    #[serde(with = "metric_repr")]
    pub dice: Option<f64>,
    #[serde(with = "metric_repr")]
    pub lesion_wise_dice: Option<f64>,
    #[serde(with = "metric_repr")]
    pub hd95_mm: Option<f64>,
    #[serde(with = "metric_repr")]
    pub lesion_wise_hd95_mm: Option<f64>,
    pub voxel_counts: VoxelConfusion,
    /// One entry per reference lesion that survived the size filter.
    pub lesions: Vec<LesionRecord>,
    /// Prediction components (after the size filter) matching no lesion.
    pub fp_pred_labels: Vec<u32>,
}

/// How a stored image was turned into a binary mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum Binarization {
    /// `value >= at`; used for floating-point predictions.
    Threshold { at: f64 },
    /// `value != 0`; integer predictions and every reference.
    Nonzero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

impl From<&GridSpec> for GridInfo {
    fn from(g: &GridSpec) -> Self {
        GridInfo {
            dims: g.dims(),
            spacing: g.spacing(),
        }
    }
}

/// Where one input came from and how it was interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputProvenance {
    pub path: PathBuf,
    /// Hex SHA-256 of the file bytes as stored (compressed if gzip).
    pub sha256: String,
    pub datatype: Datatype,
    pub binarization: Binarization,
    pub grid: GridInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub pred: InputProvenance,
    pub gt: InputProvenance,
    /// Region restricting the voxel confusion counts, if any.
    pub brain_mask: Option<InputProvenance>,
    /// The prediction was nearest-neighbor resampled onto the reference
    /// grid before any metric was computed.
    pub pred_resampled: bool,
    /// Grid all metrics were computed on (always the reference grid).
    pub eval_grid: GridInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub scan_id: String,
    #[serde(flatten)]
    pub metrics: ScanMetrics,
    pub config: EvalConfig,
    pub provenance: Provenance,
}

/// Voxel metrics on the masks as given, lesion metrics on their
/// size-filtered and dilated labelings. `region` restricts only the
/// confusion counts (sensitivity / specificity / Dice).
pub fn evaluate_masks(
    pred: &BinaryMask,
    gt: &BinaryMask,
    cfg: &EvalConfig,
    region: Option<&BinaryMask>,
) -> Result<ScanMetrics> {
    cfg.validate()?;
    let voxel_counts = confusion_within(pred, gt, region)?;
    let hd95_mm = surface_distances(pred, gt)?.percentile(cfg.hd_percentile);
    let m = match_lesions(pred, gt, cfg)?;
    Ok(ScanMetrics {
        counts: LesionCounts {
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
        },
        sensitivity: voxel_counts.sensitivity(),
        specificity: voxel_counts.specificity(),
        dice: voxel_counts.dice(),
        lesion_wise_dice: lesion_wise_dice(&m),
        hd95_mm: Some(hd95_mm),
        lesion_wise_hd95_mm: lesion_wise_hd95(&m, cfg),
        voxel_counts,
        lesions: m.gt_lesions,
        fp_pred_labels: m.fp_pred_labels,
    })
}

struct LoadedMask {
    mask: BinaryMask,
    provenance: InputProvenance,
}

/// Reads a NIfTI file once, hashing the stored bytes, and binarizes it:
/// floating-point data is thresholded at `prob_threshold` when one is
/// given, everything else is taken as `!= 0`.
fn load_mask(path: &Path, prob_threshold: Option<f64>) -> Result<LoadedMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let image = decode_nifti(&bytes)?;
    drop(bytes);
    let (mask, binarization) = match prob_threshold {
        Some(t) if image.datatype.is_float() => (threshold(&image.volume, t)?, Binarization::Threshold { at: t }),
        _ => (nonzero(&image.volume), Binarization::Nonzero),
    };
    let provenance = InputProvenance {
        path: path.to_path_buf(),
        sha256,
        datatype: image.datatype,
        binarization,
        grid: GridInfo::from(mask.grid()),
    };
    Ok(LoadedMask { mask, provenance })
}

/// Evaluate one prediction file against one reference file.
///
/// The scan id is the prediction's file name without its NIfTI extension.
pub fn evaluate_pair(pred_path: impl AsRef<Path>, gt_path: impl AsRef<Path>, cfg: &EvalConfig) -> Result<ScanReport> {
    let pred_path = pred_path.as_ref();
    let scan_id = scan_id_from_path(pred_path);
    evaluate_scan(&scan_id, pred_path, gt_path.as_ref(), None, cfg)
}

/// Evaluate one scan; every error is wrapped with the scan id.
pub fn evaluate_scan(
    scan_id: &str,
    pred_path: &Path,
    gt_path: &Path,
    brain_mask_path: Option<&Path>,
    cfg: &EvalConfig,
) -> Result<ScanReport> {
    evaluate_scan_inner(scan_id, pred_path, gt_path, brain_mask_path, cfg).map_err(|e| e.in_scan(scan_id))
}

fn evaluate_scan_inner(
    scan_id: &str,
    pred_path: &Path,
    gt_path: &Path,
    brain_mask_path: Option<&Path>,
    cfg: &EvalConfig,
) -> Result<ScanReport> {
    cfg.validate()?;
    let gt = load_mask(gt_path, None)?;
    let pred = load_mask(pred_path, Some(cfg.prob_threshold))?;
    let grid = gt.mask.grid().clone();

    // Nearest-neighbor lookup commutes with thresholding, so binarizing
    // before resampling gives the same mask as the other way round.
    let pred_resampled = !pred.mask.grid().same_geometry(&grid);
    let pred_mask = if pred_resampled {
        resample_mask(&pred.mask, &grid)?
    } else {
        pred.mask
    };

    let brain = match brain_mask_path {
        Some(p) => {
            let b = load_mask(p, None)?;
            let mask = if b.mask.grid().same_geometry(&grid) {
                b.mask
            } else {
                resample_mask(&b.mask, &grid)?
            };
            Some((mask, b.provenance))
        }
        None => None,
    };

    let metrics = evaluate_masks(&pred_mask, &gt.mask, cfg, brain.as_ref().map(|(m, _)| m))?;
    Ok(ScanReport {
        scan_id: scan_id.to_owned(),
        metrics,
        config: cfg.clone(),
        provenance: Provenance {
            pred: pred.provenance,
            gt: gt.provenance,
            brain_mask: brain.map(|(_, p)| p),
            pred_resampled,
            eval_grid: GridInfo::from(&grid),
        },
    })
}

/// File name without a `.nii` or `.nii.gz` extension.
pub fn scan_id_from_path(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for ext in [".nii.gz", ".nii"] {
        if let Some(stem) = name.strip_suffix(ext) {
            return stem.to_owned();
        }
    }
    name
}

/// The CSV layouts. Column order is part of the output contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvTable {
    /// `scan_id,tp,fp,fn,sensitivity,specificity`
    Detection,
    /// `scan_id,dice,lesion_wise_dice`
    Overlap,
    /// `scan_id,hd95_mm,lesion_wise_hd95_mm`
    Boundary,
    /// All of the above in one row per scan.
    Combined,
}

impl CsvTable {
    pub const ALL: [CsvTable; 4] = [CsvTable::Detection, CsvTable::Overlap, CsvTable::Boundary, CsvTable::Combined];

    pub fn file_name(self) -> &'static str {
        match self {
            CsvTable::Detection => "detection.csv",
            CsvTable::Overlap => "overlap.csv",
            CsvTable::Boundary => "boundary.csv",
            CsvTable::Combined => "combined.csv",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            CsvTable::Detection => &["scan_id", "tp", "fp", "fn", "sensitivity", "specificity"],
            CsvTable::Overlap => &["scan_id", "dice", "lesion_wise_dice"],
            CsvTable::Boundary => &["scan_id", "hd95_mm", "lesion_wise_hd95_mm"],
            CsvTable::Combined => &[
                "scan_id",
                "tp",
                "fp",
                "fn",
                "sensitivity",
                "specificity",
                "dice",
                "lesion_wise_dice",
                "hd95_mm",
                "lesion_wise_hd95_mm",
            ],
        }
    }

    fn row(self, r: &ScanReport) -> Vec<String> {
        let m = &r.metrics;
        let detection = || {
            vec![
                m.counts.tp.to_string(),
                m.counts.fp.to_string(),
                m.counts.fn_.to_string(),
                format_metric(m.sensitivity),
                format_metric(m.specificity),
            ]
        };
        let overlap = || vec![format_metric(m.dice), format_metric(m.lesion_wise_dice)];
        let boundary = || vec![format_metric(m.hd95_mm), format_metric(m.lesion_wise_hd95_mm)];
        let mut row = vec![r.scan_id.clone()];
        match self {
            CsvTable::Detection => row.extend(detection()),
            CsvTable::Overlap => row.extend(overlap()),
            CsvTable::Boundary => row.extend(boundary()),
            CsvTable::Combined => {
                row.extend(detection());
                row.extend(overlap());
                row.extend(boundary());
            }
        }
        row
    }
}

pub fn write_csv<W: Write>(reports: &[ScanReport], table: CsvTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Data(format!("writing CSV: {e}"));
    w.write_record(table.columns()).map_err(to_io)?;
    for r in reports {
        w.write_record(table.row(r)).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing CSV: {e}")))?;
    Ok(())
}

pub fn csv_string(reports: &[ScanReport], table: CsvTable) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, table, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Data(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}
