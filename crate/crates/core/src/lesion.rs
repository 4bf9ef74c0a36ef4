//! Lesion-wise evaluation: dilation-tolerant lesion matching, lesion
//! TP/FP/FN counts and the lesion-averaged Dice and HD95 scores.
//!
//! Matching works on preprocessed label maps (small components dropped,
//! survivors dilated); per-lesion scores are computed on the undilated
//! voxel sets. Voxel-wise metrics never see this preprocessing.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BinaryMask;
use crate::morphology::{connected_components, dilate_labels, filter_small, Connectivity, DilationShape, LabelMap};
use crate::voxel_metrics::surface_distances_cropped;

/// Evaluation settings shared by the lesion-wise and report layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Foreground iff probability >= this value.
    pub prob_threshold: f64,
    /// Dilation radius (voxels) applied before lesion matching.
    pub dilation_voxels: usize,
    /// Components smaller than this are dropped before lesion matching.
    pub min_lesion_size: usize,
    pub connectivity: Connectivity,
    /// Percentile (in percent) used for HD95-style distances.
    pub hd_percentile: f64,
    /// HD contribution (mm) of each missed or spurious lesion.
    pub unmatched_hd_penalty: f64,
    pub dilation_shape: DilationShape,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            prob_threshold: 0.5,
            dilation_voxels: 2,
            min_lesion_size: 5,
            connectivity: Connectivity::TwentySix,
            hd_percentile: 95.0,
            unmatched_hd_penalty: 374.0,
            dilation_shape: DilationShape::Chebyshev,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prob_threshold) {
            return Err(Error::Config(format!(
                "prob_threshold must lie in [0, 1], got {}",
                self.prob_threshold
            )));
        }
        if self.min_lesion_size < 1 {
            return Err(Error::Config("min_lesion_size must be >= 1".into()));
        }
        if !(self.hd_percentile > 0.0 && self.hd_percentile <= 100.0) {
            return Err(Error::Config(format!(
                "hd_percentile must lie in (0, 100], got {}",
                self.hd_percentile
            )));
        }
        if !(self.unmatched_hd_penalty > 0.0 && self.unmatched_hd_penalty.is_finite()) {
            return Err(Error::Config(format!(
                "unmatched_hd_penalty must be a positive number of mm, got {}",
                self.unmatched_hd_penalty
            )));
        }
        Ok(())
    }
}

/// Scores of one reference lesion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionRecord {
    pub gt_label: u32,
    /// Prediction components whose dilated regions touch this lesion's
    /// dilated region. Empty for a missed lesion.
    pub matched_pred_labels: Vec<u32>,
    pub dice: f64,
    pub hd95_mm: f64,
}

impl LesionRecord {
    pub fn is_detected(&self) -> bool {
        !self.matched_pred_labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionMatch {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_lesions: Vec<LesionRecord>,
    pub fp_pred_labels: Vec<u32>,
}

impl LesionMatch {
    /// Number of reference lesions (`tp + fn`).
    pub fn gt_count(&self) -> usize {
        self.gt_lesions.len()
    }
}

/// Undilated and dilated labelings after small-component removal.
#[derive(Debug, Clone)]
pub struct PreprocessedLesions {
    pub original: LabelMap,
    pub dilated: LabelMap,
}

pub fn lesion_preprocess(mask: &BinaryMask, cfg: &EvalConfig) -> PreprocessedLesions {
    let labels = connected_components(mask, cfg.connectivity);
    let original = filter_small(&labels, cfg.min_lesion_size);
    let dilated = dilate_labels(&original, cfg.dilation_voxels, cfg.dilation_shape);
    PreprocessedLesions { original, dilated }
}

pub fn match_lesions(pred: &BinaryMask, gt: &BinaryMask, cfg: &EvalConfig) -> Result<LesionMatch> {
    cfg.validate()?;
    pred.grid().ensure_same(gt.grid())?;
    let gt_pre = lesion_preprocess(gt, cfg);
    let pred_pre = lesion_preprocess(pred, cfg);
    Ok(match_preprocessed(&pred_pre, &gt_pre, cfg))
}

pub fn match_preprocessed(
    pred: &PreprocessedLesions,
    gt: &PreprocessedLesions,
    cfg: &EvalConfig,
) -> LesionMatch {
    let n_gt = gt.original.count();
    let n_pred = pred.original.count();
    let mut matched: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n_gt];
    let mut pred_hit = vec![false; n_pred];
    for (&g, &p) in gt.dilated.labels().iter().zip(pred.dilated.labels()) {
        if g > 0 && p > 0 {
            matched[g as usize - 1].insert(p);
            pred_hit[p as usize - 1] = true;
        }
    }

    let gt_boxes = gt.original.bounding_boxes();
    let pred_boxes = pred.original.bounding_boxes();
    let dims = gt.original.grid().dims();
    let gt_lesions: Vec<LesionRecord> = matched
        .into_par_iter()
        .enumerate()
        .map(|(k, preds)| {
            let gt_label = k as u32 + 1;
            if preds.is_empty() {
                return LesionRecord {
                    gt_label,
                    matched_pred_labels: Vec::new(),
                    dice: 0.0,
                    hd95_mm: cfg.unmatched_hd_penalty,
                };
            }
            let region = preds
                .iter()
                .fold(gt_boxes[k], |b, &p| b.union(&pred_boxes[p as usize - 1]))
                .expanded(1, dims);
            let g = gt.original.crop_mask(&region, |l| l == gt_label);
            let p = pred.original.crop_mask(&region, |l| preds.contains(&l));
            let (mut inter, mut size_g, mut size_p) = (0usize, 0usize, 0usize);
            for (&a, &b) in p.bits().iter().zip(g.bits()) {
                inter += (a && b) as usize;
                size_p += a as usize;
                size_g += b as usize;
            }
            let dice = 2.0 * inter as f64 / (size_g + size_p) as f64;
            let hd95_mm = surface_distances_cropped(&p, &g).percentile(cfg.hd_percentile);
            LesionRecord {
                gt_label,
                matched_pred_labels: preds.into_iter().collect(),
                dice,
                hd95_mm,
            }
        })
        .collect();

    let tp = gt_lesions.iter().filter(|r| r.is_detected()).count();
    let fp_pred_labels: Vec<u32> = pred_hit
        .iter()
        .enumerate()
        .filter_map(|(k, &hit)| (!hit).then_some(k as u32 + 1))
        .collect();
    LesionMatch {
        tp,
        fp: fp_pred_labels.len(),
        fn_: n_gt - tp,
        gt_lesions,
        fp_pred_labels,
    }
}

/// Sum of per-lesion Dice over `tp + fn + fp`; `None` with no lesions at
/// all.
pub fn lesion_wise_dice(m: &LesionMatch) -> Option<f64> {
    let den = m.tp + m.fn_ + m.fp;
    (den > 0).then(|| m.gt_lesions.iter().map(|r| r.dice).sum::<f64>() / den as f64)
}

/// Sum of per-lesion HD95 (penalty for misses) plus the penalty per
/// spurious lesion, over `tp + fn + fp`; `None` with no lesions at all.
pub fn lesion_wise_hd95(m: &LesionMatch, cfg: &EvalConfig) -> Option<f64> {
    let den = m.tp + m.fn_ + m.fp;
    (den > 0).then(|| {
        let matched: f64 = m.gt_lesions.iter().map(|r| r.hd95_mm).sum();
        (matched + m.fp as f64 * cfg.unmatched_hd_penalty) / den as f64
    })
}
