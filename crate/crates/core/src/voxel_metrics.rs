//! Voxel-wise metrics: confusion counts, sensitivity, specificity, Dice,
//! Hausdorff distance and its percentile variant.
//!
//! Undefined ratios (zero denominators) are `None`. Distances are in mm and
//! `f64::INFINITY` when exactly one of the two masks is empty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, VoxelBox};
use crate::morphology::{boundary, squared_distance_transform};

/// Voxel-level confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VoxelConfusion {
    pub tp_v: u64,
    pub fp_v: u64,
    pub fn_v: u64,
    pub tn_v: u64,
}

impl VoxelConfusion {
    pub fn total(&self) -> u64 {
        self.tp_v + self.fp_v + self.fn_v + self.tn_v
    }

    /// `tp / (tp + fn)`.
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp_v, self.tp_v + self.fn_v)
    }

    /// `tn / (tn + fp)`.
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn_v, self.tn_v + self.fp_v)
    }

    /// `2 tp / (2 tp + fp + fn)`; `None` when both masks are empty.
    pub fn dice(&self) -> Option<f64> {
        ratio(2 * self.tp_v, 2 * self.tp_v + self.fp_v + self.fn_v)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<VoxelConfusion> {
    confusion_within(pred, gt, None)
}

/// Confusion counts, optionally restricted to the voxels of `region`
/// (e.g. a brain mask).
pub fn confusion_within(
    pred: &BinaryMask,
    gt: &BinaryMask,
    region: Option<&BinaryMask>,
) -> Result<VoxelConfusion> {
    pred.grid().ensure_same(gt.grid())?;
    if let Some(r) = region {
        r.grid().ensure_same(gt.grid())?;
    }
    let mut c = VoxelConfusion::default();
    let mut tally = |p: bool, g: bool| match (p, g) {
        (true, true) => c.tp_v += 1,
        (true, false) => c.fp_v += 1,
        (false, true) => c.fn_v += 1,
        (false, false) => c.tn_v += 1,
    };
    match region {
        None => {
            for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
                tally(p, g);
            }
        }
        Some(r) => {
            for ((&p, &g), &inside) in pred.bits().iter().zip(gt.bits()).zip(r.bits()) {
                if inside {
                    tally(p, g);
                }
            }
        }
    }
    Ok(c)
}

pub fn sensitivity(c: &VoxelConfusion) -> Option<f64> {
    c.sensitivity()
}

pub fn specificity(c: &VoxelConfusion) -> Option<f64> {
    c.specificity()
}

/// `2|P ∩ G| / (|P| + |G|)`; `None` when both are empty.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<Option<f64>> {
    Ok(confusion(pred, gt)?.dice())
}

/// Directed boundary-to-boundary distances between two masks.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceDistances {
    /// Both masks empty.
    BothEmpty,
    /// Exactly one mask empty.
    OneEmpty,
    Distances {
        /// `d(a, ∂G)` for every `a` on the prediction boundary.
        pred_to_gt: Vec<f64>,
        /// `d(b, ∂P)` for every `b` on the reference boundary.
        gt_to_pred: Vec<f64>,
    },
}

impl SurfaceDistances {
    /// Maximum of the two directed suprema.
    pub fn hausdorff(&self) -> f64 {
        match self {
            SurfaceDistances::BothEmpty => 0.0,
            SurfaceDistances::OneEmpty => f64::INFINITY,
            SurfaceDistances::Distances {
                pred_to_gt,
                gt_to_pred,
            } => pred_to_gt
                .iter()
                .chain(gt_to_pred)
                .copied()
                .fold(0.0, f64::max),
        }
    }

    /// Percentile (in percent) of the pooled directed distances.
    pub fn percentile(&self, pct: f64) -> f64 {
        match self {
            SurfaceDistances::BothEmpty => 0.0,
            SurfaceDistances::OneEmpty => f64::INFINITY,
            SurfaceDistances::Distances {
                pred_to_gt,
                gt_to_pred,
            } => {
                let mut pooled: Vec<f64> = pred_to_gt.iter().chain(gt_to_pred).copied().collect();
                percentile(&mut pooled, pct)
            }
        }
    }
}

/// Boundary distances computed through distance transforms on the
/// smallest box holding both masks (plus a one-voxel margin so the crop
/// does not invent boundary voxels).
pub fn surface_distances(pred: &BinaryMask, gt: &BinaryMask) -> Result<SurfaceDistances> {
    pred.grid().ensure_same(gt.grid())?;
    let region = match (pred.bounding_box(), gt.bounding_box()) {
        (None, None) => return Ok(SurfaceDistances::BothEmpty),
        (None, _) | (_, None) => return Ok(SurfaceDistances::OneEmpty),
        (Some(a), Some(b)) => a.union(&b).expanded(1, pred.grid().dims()),
    };
    if region == VoxelBox::full(pred.grid().dims()) {
        Ok(surface_distances_cropped(pred, gt))
    } else {
        Ok(surface_distances_cropped(&pred.crop(&region), &gt.crop(&region)))
    }
}

/// Both masks non-empty, on the same grid, and every voxel on the crop
/// edge is either background or on the true grid edge.
pub(crate) fn surface_distances_cropped(pred: &BinaryMask, gt: &BinaryMask) -> SurfaceDistances {
    let spacing = pred.grid().spacing();
    let pred_surface = boundary(pred);
    let gt_surface = boundary(gt);
    let lookup = |from: &BinaryMask, to: &BinaryMask| -> Vec<f64> {
        let d2 = squared_distance_transform(to, spacing);
        from.foreground().map(|i| d2[i].sqrt()).collect()
    };
    let pred_to_gt = lookup(&pred_surface, &gt_surface);
    let gt_to_pred = lookup(&gt_surface, &pred_surface);
    SurfaceDistances::Distances {
        pred_to_gt,
        gt_to_pred,
    }
}

pub fn hausdorff(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(surface_distances(pred, gt)?.hausdorff())
}

pub fn hd95(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    hd_percentile(pred, gt, 95.0)
}

/// Percentile Hausdorff distance with the percentile given in percent.
pub fn hd_percentile(pred: &BinaryMask, gt: &BinaryMask, pct: f64) -> Result<f64> {
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::Config(format!("percentile must lie in (0, 100], got {pct}")));
    }
    Ok(surface_distances(pred, gt)?.percentile(pct))
}

/// Linear interpolation between closest ranks over the sorted values
/// (rank `pct / 100 * (n - 1)`). Reorders `values`. Returns NaN for an
/// empty slice.
pub fn percentile(values: &mut [f64], pct: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let (_, &mut lo_value, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if hi == lo {
        return lo_value;
    }
    // the (lo + 1)-th order statistic is the minimum of the upper part
    let hi_value = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lo_value + (hi_value - lo_value) * (rank - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid(spacing: f64) -> GridSpec {
        GridSpec::new([6, 6, 6], [spacing; 3]).unwrap()
    }

    fn blob(g: &GridSpec) -> BinaryMask {
        BinaryMask::from_fn(g.clone(), |[x, y, z]| x < 3 && y < 2 && z >= 2)
    }

    #[test]
    fn confusion_reference_cases() {
        let g = grid(1.0);
        let gt = blob(&g);
        let (n, k) = (g.len() as u64, gt.count() as u64);
        let c = confusion(&gt, &gt).unwrap();
        assert_eq!(c, VoxelConfusion { tp_v: k, fp_v: 0, fn_v: 0, tn_v: n - k });
        assert_eq!(c.sensitivity(), Some(1.0));
        assert_eq!(c.specificity(), Some(1.0));
        let c = confusion(&BinaryMask::empty(g.clone()), &gt).unwrap();
        assert_eq!(c, VoxelConfusion { tp_v: 0, fp_v: 0, fn_v: k, tn_v: n - k });
        assert_eq!(c.sensitivity(), Some(0.0));
        let c = confusion(&BinaryMask::full(g.clone()), &gt).unwrap();
        assert_eq!(c, VoxelConfusion { tp_v: k, fp_v: n - k, fn_v: 0, tn_v: 0 });
        assert_eq!(c.specificity(), Some(0.0));
        let all = confusion(&BinaryMask::full(g.clone()), &BinaryMask::full(g.clone())).unwrap();
        assert_eq!(all.specificity(), None);
    }

    #[test]
    fn sensitivity_hand_value() {
        let c = VoxelConfusion { tp_v: 3, fp_v: 0, fn_v: 1, tn_v: 10 };
        assert_eq!(sensitivity(&c), Some(0.75));
        assert_eq!(VoxelConfusion::default().sensitivity(), None);
    }

    #[test]
    fn grid_mismatch_is_geometry_error() {
        let a = BinaryMask::empty(grid(1.0));
        let b = BinaryMask::empty(grid(0.5));
        assert!(matches!(confusion(&a, &b), Err(Error::Geometry(_))));
        assert!(matches!(hd95(&a, &b), Err(Error::Geometry(_))));
    }

    #[test]
    fn dice_cases() {
        let g = grid(1.0);
        let a = blob(&g);
        assert_eq!(dice(&a, &a).unwrap(), Some(1.0));
        let far = BinaryMask::from_fn(g.clone(), |[x, y, z]| x == 5 && y == 5 && z == 0);
        assert_eq!(dice(&a, &far).unwrap(), Some(0.0));
        let e = BinaryMask::empty(g.clone());
        assert_eq!(dice(&e, &e).unwrap(), None);
        assert_eq!(dice(&a, &e).unwrap(), Some(0.0));

        let p = BinaryMask::from_fn(g.clone(), |[x, y, z]| y == 0 && z == 0 && x < 2);
        let q = BinaryMask::from_fn(g, |[x, y, z]| y == 0 && z == 0 && (1..3).contains(&x));
        assert_eq!(dice(&p, &q).unwrap(), Some(0.5));
    }

    #[test]
    fn hausdorff_cases() {
        let g = grid(0.5);
        let a = blob(&g);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert_eq!(hd95(&a, &a).unwrap(), 0.0);

        let mut p = BinaryMask::empty(g.clone());
        p.set(2, 2, 2, true);
        let mut q = BinaryMask::empty(g.clone());
        q.set(3, 2, 2, true);
        assert_eq!(hausdorff(&p, &q).unwrap(), 0.5);

        let e = BinaryMask::empty(g);
        assert_eq!(hausdorff(&e, &a).unwrap(), f64::INFINITY);
        assert_eq!(hd95(&a, &e).unwrap(), f64::INFINITY);
        assert_eq!(hausdorff(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn percentile_interpolates() {
        let mut v: Vec<f64> = std::iter::repeat_n(0.0, 19).chain([10.0]).collect();
        assert!((percentile(&mut v, 95.0) - 0.5).abs() < 1e-12);
        let mut v = vec![3.0, 1.0, 2.0];
        assert_eq!(percentile(&mut v, 50.0), 2.0);
        assert_eq!(percentile(&mut v, 100.0), 3.0);
        assert_eq!(percentile(&mut v, 75.0), 2.5);
        assert_eq!(percentile(&mut [7.0], 95.0), 7.0);
    }
}
