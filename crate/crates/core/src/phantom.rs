//! Synthetic lesion phantoms with analytically known answers, plus the
//! brute-force oracles the fast paths are checked against.
//!
//! Nothing in here calls into `morphology`, `voxel_metrics` or `lesion`:
//! the oracles must stay independent of the code they validate.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, GridSpec, VoxelBox};
use crate::morphology::{Connectivity, LabelMap};
use crate::voxel_metrics::VoxelConfusion;

/// Largest combined boundary size accepted by [`brute_hd`].
pub const BRUTE_HD_MAX_BOUNDARY: usize = 100_000;
/// Largest voxel count accepted by [`brute_components`].
pub const BRUTE_COMPONENTS_MAX_VOXELS: usize = 64 * 64 * 64;

/// Edge length (voxels) of the cubes added by `extra_components`.
const EXTRA_SIDE: usize = 3;
/// Minimum Chebyshev index distance between an extra component and any
/// lesion voxel: keeps 2-voxel dilations of both apart.
const EXTRA_CLEARANCE: usize = 6;
/// Largest shift for which a shifted lesion is guaranteed to overlap its
/// source after 2-voxel dilation of both.
const MAX_MATCHING_SHIFT: i64 = 4;
const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomGrid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    #[serde(default)]
    pub origin: [f64; 3],
}

impl PhantomGrid {
    pub fn to_grid(&self) -> Result<GridSpec> {
        GridSpec::with_origin(self.dims, self.spacing, self.origin)
            .map_err(|e| Error::Spec(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum LesionShape {
    Sphere { center_mm: [f64; 3], radius_mm: f64 },
    /// Axis-aligned box; `extents_mm` are full edge lengths.
    Box { center_mm: [f64; 3], extents_mm: [f64; 3] },
}

impl LesionShape {
    fn center(&self) -> [f64; 3] {
        match self {
            LesionShape::Sphere { center_mm, .. } | LesionShape::Box { center_mm, .. } => *center_mm,
        }
    }

    fn half_extents(&self) -> [f64; 3] {
        match self {
            LesionShape::Sphere { radius_mm, .. } => [*radius_mm; 3],
            LesionShape::Box { extents_mm, .. } => extents_mm.map(|e| e / 2.0),
        }
    }

    fn contains(&self, w: [f64; 3]) -> bool {
        match self {
            LesionShape::Sphere { center_mm, radius_mm } => {
                (0..3).map(|a| (w[a] - center_mm[a]).powi(2)).sum::<f64>() <= radius_mm * radius_mm
            }
            LesionShape::Box { center_mm, extents_mm } => {
                (0..3).all(|a| (w[a] - center_mm[a]).abs() <= extents_mm[a] / 2.0)
            }
        }
    }

    /// Same center, every size scaled by `factor`.
    fn scaled(&self, factor: f64) -> LesionShape {
        match self {
            LesionShape::Sphere { center_mm, radius_mm } => LesionShape::Sphere {
                center_mm: *center_mm,
                radius_mm: radius_mm * factor,
            },
            LesionShape::Box { center_mm, extents_mm } => LesionShape::Box {
                center_mm: *center_mm,
                extents_mm: extents_mm.map(|e| e * factor),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    /// Shrink every lesion's size parameters by this fraction, in `[0, 1)`.
    pub erode_fraction: f64,
    /// Integer voxel translation applied to every lesion.
    pub shift_voxels: [i64; 3],
    /// Spurious 3x3x3 components placed away from all lesions.
    pub extra_components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid: PhantomGrid,
    pub lesions: Vec<LesionShape>,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

/// Lesion-level counts a phantom is constructed to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedLesionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Quantities known from the phantom construction alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRecord {
    pub gt_component_count: usize,
    /// Voxel count of each reference lesion, in spec order.
    pub gt_component_sizes: Vec<usize>,
    pub pred_component_count: usize,
    pub confusion: VoxelConfusion,
    pub dice: Option<f64>,
    /// Counts under the default lesion settings (2-voxel Chebyshev
    /// dilation, minimum size 5, 26-connectivity); `None` when the
    /// construction does not pin them down.
    pub lesion_counts: Option<ExpectedLesionCounts>,
    /// Prediction equals the reference.
    pub identical: bool,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub gt: BinaryMask,
    pub pred: BinaryMask,
    pub expected: ExpectedRecord,
}

/// Voxel index set of a rasterized shape plus its index box.
struct Raster {
    voxels: Vec<usize>,
    bbox: Option<VoxelBox>,
}

fn rasterize(grid: &GridSpec, shape: &LesionShape) -> Raster {
    let dims = grid.dims();
    let spacing = grid.spacing();
    let origin = grid.voxel_to_world([0.0; 3]);
    let center = shape.center();
    let half = shape.half_extents();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let first = ((center[a] - half[a] - origin[a]) / spacing[a]).floor().max(0.0);
        let last = ((center[a] + half[a] - origin[a]) / spacing[a]).ceil();
        lo[a] = (first as usize).min(dims[a]);
        hi[a] = if last < 0.0 { 0 } else { (last as usize + 1).min(dims[a]) };
    }
    let mut voxels = Vec::new();
    let mut bbox: Option<VoxelBox> = None;
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                let w = [
                    origin[0] + x as f64 * spacing[0],
                    origin[1] + y as f64 * spacing[1],
                    origin[2] + z as f64 * spacing[2],
                ];
                if shape.contains(w) {
                    voxels.push(grid.index(x, y, z));
                    match bbox.as_mut() {
                        Some(b) => b.include([x, y, z]),
                        None => bbox = Some(VoxelBox::single([x, y, z])),
                    }
                }
            }
        }
    }
    Raster { voxels, bbox }
}

/// Chebyshev index distance between the closest voxels of two boxes; 0
/// when they overlap, 1 when they touch.
fn box_distance(a: &VoxelBox, b: &VoxelBox) -> usize {
    (0..3)
        .map(|k| {
            if a.hi[k] <= b.lo[k] {
                b.lo[k] - a.hi[k] + 1
            } else if b.hi[k] <= a.lo[k] {
                a.lo[k] - b.hi[k] + 1
            } else {
                0
            }
        })
        .max()
        .unwrap()
}

fn shift_voxels(grid: &GridSpec, voxels: &[usize], shift: [i64; 3]) -> Raster {
    let mut out = Vec::with_capacity(voxels.len());
    let mut bbox: Option<VoxelBox> = None;
    for &i in voxels {
        let v = grid.coords(i);
        let s = [v[0] as i64 + shift[0], v[1] as i64 + shift[1], v[2] as i64 + shift[2]];
        if grid.contains(s) {
            let s = [s[0] as usize, s[1] as usize, s[2] as usize];
            out.push(grid.index(s[0], s[1], s[2]));
            match bbox.as_mut() {
                Some(b) => b.include(s),
                None => bbox = Some(VoxelBox::single(s)),
            }
        }
    }
    Raster { voxels: out, bbox }
}

impl PhantomSpec {
    /// `n_lesions` separated spheres and boxes at seeded random positions.
    pub fn random(grid: PhantomGrid, n_lesions: usize, seed: u64) -> Result<PhantomSpec> {
        let g = grid.to_grid()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = g.dims();
        let spacing = g.spacing();
        let origin = g.voxel_to_world([0.0; 3]);
        let max_spacing = spacing.iter().copied().fold(0.0, f64::max);
        let mut lesions = Vec::new();
        let mut boxes: Vec<VoxelBox> = Vec::new();
        let mut attempts = 0;
        while lesions.len() < n_lesions {
            attempts += 1;
            if attempts > PLACEMENT_ATTEMPTS {
                return Err(Error::Spec(format!(
                    "could not place {n_lesions} separated lesions on a {dims:?} grid"
                )));
            }
            // radius between ~1.2 and ~4 voxels of the coarsest axis
            let radius = max_spacing * rng.random_range(1.2..4.0);
            let mut center = [0.0; 3];
            for a in 0..3 {
                let margin = radius + spacing[a];
                let extent = (dims[a] - 1) as f64 * spacing[a];
                if extent < 2.0 * margin {
                    center[a] = origin[a] + extent / 2.0;
                } else {
                    center[a] = origin[a] + rng.random_range(margin..extent - margin);
                }
            }
            let shape = if rng.random_bool(0.5) {
                LesionShape::Sphere { center_mm: center, radius_mm: radius }
            } else {
                let extents = [0, 1, 2].map(|_| 2.0 * radius * rng.random_range(0.6..1.0));
                LesionShape::Box { center_mm: center, extents_mm: extents }
            };
            if !shape_in_bounds(&g, &shape) {
                continue;
            }
            let raster = rasterize(&g, &shape);
            let Some(bbox) = raster.bbox else { continue };
            if raster.voxels.len() < 5 || boxes.iter().any(|b| box_distance(b, &bbox) < 3) {
                continue;
            }
            boxes.push(bbox);
            lesions.push(shape);
        }
        Ok(PhantomSpec {
            grid,
            lesions,
            noise_seed: seed,
            perturbation: None,
        })
    }
}

fn shape_in_bounds(grid: &GridSpec, shape: &LesionShape) -> bool {
    let dims = grid.dims();
    let spacing = grid.spacing();
    let origin = grid.voxel_to_world([0.0; 3]);
    let center = shape.center();
    let half = shape.half_extents();
    (0..3).all(|a| {
        let lo = origin[a] - spacing[a] / 2.0;
        let hi = origin[a] + (dims[a] as f64 - 0.5) * spacing[a];
        center[a] - half[a] >= lo - 1e-9 && center[a] + half[a] <= hi + 1e-9
    })
}

/// Rasterize the reference lesions, apply the perturbation and record the
/// construction-determined answers.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let grid = spec.grid.to_grid()?;
    let pert = spec.perturbation.clone().unwrap_or_default();
    if !(0.0..1.0).contains(&pert.erode_fraction) {
        return Err(Error::Spec(format!(
            "erode_fraction must lie in [0, 1), got {}",
            pert.erode_fraction
        )));
    }

    let mut gt_rasters = Vec::with_capacity(spec.lesions.len());
    for (k, shape) in spec.lesions.iter().enumerate() {
        if !shape_in_bounds(&grid, shape) {
            return Err(Error::Spec(format!("lesion {k} extends outside the grid")));
        }
        let r = rasterize(&grid, shape);
        if r.voxels.is_empty() {
            return Err(Error::Spec(format!("lesion {k} contains no voxel center")));
        }
        gt_rasters.push(r);
    }
    for i in 0..gt_rasters.len() {
        for j in 0..i {
            let (a, b) = (gt_rasters[i].bbox.unwrap(), gt_rasters[j].bbox.unwrap());
            if box_distance(&a, &b) < 2 {
                return Err(Error::Spec(format!("lesions {j} and {i} touch or overlap")));
            }
        }
    }

    let pred_rasters: Vec<Raster> = spec
        .lesions
        .iter()
        .zip(&gt_rasters)
        .map(|(shape, gt)| {
            let eroded = if pert.erode_fraction > 0.0 {
                rasterize(&grid, &shape.scaled(1.0 - pert.erode_fraction)).voxels
            } else {
                gt.voxels.clone()
            };
            shift_voxels(&grid, &eroded, pert.shift_voxels)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let mut occupied: Vec<VoxelBox> = gt_rasters
        .iter()
        .chain(&pred_rasters)
        .filter_map(|r| r.bbox)
        .collect();
    let dims = grid.dims();
    let mut extras: Vec<VoxelBox> = Vec::new();
    let mut attempts = 0;
    while extras.len() < pert.extra_components {
        attempts += 1;
        if attempts > PLACEMENT_ATTEMPTS || dims.iter().any(|&d| d < EXTRA_SIDE) {
            return Err(Error::Spec(format!(
                "no room for {} extra components",
                pert.extra_components
            )));
        }
        let lo = [0, 1, 2].map(|a| rng.random_range(0..=dims[a] - EXTRA_SIDE));
        let cube = VoxelBox {
            lo,
            hi: lo.map(|l| l + EXTRA_SIDE),
        };
        if occupied.iter().any(|b| box_distance(b, &cube) < EXTRA_CLEARANCE) {
            continue;
        }
        occupied.push(cube);
        extras.push(cube);
    }

    let mut gt = BinaryMask::empty(grid.clone());
    let mut gt_set = HashSet::new();
    for r in &gt_rasters {
        for &i in &r.voxels {
            gt.bits_mut()[i] = true;
            gt_set.insert(i);
        }
    }
    let mut pred = BinaryMask::empty(grid.clone());
    let mut pred_set = HashSet::new();
    for r in &pred_rasters {
        for &i in &r.voxels {
            pred.bits_mut()[i] = true;
            pred_set.insert(i);
        }
    }
    for cube in &extras {
        for z in cube.lo[2]..cube.hi[2] {
            for y in cube.lo[1]..cube.hi[1] {
                for x in cube.lo[0]..cube.hi[0] {
                    let i = grid.index(x, y, z);
                    pred.bits_mut()[i] = true;
                    pred_set.insert(i);
                }
            }
        }
    }

    let tp_v = gt_set.intersection(&pred_set).count() as u64;
    let fp_v = pred_set.len() as u64 - tp_v;
    let fn_v = gt_set.len() as u64 - tp_v;
    let confusion = VoxelConfusion {
        tp_v,
        fp_v,
        fn_v,
        tn_v: grid.len() as u64 - tp_v - fp_v - fn_v,
    };
    let dice_den = 2 * tp_v + fp_v + fn_v;
    let dice = (dice_den > 0).then(|| 2.0 * tp_v as f64 / dice_den as f64);

    let lesion_counts = expected_lesion_counts(&gt_rasters, &pred_rasters, &pert, extras.len());
    let pred_component_count =
        pred_rasters.iter().filter(|r| !r.voxels.is_empty()).count() + extras.len();

    Ok(Phantom {
        expected: ExpectedRecord {
            gt_component_count: gt_rasters.len(),
            gt_component_sizes: gt_rasters.iter().map(|r| r.voxels.len()).collect(),
            pred_component_count,
            confusion,
            dice,
            lesion_counts,
            identical: gt_set == pred_set,
        },
        gt,
        pred,
    })
}

/// Lesion counts under the default settings, when the construction fixes
/// them: a lesion whose prediction keeps at least 5 voxels is detected as
/// long as the shift is within the dilation reach and it cannot touch any
/// other lesion's dilated region; smaller predictions are dropped by the
/// size filter and leave a miss.
fn expected_lesion_counts(
    gt: &[Raster],
    pred: &[Raster],
    pert: &Perturbation,
    extras: usize,
) -> Option<ExpectedLesionCounts> {
    const MIN_SIZE: usize = 5;
    if pert.shift_voxels.iter().any(|s| s.abs() > MAX_MATCHING_SHIFT) {
        return None;
    }
    let (mut tp, mut fn_) = (0, 0);
    for (i, (g, p)) in gt.iter().zip(pred).enumerate() {
        if g.voxels.len() < MIN_SIZE {
            continue;
        }
        if p.voxels.len() < MIN_SIZE {
            fn_ += 1;
            continue;
        }
        let pb = p.bbox.unwrap();
        let crosses = gt
            .iter()
            .enumerate()
            .any(|(j, other)| j != i && box_distance(&pb, &other.bbox.unwrap()) <= 2 * 2);
        if crosses {
            return None;
        }
        tp += 1;
    }
    Some(ExpectedLesionCounts { tp, fp: extras, fn_ })
}

fn face_boundary(mask: &BinaryMask) -> Vec<[usize; 3]> {
    let g = mask.grid();
    let dims = g.dims();
    mask.foreground()
        .map(|i| g.coords(i))
        .filter(|v| {
            (0..3).any(|a| {
                [-1i64, 1].iter().any(|&d| {
                    let mut n = [v[0] as i64, v[1] as i64, v[2] as i64];
                    n[a] += d;
                    n[a] < 0 || n[a] >= dims[a] as i64 || !mask.get(n[0] as usize, n[1] as usize, n[2] as usize)
                })
            })
        })
        .collect()
}

/// All-pairs boundary distance oracle.
///
/// `quantile` is a fraction in `(0, 1]`; `1.0` gives the Hausdorff
/// distance (maximum), anything else the linearly interpolated quantile of
/// the pooled directed distances.
pub fn brute_hd(pred: &BinaryMask, gt: &BinaryMask, quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::Config(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    pred.grid().ensure_same(gt.grid())?;
    let a = face_boundary(pred);
    let b = face_boundary(gt);
    if a.len() + b.len() > BRUTE_HD_MAX_BOUNDARY {
        return Err(Error::OracleScale(format!(
            "{} boundary voxels exceed the oracle limit of {BRUTE_HD_MAX_BOUNDARY}",
            a.len() + b.len()
        )));
    }
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(f64::INFINITY),
        _ => {}
    }
    let s = pred.grid().spacing();
    let dist = |p: &[usize; 3], q: &[usize; 3]| {
        let dx = (p[0] as f64 - q[0] as f64) * s[0];
        let dy = (p[1] as f64 - q[1] as f64) * s[1];
        let dz = (p[2] as f64 - q[2] as f64) * s[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    };
    let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| -> Vec<f64> {
        from.iter()
            .map(|p| to.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .collect()
    };
    let mut pooled = directed(&a, &b);
    pooled.extend(directed(&b, &a));
    pooled.sort_by(f64::total_cmp);
    if quantile == 1.0 {
        return Ok(*pooled.last().unwrap());
    }
    let rank = quantile * (pooled.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(pooled[lo] + (pooled[hi] - pooled[lo]) * (rank - lo as f64))
}

/// Breadth-first flood-fill labeling in first-encounter scan order.
pub fn brute_components(mask: &BinaryMask, conn: Connectivity) -> Result<LabelMap> {
    let g = mask.grid();
    if g.len() > BRUTE_COMPONENTS_MAX_VOXELS {
        return Err(Error::OracleScale(format!(
            "{} voxels exceed the flood-fill oracle limit of {BRUTE_COMPONENTS_MAX_VOXELS}",
            g.len()
        )));
    }
    let max_l1 = match conn {
        Connectivity::Six => 1,
        Connectivity::Eighteen => 2,
        Connectivity::TwentySix => 3,
    };
    let dims = g.dims();
    let mut labels = vec![0u32; g.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..g.len() {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let v = g.coords(i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let l1 = dx.abs() + dy.abs() + dz.abs();
                        if l1 == 0 || l1 > max_l1 {
                            continue;
                        }
                        let n = [v[0] as i64 + dx, v[1] as i64 + dy, v[2] as i64 + dz];
                        if (0..3).any(|a| n[a] < 0 || n[a] >= dims[a] as i64) {
                            continue;
                        }
                        let j = g.index(n[0] as usize, n[1] as usize, n[2] as usize);
                        if mask.bits()[j] && labels[j] == 0 {
                            labels[j] = next;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
    }
    Ok(LabelMap::from_raw(g.clone(), labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> PhantomGrid {
        PhantomGrid { dims: [n; 3], spacing: [1.0; 3], origin: [0.0; 3] }
    }

    fn boxes_spec() -> PhantomSpec {
        PhantomSpec {
            grid: unit_grid(32),
            lesions: vec![
                LesionShape::Box { center_mm: [6.0, 6.0, 6.0], extents_mm: [4.0, 4.0, 4.0] },
                LesionShape::Box { center_mm: [20.0, 8.0, 8.0], extents_mm: [2.0, 4.0, 2.0] },
            ],
            noise_seed: 3,
            perturbation: None,
        }
    }

    #[test]
    fn sphere_identity() {
        let spec = PhantomSpec {
            grid: unit_grid(12),
            lesions: vec![LesionShape::Sphere { center_mm: [6.0; 3], radius_mm: 2.6 }],
            noise_seed: 0,
            perturbation: None,
        };
        let p = generate_phantom(&spec).unwrap();
        assert_eq!(p.pred, p.gt);
        assert!(p.expected.identical);
        assert_eq!(p.expected.dice, Some(1.0));
        // |x|^2 + |y|^2 + |z|^2 <= 6.76 over integer offsets
        let mut n = 0;
        for x in -3i32..=3 {
            for y in -3i32..=3 {
                for z in -3i32..=3 {
                    n += (x * x + y * y + z * z <= 6) as usize;
                }
            }
        }
        assert_eq!(p.expected.gt_component_sizes, vec![n]);
        assert_eq!(p.gt.count(), n);
    }

    #[test]
    fn extra_components_counted() {
        let mut spec = boxes_spec();
        spec.perturbation = Some(Perturbation { extra_components: 1, ..Default::default() });
        let p = generate_phantom(&spec).unwrap();
        assert_eq!(p.expected.lesion_counts, Some(ExpectedLesionCounts { tp: 2, fp: 1, fn_: 0 }));
        assert_eq!(p.expected.pred_component_count, 3);
        assert_eq!(p.expected.confusion.fp_v, 27);
        // same seed, same masks
        let q = generate_phantom(&spec).unwrap();
        assert_eq!(p.pred, q.pred);
    }

    #[test]
    fn shifted_box_overlap_arithmetic() {
        let spec = PhantomSpec {
            grid: unit_grid(16),
            lesions: vec![LesionShape::Box { center_mm: [6.5, 6.5, 6.5], extents_mm: [4.0, 3.0, 2.0] }],
            noise_seed: 0,
            perturbation: Some(Perturbation { shift_voxels: [1, 0, 0], ..Default::default() }),
        };
        let p = generate_phantom(&spec).unwrap();
        // centers within half-extents of 6.5: x in 5..=8, y in 5..=8, z in 6..=7
        let (ex, ey, ez) = (4u64, 4, 2);
        let c = p.expected.confusion;
        assert_eq!(c.tp_v, (ex - 1) * ey * ez);
        assert_eq!(c.fp_v, ey * ez);
        assert_eq!(c.fn_v, ey * ez);
        assert_eq!(c.total(), 16 * 16 * 16);
    }

    #[test]
    fn spec_errors() {
        let mut spec = boxes_spec();
        spec.lesions.push(LesionShape::Sphere { center_mm: [31.0, 1.0, 1.0], radius_mm: 3.0 });
        assert!(matches!(generate_phantom(&spec), Err(Error::Spec(_))));

        let mut spec = boxes_spec();
        spec.lesions.push(LesionShape::Box { center_mm: [9.0, 6.0, 6.0], extents_mm: [2.0; 3] });
        assert!(matches!(generate_phantom(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{
            "grid": {"dims": [10, 10, 10], "spacing": [0.5, 0.5, 0.5]},
            "lesions": [{"shape": "sphere", "center_mm": [2.0, 2.0, 2.0], "radius_mm": 1.0}],
            "noise_seed": 1,
            "perturbation": {"shift_voxels": [1, 0, 0]}
        }"#;
        let spec: PhantomSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.perturbation.unwrap().extra_components, 0);
    }

    #[test]
    fn brute_hd_cases() {
        let g = GridSpec::new([8, 8, 8], [1.0; 3]).unwrap();
        let a = BinaryMask::from_fn(g.clone(), |[x, y, z]| x < 3 && y < 3 && z < 3);
        assert_eq!(brute_hd(&a, &a, 0.95).unwrap(), 0.0);
        let e = BinaryMask::empty(g.clone());
        assert_eq!(brute_hd(&e, &a, 0.95).unwrap(), f64::INFINITY);
        assert_eq!(brute_hd(&e, &e, 1.0).unwrap(), 0.0);

        // on a one-voxel-thick line every voxel is boundary: the reference
        // is x in 0..=8, the prediction adds x = 18, so the pooled
        // distances are {0 x 18, 10}: rank 0.95 * 18 = 17.1 -> 0.1 * 10
        let line = GridSpec::new([30, 1, 1], [1.0; 3]).unwrap();
        let gt = BinaryMask::from_fn(line.clone(), |[x, _, _]| x <= 8);
        let pred = BinaryMask::from_fn(line, |[x, _, _]| x <= 8 || x == 18);
        assert_eq!(brute_hd(&pred, &gt, 1.0).unwrap(), 10.0);
        let q = brute_hd(&pred, &gt, 0.95).unwrap();
        assert!((q - 1.0).abs() < 1e-12, "{q}");
    }

    #[test]
    fn brute_components_basics() {
        let g = GridSpec::new([4, 4, 4], [1.0; 3]).unwrap();
        assert_eq!(brute_components(&BinaryMask::empty(g.clone()), Connectivity::Six).unwrap().count(), 0);
        let full = brute_components(&BinaryMask::full(g), Connectivity::Six).unwrap();
        assert_eq!((full.count(), full.sizes()), (1, &[64usize][..]));
        let big = GridSpec::new([65, 64, 64], [1.0; 3]).unwrap();
        assert!(matches!(
            brute_components(&BinaryMask::empty(big), Connectivity::Six),
            Err(Error::OracleScale(_))
        ));
    }

    #[test]
    fn random_specs_are_valid() {
        for seed in 0..10 {
            let spec = PhantomSpec::random(unit_grid(40), 6, seed).unwrap();
            let p = generate_phantom(&spec).unwrap();
            assert_eq!(p.expected.gt_component_count, 6);
            assert!(p.expected.gt_component_sizes.iter().all(|&s| s >= 5));
        }
    }
}
