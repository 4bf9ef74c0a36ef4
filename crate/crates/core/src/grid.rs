//! Volume geometry and the two voxel containers used throughout the crate.
//!
//! All buffers use a fixed x-fastest layout: voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`. Loaders normalize to this order.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

/// Tolerance (mm) for spacing agreement between grids and between the
/// affine column norms and the declared spacing.
pub const SPACING_TOLERANCE_MM: f64 = 1e-4;
/// Tolerance (mm) for affine agreement between grids.
pub const AFFINE_TOLERANCE_MM: f64 = 1e-3;

/// The geometric identity of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: Matrix4<f64>,
}

impl GridSpec {
    /// Axis-aligned grid with the first voxel center at the world origin.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::with_origin(dims, spacing, [0.0; 3])
    }

    pub fn with_origin(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let mut affine = Matrix4::identity();
        for axis in 0..3 {
            affine[(axis, axis)] = spacing[axis];
            affine[(axis, 3)] = origin[axis];
        }
        Self::from_parts(dims, spacing, affine)
    }

    /// Grid whose spacing is taken from the column norms of the affine's
    /// 3x3 block.
    pub fn from_affine(dims: [usize; 3], affine: Matrix4<f64>) -> Result<Self> {
        let spacing = column_norms(&affine);
        Self::from_parts(dims, spacing, affine)
    }

    /// Fully explicit constructor; checks that the affine agrees with the
    /// spacing.
    pub fn from_parts(dims: [usize; 3], spacing: [f64; 3], affine: Matrix4<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("dimensions must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Geometry(format!("spacing must be > 0 mm, got {spacing:?}")));
        }
        if affine.iter().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("affine contains non-finite entries".into()));
        }
        let norms = column_norms(&affine);
        for axis in 0..3 {
            if (norms[axis] - spacing[axis]).abs() > SPACING_TOLERANCE_MM {
                return Err(Error::Geometry(format!(
                    "affine column {axis} has norm {} but spacing is {}",
                    norms[axis], spacing[axis]
                )));
            }
        }
        Ok(GridSpec {
            dims,
            spacing,
            affine,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &Matrix4<f64> {
        &self.affine
    }

    /// Total number of voxels.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn contains(&self, v: [i64; 3]) -> bool {
        (0..3).all(|a| v[a] >= 0 && (v[a] as usize) < self.dims[a])
    }

    /// World (mm) position of a possibly fractional voxel index.
    pub fn voxel_to_world(&self, v: [f64; 3]) -> [f64; 3] {
        let w = self.affine * Vector4::new(v[0], v[1], v[2], 1.0);
        [w[0], w[1], w[2]]
    }

    /// Same dimensions, spacing within 1e-4 mm and affine within 1e-3 mm.
    pub fn same_geometry(&self, other: &GridSpec) -> bool {
        self.dims == other.dims
            && (0..3).all(|a| (self.spacing[a] - other.spacing[a]).abs() <= SPACING_TOLERANCE_MM)
            && self
                .affine
                .iter()
                .zip(other.affine.iter())
                .all(|(a, b)| (a - b).abs() <= AFFINE_TOLERANCE_MM)
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "grids differ (dims {:?} spacing {:?} vs dims {:?} spacing {:?}); \
                 resample the prediction onto the reference grid first",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }

    /// Grid of the sub-block `region`, sharing world coordinates with `self`.
    pub fn sub_grid(&self, region: &VoxelBox) -> GridSpec {
        let mut affine = self.affine;
        let origin = self.voxel_to_world([
            region.lo[0] as f64,
            region.lo[1] as f64,
            region.lo[2] as f64,
        ]);
        for axis in 0..3 {
            affine[(axis, 3)] = origin[axis];
        }
        GridSpec {
            dims: region.dims(),
            spacing: self.spacing,
            affine,
        }
    }

    /// A grid covering the same field of view with a different spacing.
    ///
    /// Voxel counts are rounded to the nearest integer and the first voxel
    /// center is placed half a new voxel inside the original field-of-view
    /// edge, so that e.g. a 1.0 mm grid maps onto a 0.5 mm grid with each
    /// coarse voxel covering exactly 2x2x2 fine voxels.
    pub fn with_spacing(&self, spacing: [f64; 3]) -> Result<GridSpec> {
        let mut dims = [0usize; 3];
        let mut index_origin = [0.0; 3];
        let mut affine = self.affine;
        for axis in 0..3 {
            let extent = self.dims[axis] as f64 * self.spacing[axis];
            dims[axis] = (extent / spacing[axis]).round().max(1.0) as usize;
            let ratio = spacing[axis] / self.spacing[axis];
            // fractional source index of the new first voxel center
            index_origin[axis] = -0.5 + 0.5 * ratio;
            for row in 0..3 {
                affine[(row, axis)] *= ratio;
            }
        }
        let origin = self.voxel_to_world(index_origin);
        for row in 0..3 {
            affine[(row, 3)] = origin[row];
        }
        GridSpec::from_parts(dims, spacing, affine)
    }
}

fn column_norms(affine: &Matrix4<f64>) -> [f64; 3] {
    let mut norms = [0.0; 3];
    for (col, norm) in norms.iter_mut().enumerate() {
        *norm = (0..3).map(|row| affine[(row, col)].powi(2)).sum::<f64>().sqrt();
    }
    norms
}

/// Half-open voxel index box `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl VoxelBox {
    pub fn single(v: [usize; 3]) -> Self {
        VoxelBox {
            lo: v,
            hi: [v[0] + 1, v[1] + 1, v[2] + 1],
        }
    }

    pub fn full(dims: [usize; 3]) -> Self {
        VoxelBox { lo: [0; 3], hi: dims }
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0],
            self.hi[1] - self.lo[1],
            self.hi[2] - self.lo[2],
        ]
    }

    pub fn include(&mut self, v: [usize; 3]) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(v[a]);
            self.hi[a] = self.hi[a].max(v[a] + 1);
        }
    }

    pub fn union(&self, other: &VoxelBox) -> VoxelBox {
        let mut out = *self;
        for a in 0..3 {
            out.lo[a] = out.lo[a].min(other.lo[a]);
            out.hi[a] = out.hi[a].max(other.hi[a]);
        }
        out
    }

    /// Grow by `margin` voxels on every side, clipped to `dims`.
    pub fn expanded(&self, margin: usize, dims: [usize; 3]) -> VoxelBox {
        let mut out = *self;
        for a in 0..3 {
            out.lo[a] = out.lo[a].saturating_sub(margin);
            out.hi[a] = (out.hi[a] + margin).min(dims[a]);
        }
        out
    }
}

/// Scalar volume (probability maps, intensities, distance maps).
///
/// Values may be infinite (distance maps of empty masks) but never NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    grid: GridSpec,
    data: Vec<f64>,
}

impl Volume3D {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Data(format!(
                "buffer holds {} values but grid has {} voxels",
                data.len(),
                grid.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| v.is_nan()) {
            return Err(Error::Data(format!("NaN at voxel {:?}", grid.coords(i))));
        }
        Ok(Volume3D { grid, data })
    }

    pub fn filled(grid: GridSpec, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }
}

/// One boolean per voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    grid: GridSpec,
    bits: Vec<bool>,
}

// GridSpec holds floats, but grids are never NaN so equality is reflexive.
impl Eq for GridSpec {}

impl BinaryMask {
    pub fn new(grid: GridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::Data(format!(
                "mask holds {} bits but grid has {} voxels",
                bits.len(),
                grid.len()
            )));
        }
        Ok(BinaryMask { grid, bits })
    }

    pub fn empty(grid: GridSpec) -> Self {
        let n = grid.len();
        BinaryMask {
            grid,
            bits: vec![false; n],
        }
    }

    pub fn full(grid: GridSpec) -> Self {
        let n = grid.len();
        BinaryMask {
            grid,
            bits: vec![true; n],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let bits = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        BinaryMask { grid, bits }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.grid.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.grid.index(x, y, z);
        self.bits[i] = value;
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Tight bounding box of the foreground, `None` when empty.
    pub fn bounding_box(&self) -> Option<VoxelBox> {
        let mut bbox: Option<VoxelBox> = None;
        for i in self.foreground() {
            let v = self.grid.coords(i);
            match bbox.as_mut() {
                Some(b) => b.include(v),
                None => bbox = Some(VoxelBox::single(v)),
            }
        }
        bbox
    }

    /// Copy of the sub-block `region` on the corresponding sub-grid.
    pub fn crop(&self, region: &VoxelBox) -> BinaryMask {
        let grid = self.grid.sub_grid(region);
        let [cx, cy, cz] = region.dims();
        let mut bits = Vec::with_capacity(cx * cy * cz);
        for z in region.lo[2]..region.hi[2] {
            for y in region.lo[1]..region.hi[1] {
                let row = self.grid.index(region.lo[0], y, z);
                bits.extend_from_slice(&self.bits[row..row + cx]);
            }
        }
        BinaryMask { grid, bits }
    }

    /// Voxel-wise union; grids must match.
    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.grid.ensure_same(&other.grid)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(BinaryMask {
            grid: self.grid.clone(),
            bits,
        })
    }

    /// True when every foreground voxel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Scalar copy with foreground = 1.0 and background = 0.0.
    pub fn to_volume(&self) -> Volume3D {
        Volume3D {
            grid: self.grid.clone(),
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Binarize a probability map: a voxel is foreground iff `value >= t`.
pub fn threshold(prob: &Volume3D, t: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config(format!("threshold must lie in [0, 1], got {t}")));
    }
    Ok(BinaryMask {
        grid: prob.grid.clone(),
        bits: prob.data.iter().map(|&v| v >= t).collect(),
    })
}

/// Foreground iff the value is non-zero; used for integer label images.
pub fn nonzero(vol: &Volume3D) -> BinaryMask {
    BinaryMask {
        grid: vol.grid.clone(),
        bits: vol.data.iter().map(|&v| v != 0.0).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dims: [usize; 3]) -> GridSpec {
        GridSpec::new(dims, [1.0; 3]).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(GridSpec::new([0, 1, 1], [1.0; 3]).is_err());
        assert!(GridSpec::new([1, 1, 1], [1.0, 0.0, 1.0]).is_err());
        let mut affine = Matrix4::identity();
        affine[(0, 0)] = 2.0;
        assert!(GridSpec::from_parts([2, 2, 2], [1.0; 3], affine).is_err());
        let g = GridSpec::from_affine([2, 2, 2], affine).unwrap();
        assert_eq!(g.spacing(), [2.0, 1.0, 1.0]);
    }

    #[test]
    fn index_roundtrip() {
        let g = grid([3, 4, 5]);
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
    }

    #[test]
    fn nan_rejected() {
        let g = grid([2, 1, 1]);
        assert!(matches!(
            Volume3D::new(g.clone(), vec![0.0, f64::NAN]),
            Err(Error::Data(_))
        ));
        assert!(Volume3D::new(g, vec![0.0, f64::INFINITY]).is_ok());
    }

    #[test]
    fn threshold_cases() {
        let g = grid([2, 2, 2]);
        let zeros = Volume3D::filled(g.clone(), 0.0).unwrap();
        assert!(threshold(&zeros, 0.3).unwrap().is_empty());
        let ones = Volume3D::filled(g.clone(), 1.0).unwrap();
        assert_eq!(threshold(&ones, 0.5).unwrap().count(), 8);
        assert_eq!(threshold(&ones, 1.0).unwrap().count(), 8);

        let single = Volume3D::filled(grid([1, 1, 1]), 0.30).unwrap();
        assert!(threshold(&single, 0.30).unwrap().get(0, 0, 0));

        assert!(matches!(threshold(&ones, 1.5), Err(Error::Config(_))));
        assert!(matches!(threshold(&ones, -0.1), Err(Error::Config(_))));
    }

    #[test]
    fn crop_and_bbox() {
        let g = grid([5, 5, 5]);
        let mut m = BinaryMask::empty(g);
        m.set(1, 2, 3, true);
        m.set(3, 2, 1, true);
        let b = m.bounding_box().unwrap();
        assert_eq!(b, VoxelBox { lo: [1, 2, 1], hi: [4, 3, 4] });
        let c = m.crop(&b);
        assert_eq!(c.grid().dims(), [3, 1, 3]);
        assert_eq!(c.count(), 2);
        assert!(c.get(0, 0, 2));
        assert_eq!(c.grid().voxel_to_world([0.0; 3]), [1.0, 2.0, 1.0]);
    }

    #[test]
    fn with_spacing_aligns_field_of_view() {
        let coarse = GridSpec::new([4, 4, 4], [1.0; 3]).unwrap();
        let fine = coarse.with_spacing([0.5; 3]).unwrap();
        assert_eq!(fine.dims(), [8, 8, 8]);
        assert_eq!(fine.voxel_to_world([0.0; 3]), [-0.25; 3]);
        let aniso = GridSpec::new([8, 8, 8], [0.5; 3]).unwrap().with_spacing([1.5, 1.5, 2.0]).unwrap();
        assert_eq!(aniso.dims(), [3, 3, 2]);
    }
}
