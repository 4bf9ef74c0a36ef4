//! Nearest-neighbor resampling of masks between grids.

use nalgebra::Vector4;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, GridSpec};

/// Determinant magnitude below which a source affine counts as singular.
const SINGULAR_DET: f64 = 1e-12;

/// Resample `mask` onto `target` by nearest voxel center.
///
/// Each target voxel center is mapped into the source voxel index space and
/// rounded (halves round up); centers that land outside the source grid are
/// background. For affines without shear this is the world-nearest source
/// voxel center.
pub fn resample_mask(mask: &BinaryMask, target: &GridSpec) -> Result<BinaryMask> {
    let source = mask.grid();
    if source.same_geometry(target) {
        return BinaryMask::new(target.clone(), mask.bits().to_vec());
    }
    let src_affine = source.affine();
    if src_affine.fixed_view::<3, 3>(0, 0).determinant().abs() < SINGULAR_DET {
        return Err(Error::Geometry("source affine is not invertible".into()));
    }
    let inverse = src_affine
        .try_inverse()
        .ok_or_else(|| Error::Geometry("source affine is not invertible".into()))?;
    // target voxel index -> source voxel index
    let map = inverse * target.affine();
    let [tx, ty, _] = target.dims();
    let [sx, sy, sz] = source.dims();
    let src_bits = mask.bits();

    let mut bits = vec![false; target.len()];
    if mask.is_empty() {
        return BinaryMask::new(target.clone(), bits);
    }
    bits.par_chunks_mut(tx * ty).enumerate().for_each(|(z, slab)| {
        for y in 0..ty {
            for x in 0..tx {
                let p = map * Vector4::new(x as f64, y as f64, z as f64, 1.0);
                let ix = (p[0] + 0.5).floor();
                let iy = (p[1] + 0.5).floor();
                let iz = (p[2] + 0.5).floor();
                if ix < 0.0 || iy < 0.0 || iz < 0.0 {
                    continue;
                }
                let (ix, iy, iz) = (ix as usize, iy as usize, iz as usize);
                if ix < sx && iy < sy && iz < sz {
                    slab[x + tx * y] = src_bits[ix + sx * (iy + sy * iz)];
                }
            }
        }
    });
    BinaryMask::new(target.clone(), bits)
}
