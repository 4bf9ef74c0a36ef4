//! Binarize a probability map at the two common operating points and bring
//! a 1 mm prediction onto a 0.5 mm reference grid.

use lesion_eval::grid::{threshold, BinaryMask, GridSpec, Volume3D};
use lesion_eval::resample::resample_mask;

fn main() -> lesion_eval::Result<()> {
    let grid = GridSpec::new([20, 20, 20], [1.0; 3])?;
    // a radial probability blob: 1 at the center, falling off linearly
    let prob = Volume3D::new(
        grid.clone(),
        (0..grid.len())
            .map(|i| {
                let [x, y, z] = grid.coords(i);
                let r = ((x as f64 - 10.0).powi(2) + (y as f64 - 10.0).powi(2) + (z as f64 - 10.0).powi(2)).sqrt();
                (1.0 - r / 8.0).max(0.0)
            })
            .collect(),
    )?;
    let loose = threshold(&prob, 0.3)?;
    let strict = threshold(&prob, 0.5)?;
    println!("threshold 0.3 -> {} voxels", loose.count());
    println!("threshold 0.5 -> {} voxels (subset: {})", strict.count(), strict.is_subset_of(&loose));

    let fine = grid.with_spacing([0.5; 3])?;
    println!("1.0 mm grid {:?} -> 0.5 mm grid {:?}", grid.dims(), fine.dims());
    let mut single = BinaryMask::empty(grid.clone());
    single.set(4, 5, 6, true);
    println!("one coarse voxel covers {} fine voxels", resample_mask(&single, &fine)?.count());
    let up = resample_mask(&strict, &fine)?;
    println!("0.5-threshold mask: {} coarse voxels -> {} fine voxels", strict.count(), up.count());
    println!("same-grid resample is the identity: {}", resample_mask(&strict, &grid)? == strict);
    Ok(())
}
