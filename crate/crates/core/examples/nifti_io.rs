//! Write a mask and a probability map as NIfTI (plain and gzip), read them
//! back, and show what the header carried.

use lesion_eval::grid::{nonzero, BinaryMask, GridSpec, Volume3D};
use lesion_eval::nifti::{read_nifti, save_nifti};

fn main() -> lesion_eval::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let grid = GridSpec::with_origin([32, 32, 20], [1.5, 1.5, 2.0], [-24.0, -24.0, -20.0])?;
    let mask = BinaryMask::from_fn(grid.clone(), |[x, y, z]| {
        let d2 = (x as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2) + (2.0 * (z as f64 - 10.0)).powi(2);
        d2 < 30.0
    });
    let prob = Volume3D::new(
        grid.clone(),
        mask.bits().iter().map(|&b| if b { 0.8 } else { 0.05 }).collect(),
    )?;

    for name in ["mask.nii", "mask.nii.gz"] {
        let path = dir.path().join(name);
        save_nifti(&mask, &path)?;
        let img = read_nifti(&path)?;
        let size = std::fs::metadata(&path).expect("written").len();
        println!(
            "{name:<12} {size:>7} bytes  {:?}  spacing {:?}  round-trip exact: {}",
            img.datatype,
            img.volume.grid().spacing(),
            nonzero(&img.volume) == mask
        );
    }

    let path = dir.path().join("prob.nii.gz");
    save_nifti(&prob, &path)?;
    let img = read_nifti(&path)?;
    println!(
        "prob.nii.gz  {:?}, first voxel {} (stored as float32), origin {:?}",
        img.datatype,
        img.volume.data()[0],
        img.volume.grid().voxel_to_world([0.0; 3])
    );
    Ok(())
}
