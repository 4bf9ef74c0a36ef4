//! Distance transform, Hausdorff distance and HD95 on an anisotropic grid,
//! checked against the brute-force boundary oracle.

use lesion_eval::grid::{BinaryMask, GridSpec};
use lesion_eval::morphology::distance_transform;
use lesion_eval::phantom::brute_hd;
use lesion_eval::voxel_metrics::{hausdorff, hd95, hd_percentile};

fn main() -> lesion_eval::Result<()> {
    let grid = GridSpec::new([24, 24, 16], [1.5, 1.5, 2.0])?;
    let gt = BinaryMask::from_fn(grid.clone(), |[x, y, z]| (6..14).contains(&x) && (6..14).contains(&y) && (4..10).contains(&z));
    // the same box moved one voxel in x, plus a stray voxel
    let mut pred = BinaryMask::from_fn(grid.clone(), |[x, y, z]| (7..15).contains(&x) && (6..14).contains(&y) && (4..10).contains(&z));
    pred.set(20, 20, 12, true);

    let d = distance_transform(&gt);
    println!("distance from voxel (20,20,12) to the reference: {:.4} mm", d.get(20, 20, 12));

    let h = hausdorff(&pred, &gt)?;
    let h95 = hd95(&pred, &gt)?;
    println!("Hausdorff {h:.4} mm (oracle {:.4})", brute_hd(&pred, &gt, 1.0)?);
    println!("HD95      {h95:.4} mm (oracle {:.4})", brute_hd(&pred, &gt, 0.95)?);
    println!("HD50      {:.4} mm", hd_percentile(&pred, &gt, 50.0)?);

    let empty = BinaryMask::empty(grid);
    println!("empty prediction: HD95 = {}", hd95(&empty, &gt)?);
    println!("both empty:       HD95 = {}", hd95(&empty, &empty)?);
    Ok(())
}
