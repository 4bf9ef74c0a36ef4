//! Label lesions under different connectivities, drop small ones, and
//! cross-check against the flood-fill oracle.

use lesion_eval::grid::{BinaryMask, GridSpec};
use lesion_eval::morphology::{connected_components, filter_small, Connectivity};
use lesion_eval::phantom::brute_components;

fn main() -> lesion_eval::Result<()> {
    let grid = GridSpec::new([12, 12, 6], [1.0; 3])?;
    // a 3x3x3 cube, a diagonal staircase, and a lone voxel
    let mask = BinaryMask::from_fn(grid, |[x, y, z]| {
        let cube = (1..4).contains(&x) && (1..4).contains(&y) && (1..4).contains(&z);
        let stairs = (6..11).contains(&x) && y == x && z == x - 6;
        let speck = [x, y, z] == [10, 2, 1];
        cube || stairs || speck
    });

    for conn in [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix] {
        let labels = connected_components(&mask, conn);
        let oracle = brute_components(&mask, conn)?;
        println!(
            "{conn:>2}-connectivity: {} components, sizes {:?} (flood fill agrees: {})",
            labels.count(),
            labels.sizes(),
            labels.labels() == oracle.labels()
        );
    }

    let labels = connected_components(&mask, Connectivity::TwentySix);
    let kept = filter_small(&labels, 5);
    println!("after dropping components under 5 voxels: sizes {:?}", kept.sizes());
    Ok(())
}
