//! Dilation by a radius in voxels, for masks and for label maps, with both
//! structuring elements.

use lesion_eval::grid::{BinaryMask, GridSpec};
use lesion_eval::morphology::{connected_components, dilate, dilate_euclidean, dilate_labels, Connectivity, DilationShape};

fn main() -> lesion_eval::Result<()> {
    let grid = GridSpec::new([9, 9, 9], [1.0; 3])?;
    let mut center = BinaryMask::empty(grid.clone());
    center.set(4, 4, 4, true);
    let mut corner = BinaryMask::empty(grid.clone());
    corner.set(0, 0, 0, true);
    println!("center voxel, radius 2: cube {} voxels, ball {} voxels", dilate(&center, 2).count(), dilate_euclidean(&center, 2).count());
    println!("corner voxel, radius 2: cube {} voxels (clipped by the grid)", dilate(&corner, 2).count());
    println!("dilate 1 twice == dilate 2: {}", dilate(&dilate(&center, 1), 1) == dilate(&center, 2));

    // two lesions five voxels apart: their grown labels meet in the middle
    let line = GridSpec::new([13, 1, 1], [1.0; 3])?;
    let m = BinaryMask::from_fn(line, |[x, _, _]| x == 3 || x == 9);
    let labels = connected_components(&m, Connectivity::TwentySix);
    for shape in [DilationShape::Chebyshev, DilationShape::Euclidean] {
        let grown = dilate_labels(&labels, 3, shape);
        println!("{shape:>9} label growth: {:?}", grown.labels());
    }
    Ok(())
}
