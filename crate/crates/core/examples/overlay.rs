//! Render one slice of a volume with reference and prediction masks blended
//! on top, and write it as a PPM image.

use lesion_eval::grid::{BinaryMask, GridSpec, Volume3D};
use lesion_eval::nifti::save_nifti;
use lesion_eval::overlay::{export_overlay, render_overlay, Axis};

fn main() -> lesion_eval::Result<()> {
    let grid = GridSpec::new([64, 64, 16], [1.0; 3])?;
    let anatomy = Volume3D::new(
        grid.clone(),
        (0..grid.len()).map(|i| { let [x, y, _] = grid.coords(i); ((x + y) % 32) as f64 }).collect(),
    )?;
    let disk = |cx: f64, cy: f64, r: f64| {
        BinaryMask::from_fn(grid.clone(), move |[x, y, _]| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
    };
    let gt = disk(30.0, 30.0, 10.0);
    let pred = disk(34.0, 30.0, 9.0);

    let img = render_overlay(&anatomy, &[gt.clone(), pred.clone()], Axis::Z, 8)?;
    println!("{}x{} image; pixel at (20,30) {:?}, (38,30) {:?}, (2,2) {:?}",
        img.width, img.height, img.pixel(20, 30), img.pixel(38, 30), img.pixel(2, 2));

    let out = std::env::temp_dir().join("lesion_eval_overlay");
    std::fs::create_dir_all(&out).expect("output dir");
    save_nifti(&anatomy, out.join("anat.nii.gz"))?;
    save_nifti(&gt, out.join("gt.nii.gz"))?;
    save_nifti(&pred, out.join("pred.nii.gz"))?;
    let ppm = out.join("slice_z8.ppm");
    export_overlay(out.join("anat.nii.gz"), &[out.join("gt.nii.gz"), out.join("pred.nii.gz")], Axis::Z, 8, &ppm)?;
    println!("wrote {}", ppm.display());

    match render_overlay(&anatomy, &[], Axis::Z, 16) {
        Err(e) => println!("slice 16 on a 16-slice volume: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
