//! Run a manifest of scans in parallel and write the per-scan tables, the
//! aggregate and the error list. A missing file is reported, not fatal.

use lesion_eval::grid::{BinaryMask, GridSpec};
use lesion_eval::nifti::save_nifti;
use lesion_eval::{evaluate_batch, BatchManifest, EvalConfig};

fn main() -> lesion_eval::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let grid = GridSpec::new([24, 24, 24], [0.8, 0.8, 0.8])?;
    let cube = |lo: usize, side: usize| BinaryMask::from_fn(grid.clone(), move |v| v.iter().all(|&c| c >= lo && c < lo + side));

    save_nifti(&cube(6, 6), d.join("gt.nii.gz"))?;
    save_nifti(&cube(6, 6), d.join("perfect.nii.gz"))?;
    save_nifti(&cube(7, 5), d.join("under.nii.gz"))?;
    save_nifti(&BinaryMask::empty(grid.clone()), d.join("empty.nii.gz"))?;
    std::fs::write(
        d.join("manifest.csv"),
        "scan_id,pred_path,gt_path\n\
         perfect,perfect.nii.gz,gt.nii.gz\n\
         under,under.nii.gz,gt.nii.gz\n\
         empty,empty.nii.gz,gt.nii.gz\n\
         broken,nowhere.nii.gz,gt.nii.gz\n",
    )
    .expect("manifest written");

    let manifest = BatchManifest::from_path(d.join("manifest.csv"))?;
    let batch = evaluate_batch(&manifest, &EvalConfig::default(), 2)?;
    let out = d.join("out");
    for path in lesion_eval::batch::write_batch_outputs(&batch, &out)? {
        println!("wrote {}", path.file_name().unwrap().to_string_lossy());
    }
    for f in ["combined.csv", "aggregate.csv", "errors.csv"] {
        println!("\n--- {f}\n{}", std::fs::read_to_string(out.join(f)).expect("written").trim_end());
    }
    Ok(())
}
