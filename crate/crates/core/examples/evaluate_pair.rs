//! Evaluate one prediction/reference pair from disk: a float probability map
//! on a coarser grid against a binary reference, restricted to a brain mask.

use lesion_eval::grid::{BinaryMask, GridSpec, Volume3D};
use lesion_eval::lesion::EvalConfig;
use lesion_eval::nifti::save_nifti;
use lesion_eval::report::{csv_string, evaluate_scan, to_json, CsvTable};

fn main() -> lesion_eval::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let fine = GridSpec::new([48, 48, 32], [0.5, 0.5, 0.5])?;
    let coarse = fine.with_spacing([1.0; 3])?;

    let blob = |c: [f64; 3], r: f64| move |v: [f64; 3]| (0..3).map(|a| (v[a] - c[a]).powi(2)).sum::<f64>() <= r * r;
    let l1 = blob([6.0, 6.0, 6.0], 2.5);
    let l2 = blob([16.0, 14.0, 10.0], 2.0);
    let mm = |g: &GridSpec, i: usize| g.voxel_to_world(g.coords(i).map(|c| c as f64));

    let gt = BinaryMask::new(fine.clone(), (0..fine.len()).map(|i| l1(mm(&fine, i)) || l2(mm(&fine, i))).collect())?;
    // the model finds the first lesion confidently and the second only weakly
    let prob = Volume3D::new(
        coarse.clone(),
        (0..coarse.len())
            .map(|i| {
                let w = mm(&coarse, i);
                if l1(w) { 0.9 } else if l2(w) { 0.4 } else { 0.02 }
            })
            .collect(),
    )?;
    let brain = BinaryMask::from_fn(fine.clone(), |[x, y, z]| x > 1 && y > 1 && z > 1 && x < 46 && y < 46 && z < 30);

    let (p, g, b) = (dir.path().join("pred.nii.gz"), dir.path().join("gt.nii.gz"), dir.path().join("brain.nii.gz"));
    save_nifti(&prob, &p)?;
    save_nifti(&gt, &g)?;
    save_nifti(&brain, &b)?;

    let mut reports = Vec::new();
    for t in [0.5, 0.3] {
        let cfg = EvalConfig { prob_threshold: t, ..Default::default() };
        let r = evaluate_scan(&format!("case01_t{t}"), &p, &g, Some(&b), &cfg)?;
        println!(
            "threshold {t}: TP {} FN {}  dice {:?}  resampled {}",
            r.metrics.counts.tp, r.metrics.counts.fn_, r.metrics.dice, r.provenance.pred_resampled
        );
        reports.push(r);
    }
    println!("\n{}", csv_string(&reports, CsvTable::Combined)?);
    let json = to_json(&reports[0])?;
    println!("{}", json.lines().take(14).collect::<Vec<_>>().join("\n"));
    println!("  ...");
    Ok(())
}
