//! Lesion-level detection and scoring: small-lesion removal, dilation-based
//! matching, per-lesion Dice/HD95 and the fixed penalty for unmatched lesions.

use lesion_eval::grid::{BinaryMask, GridSpec};
use lesion_eval::lesion::{lesion_wise_dice, lesion_wise_hd95, match_lesions, EvalConfig};

fn cube(lo: [usize; 3], side: usize) -> impl Fn([usize; 3]) -> bool {
    move |v| (0..3).all(|a| v[a] >= lo[a] && v[a] < lo[a] + side)
}

fn main() -> lesion_eval::Result<()> {
    let grid = GridSpec::new([40, 24, 24], [1.0; 3])?;
    let a = cube([2, 2, 2], 4);
    let b = cube([14, 2, 2], 3);
    let c = cube([26, 10, 10], 4);
    let speck = |v: [usize; 3]| v == [36, 20, 20];

    // reference: lesions A, B, C plus a 1-voxel speck that falls below the size floor
    let gt = BinaryMask::from_fn(grid.clone(), |v| a(v) || b(v) || c(v) || speck(v));
    // prediction: A exact, B shifted three voxels (it only
    // meets its reference once both are dilated),
    // C missed, and one spurious blob
    let b_shift = cube([17, 2, 2], 3);
    let spurious = cube([4, 16, 16], 3);
    let pred = BinaryMask::from_fn(grid, |v| a(v) || b_shift(v) || spurious(v));

    let cfg = EvalConfig::default();
    let m = match_lesions(&pred, &gt, &cfg)?;
    println!("TP {}  FP {}  FN {}  (speck ignored: {} reference lesions)", m.tp, m.fp, m.fn_, m.gt_count());
    for rec in &m.gt_lesions {
        println!(
            "  lesion {}: matched {:?}  dice {:.4}  hd95 {} mm",
            rec.gt_label, rec.matched_pred_labels, rec.dice, rec.hd95_mm
        );
    }
    println!("spurious prediction components: {:?}", m.fp_pred_labels);
    println!("lesion-wise Dice {:.4}", lesion_wise_dice(&m).unwrap_or(f64::NAN));
    println!("lesion-wise HD95 {:.4} mm", lesion_wise_hd95(&m, &cfg).unwrap_or(f64::NAN));

    // without dilation the shifted lesion no longer touches its reference
    let strict = EvalConfig { dilation_voxels: 0, ..cfg };
    let m0 = match_lesions(&pred, &gt, &strict)?;
    println!("no dilation: TP {}  FP {}  FN {}", m0.tp, m0.fp, m0.fn_);
    Ok(())
}
