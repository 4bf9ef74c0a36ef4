#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use lesion_eval::grid::{BinaryMask, GridSpec};
use lesion_eval::nifti::save_nifti;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const STUDY_SPACINGS: [[f64; 3]; 3] = [[0.5, 0.5, 0.5], [1.0, 1.0, 1.0], [1.5, 1.5, 2.0]];

pub fn grid(dims: [usize; 3], spacing: [f64; 3]) -> GridSpec {
    GridSpec::new(dims, spacing).unwrap()
}

pub fn cube(g: &GridSpec, lo: [usize; 3], side: usize) -> BinaryMask {
    BinaryMask::from_fn(g.clone(), |v| (0..3).all(|a| v[a] >= lo[a] && v[a] < lo[a] + side))
}

pub fn union(masks: &[&BinaryMask]) -> BinaryMask {
    let mut out = BinaryMask::empty(masks[0].grid().clone());
    for m in masks {
        out = out.union(m).unwrap();
    }
    out
}

/// A few random boxes plus sparse salt noise; may come out empty.
pub fn random_mask(rng: &mut ChaCha8Rng, g: &GridSpec, max_boxes: usize, noise: f64) -> BinaryMask {
    let dims = g.dims();
    let boxes: Vec<([usize; 3], [usize; 3])> = (0..rng.random_range(0..=max_boxes))
        .map(|_| {
            let lo = dims.map(|d| rng.random_range(0..d));
            let hi = [0, 1, 2].map(|a| (lo[a] + rng.random_range(1..=dims[a].div_ceil(2).max(1))).min(dims[a]));
            (lo, hi)
        })
        .collect();
    let p = rng.random_range(0.0..=noise);
    BinaryMask::from_fn(g.clone(), |v| {
        let in_box = boxes.iter().any(|(lo, hi)| (0..3).all(|a| v[a] >= lo[a] && v[a] < hi[a]));
        in_box || rng.random_bool(p)
    })
}

pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> [usize; 3] {
    [0, 1, 2].map(|_| rng.random_range(1..=max))
}

/// `scan_id,pred_path,gt_path` rows written next to the files.
pub fn write_manifest(dir: &Path, rows: &[(&str, &str, &str)]) -> PathBuf {
    let mut text = String::from("scan_id,pred_path,gt_path\n");
    for (id, p, g) in rows {
        text.push_str(&format!("{id},{p},{g}\n"));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, text).unwrap();
    path
}

pub fn write_mask(dir: &Path, name: &str, m: &BinaryMask) -> PathBuf {
    let path = dir.join(name);
    save_nifti(m, &path).unwrap();
    path
}

/// The four constructed lesion-wise cases: `(name, pred, gt, expected
/// lesion-wise Dice, expected lesion-wise HD95)` under default settings.
pub fn lesion_hand_cases() -> Vec<(&'static str, BinaryMask, BinaryMask, f64, f64)> {
    let g = grid([48, 24, 24], [1.0; 3]);
    let a = cube(&g, [3, 3, 3], 3);
    let b = cube(&g, [30, 12, 12], 3);

    // a 3-cube shifted by two voxels: the pooled boundary distances are
    // 18 zeros, 16 ones and 18 twos, so the 95th percentile is exactly 2
    let shifted = cube(&g, [5, 3, 3], 3);

    vec![
        ("perfect single lesion", a.clone(), a.clone(), 1.0, 0.0),
        ("perfect lesion plus spurious prediction", union(&[&a, &b]), a.clone(), 0.5, 187.0),
        ("one perfect lesion, one missed", a.clone(), union(&[&a, &b]), 0.5, 187.0),
        // overlap 9 of 27 voxels: lesion Dice 18/54, averaged with the miss
        ("hd95 2 mm lesion plus a miss", shifted, union(&[&a, &b]), (18.0 / 54.0) / 2.0, 188.0),
    ]
}
