//! Build a synthetic phantom with known answers and check the evaluator
//! against them, the same way the test suite does.

use lesion_eval::evaluate_masks;
use lesion_eval::lesion::EvalConfig;
use lesion_eval::phantom::{generate_phantom, Perturbation, PhantomGrid, PhantomSpec};

fn main() -> lesion_eval::Result<()> {
    let spec: PhantomSpec = serde_json::from_str(
        r#"{
            "grid": {"dims": [64, 64, 40], "spacing": [0.5, 0.5, 1.0]},
            "lesions": [
                {"shape": "sphere", "center_mm": [8, 8, 10], "radius_mm": 3},
                {"shape": "box", "center_mm": [22, 20, 25], "extents_mm": [4, 6, 3]}
            ],
            "noise_seed": 11,
            "perturbation": {"erode_fraction": 0.2, "extra_components": 2}
        }"#,
    )
    .expect("valid spec");
    let ph = generate_phantom(&spec)?;
    let got = evaluate_masks(&ph.pred, &ph.gt, &EvalConfig::default(), None)?;
    println!("reference lesion sizes {:?}", ph.expected.gt_component_sizes);
    println!("expected confusion {:?}", ph.expected.confusion);
    println!("measured confusion {:?}", got.voxel_counts);
    println!("expected counts {:?}, measured {:?}", ph.expected.lesion_counts, got.counts);

    // seeded random phantoms are reproducible
    let grid = PhantomGrid { dims: [48, 48, 32], spacing: [0.7, 0.7, 0.7], origin: [0.0; 3] };
    let mut agree = 0;
    for seed in 0..5 {
        let mut spec = PhantomSpec::random(grid.clone(), 4, seed)?;
        spec.perturbation = Some(Perturbation { shift_voxels: [seed as i64 % 3, 1, 0], ..Default::default() });
        let ph = generate_phantom(&spec)?;
        let m = evaluate_masks(&ph.pred, &ph.gt, &EvalConfig::default(), None)?;
        let ok = m.voxel_counts == ph.expected.confusion && m.dice == ph.expected.dice;
        agree += ok as usize;
        println!("seed {seed}: {} lesions, dice {:?}, oracle agrees: {ok}", ph.expected.gt_component_count, m.dice);
    }
    println!("{agree}/5 random phantoms agree");
    Ok(())
}
