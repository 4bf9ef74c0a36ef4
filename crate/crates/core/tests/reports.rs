mod common;

use std::fs;

use lesion_eval::batch::{evaluate_batch, write_batch_outputs, BatchManifest};
use lesion_eval::grid::{BinaryMask, GridSpec};
use lesion_eval::lesion::EvalConfig;
use lesion_eval::phantom::{generate_phantom, LesionShape, Perturbation, PhantomGrid, PhantomSpec};
use lesion_eval::report::{evaluate_pair, evaluate_scan, to_json, Binarization, ScanReport, SCAN_REPORT_SCHEMA};
use lesion_eval::Error;
use serde_json::Value;
use tempfile::TempDir;

use common::*;

fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(SCAN_REPORT_SCHEMA).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(report: &ScanReport) {
    let v: Value = serde_json::from_str(&to_json(report).unwrap()).unwrap();
    let errors: Vec<String> = validator().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", report.scan_id);
}

fn rod(g: &GridSpec, xs: std::ops::Range<usize>) -> BinaryMask {
    BinaryMask::from_fn(g.clone(), |[x, y, z]| y == 2 && z == 2 && xs.contains(&x))
}

#[test]
fn identical_files_score_perfectly() {
    let dir = TempDir::new().unwrap();
    let g = grid([30, 20, 20], [1.0; 3]);
    let gt = union(&[&cube(&g, [2, 2, 2], 4), &cube(&g, [20, 10, 10], 3)]);
    let p = write_mask(dir.path(), "sub-01.nii.gz", &gt);
    let r = evaluate_pair(&p, &p, &EvalConfig::default()).unwrap();
    assert_eq!(r.scan_id, "sub-01");
    assert_eq!(r.metrics.dice, Some(1.0));
    assert_eq!(r.metrics.hd95_mm, Some(0.0));
    assert_eq!(r.metrics.lesion_wise_dice, Some(1.0));
    assert_eq!(r.metrics.lesion_wise_hd95_mm, Some(0.0));
    assert_eq!((r.metrics.counts.fp, r.metrics.counts.fn_, r.metrics.counts.tp), (0, 0, 2));
    assert!(!r.provenance.pred_resampled);
    assert_eq!(r.provenance.pred.sha256, r.provenance.gt.sha256);
    assert_valid(&r);
}

#[test]
fn phantom_report_matches_construction() {
    let dir = TempDir::new().unwrap();
    let mut determined = 0;
    for (k, spacing) in STUDY_SPACINGS.iter().cycle().take(9).enumerate() {
        let mut spec = PhantomSpec::random(
            PhantomGrid {
                dims: [48, 40, 36],
                spacing: *spacing,
                origin: [0.0; 3],
            },
            5,
            k as u64 + 20,
        )
        .unwrap();
        spec.perturbation = Some(Perturbation {
            erode_fraction: 0.3,
            shift_voxels: [1, 0, -1],
            extra_components: 2,
        });
        let ph = generate_phantom(&spec).unwrap();
        let pred = write_mask(dir.path(), &format!("pred{k}.nii"), &ph.pred);
        let gt = write_mask(dir.path(), &format!("gt{k}.nii"), &ph.gt);
        let r = evaluate_pair(&pred, &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.metrics.voxel_counts, ph.expected.confusion);
        assert_eq!(r.metrics.dice, ph.expected.dice);
        // lesions placed too close together leave the counts open
        if let Some(want) = ph.expected.lesion_counts {
            assert_eq!(
                (r.metrics.counts.tp, r.metrics.counts.fp, r.metrics.counts.fn_),
                (want.tp, want.fp, want.fn_)
            );
            determined += 1;
        }
        assert_valid(&r);
    }
    assert!(determined > 0);
}

#[test]
fn report_reproduces_from_its_own_config() {
    let dir = TempDir::new().unwrap();
    let g = grid([24, 24, 24], [1.5, 1.5, 2.0]);
    let gt = union(&[&cube(&g, [2, 2, 2], 5), &cube(&g, [15, 15, 15], 3)]);
    let pred = union(&[&cube(&g, [3, 2, 2], 5), &cube(&g, [9, 17, 2], 2)]);
    let gp = write_mask(dir.path(), "gt.nii.gz", &gt);
    let pp = write_mask(dir.path(), "pred.nii.gz", &pred);
    let cfg = EvalConfig {
        dilation_voxels: 1,
        min_lesion_size: 3,
        hd_percentile: 90.0,
        ..Default::default()
    };
    let first = to_json(&evaluate_scan("s", &pp, &gp, None, &cfg).unwrap()).unwrap();
    let parsed: ScanReport = serde_json::from_str(&first).unwrap();
    let again = evaluate_scan(
        &parsed.scan_id,
        &parsed.provenance.pred.path,
        &parsed.provenance.gt.path,
        None,
        &parsed.config,
    )
    .unwrap();
    assert_eq!(to_json(&again).unwrap(), first);
}

#[test]
fn hashes_follow_file_bytes() {
    let dir = TempDir::new().unwrap();
    let g = grid([10, 10, 10], [1.0; 3]);
    let m = cube(&g, [2, 2, 2], 4);
    let a = write_mask(dir.path(), "a.nii", &m);
    let b = write_mask(dir.path(), "b.nii", &m);
    let mut changed = m.clone();
    changed.set(9, 9, 9, true);
    let c = write_mask(dir.path(), "c.nii", &changed);
    let cfg = EvalConfig::default();
    let ra = evaluate_scan("x", &a, &a, None, &cfg).unwrap();
    let rb = evaluate_scan("x", &b, &a, None, &cfg).unwrap();
    let rc = evaluate_scan("x", &c, &a, None, &cfg).unwrap();
    assert_eq!(ra.provenance.pred.sha256, rb.provenance.pred.sha256);
    assert_ne!(ra.provenance.pred.sha256, rc.provenance.pred.sha256);
}

#[test]
fn empty_and_undefined_values_serialize() {
    let dir = TempDir::new().unwrap();
    let g = grid([12, 12, 12], [1.0; 3]);
    let empty = write_mask(dir.path(), "empty.nii.gz", &BinaryMask::empty(g.clone()));
    let gt = write_mask(dir.path(), "gt.nii.gz", &cube(&g, [3, 3, 3], 3));

    let both = evaluate_scan("both", &empty, &empty, None, &EvalConfig::default()).unwrap();
    assert_eq!(both.metrics.dice, None);
    assert_eq!(both.metrics.sensitivity, None);
    assert_eq!(both.metrics.lesion_wise_dice, None);
    assert_eq!(both.metrics.hd95_mm, Some(0.0));
    let v: Value = serde_json::from_str(&to_json(&both).unwrap()).unwrap();
    assert!(v["dice"].is_null() && v["lesion_wise_hd95_mm"].is_null());
    assert_valid(&both);

    let one = evaluate_scan("one", &empty, &gt, None, &EvalConfig::default()).unwrap();
    assert_eq!(one.metrics.hd95_mm, Some(f64::INFINITY));
    assert_valid(&one);
}

#[test]
fn probability_maps_and_brain_masks() {
    let dir = TempDir::new().unwrap();
    let g = grid([16, 16, 8], [1.0; 3]);
    let gt = cube(&g, [4, 4, 2], 4);
    // 0.4 inside the reference cube, 0.9 on a shifted copy
    let prob = lesion_eval::Volume3D::new(
        g.clone(),
        (0..g.len())
            .map(|i| {
                let [x, y, z] = g.coords(i);
                if (6..10).contains(&x) && (4..8).contains(&y) && (2..6).contains(&z) {
                    0.9
                } else if gt.bits()[i] {
                    0.4
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .unwrap();
    let pp = dir.path().join("prob.nii.gz");
    lesion_eval::nifti::save_nifti(&prob, &pp).unwrap();
    let gp = write_mask(dir.path(), "gt.nii.gz", &gt);

    let at = |t: f64| {
        let cfg = EvalConfig {
            prob_threshold: t,
            ..Default::default()
        };
        evaluate_scan("p", &pp, &gp, None, &cfg).unwrap()
    };
    let (lo, hi) = (at(0.3), at(0.5));
    assert_eq!(lo.metrics.sensitivity, Some(1.0));
    assert_eq!(hi.metrics.sensitivity, Some(0.5));
    assert_eq!(hi.provenance.pred.binarization, Binarization::Threshold { at: 0.5 });
    assert_eq!(hi.provenance.gt.binarization, Binarization::Nonzero);

    // a brain mask covering only the left half shrinks the TN count
    let brain = write_mask(dir.path(), "brain.nii.gz", &BinaryMask::from_fn(g.clone(), |[x, _, _]| x < 8));
    let r = evaluate_scan("p", &pp, &gp, Some(&brain), &EvalConfig::default()).unwrap();
    assert_eq!(r.metrics.voxel_counts.total(), (g.len() / 2) as u64);
    assert!(r.provenance.brain_mask.is_some());
    assert_eq!(r.metrics.hd95_mm, hi.metrics.hd95_mm);
    assert_valid(&r);
}

#[test]
fn coarse_prediction_is_resampled() {
    let dir = TempDir::new().unwrap();
    let coarse = grid([8, 8, 8], [1.0; 3]);
    let fine = coarse.with_spacing([0.5; 3]).unwrap();
    let pc = cube(&coarse, [2, 2, 2], 3);
    let gf = lesion_eval::resample::resample_mask(&pc, &fine).unwrap();
    assert_eq!(gf.count(), 27 * 8);
    let pp = write_mask(dir.path(), "pred.nii.gz", &pc);
    let gp = write_mask(dir.path(), "gt.nii.gz", &gf);
    let r = evaluate_pair(&pp, &gp, &EvalConfig::default()).unwrap();
    assert!(r.provenance.pred_resampled);
    assert_eq!(r.provenance.pred.grid.spacing, [1.0; 3]);
    assert_eq!(r.provenance.eval_grid.dims, [16, 16, 16]);
    assert_eq!(r.metrics.dice, Some(1.0));
    assert_valid(&r);
}

#[test]
fn errors_carry_scan_ids() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.nii");
    let err = evaluate_scan("s7", &missing, &missing, None, &EvalConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Scan { ref scan_id, .. } if scan_id == "s7"));
    assert!(!err.is_config());

    let bad = EvalConfig {
        prob_threshold: 2.0,
        ..Default::default()
    };
    let err = evaluate_scan("s8", &missing, &missing, None, &bad).unwrap_err();
    assert!(err.is_config());

    let g = grid([4, 4, 4], [1.0; 3]);
    let a = write_mask(dir.path(), "a.nii", &BinaryMask::empty(g));
    fs::write(dir.path().join("junk.nii"), b"not a nifti file").unwrap();
    let err = evaluate_scan("s9", &dir.path().join("junk.nii"), &a, None, &EvalConfig::default()).unwrap_err();
    assert!(err.to_string().contains("sizeof_hdr"), "{err}");
}

#[test]
fn batch_means_and_errors() {
    let dir = TempDir::new().unwrap();
    let g = grid([20, 5, 5], [1.0; 3]);
    write_mask(dir.path(), "gt.nii", &rod(&g, 0..10));
    // overlap 4 of 10 + 10 voxels -> 0.4; overlap 8 -> 0.8
    write_mask(dir.path(), "p04.nii", &rod(&g, 6..16));
    write_mask(dir.path(), "p08.nii", &rod(&g, 2..12));
    write_mask(dir.path(), "empty.nii", &BinaryMask::empty(g.clone()));
    let manifest = write_manifest(
        dir.path(),
        &[
            ("a", "p04.nii", "gt.nii"),
            ("b", "p08.nii", "gt.nii"),
            ("blank", "empty.nii", "empty.nii"),
            ("lost", "nowhere.nii", "gt.nii"),
        ],
    );
    let m = BatchManifest::from_path(&manifest).unwrap();
    let batch = evaluate_batch(&m, &EvalConfig::default(), 2).unwrap();
    assert_eq!(batch.reports.len(), 3);
    assert_eq!(batch.errors.len(), 1);
    assert_eq!(batch.errors[0].scan_id, "lost");
    assert!(batch.has_errors());

    let dice = &batch.aggregate.dice;
    assert!((dice.mean.unwrap() - 0.6).abs() < 1e-12);
    assert_eq!((dice.included, dice.excluded_undefined), (2, 1));
    assert_eq!(batch.aggregate.n_scans, 4);
    assert_eq!(batch.aggregate.n_failed, 1);
    assert!(batch.aggregate.hd95_mm.infinite_scans.is_empty());

    let out = dir.path().join("out");
    let files = write_batch_outputs(&batch, &out).unwrap();
    assert_eq!(files.len(), 7);
    let combined = fs::read_to_string(out.join("combined.csv")).unwrap();
    assert_eq!(
        combined.lines().next().unwrap(),
        "scan_id,tp,fp,fn,sensitivity,specificity,dice,lesion_wise_dice,hd95_mm,lesion_wise_hd95_mm"
    );
    assert!(combined.contains("\nblank,0,0,0,,1.0,,,0.0,\n"), "{combined}");
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(errors.starts_with("scan_id,message\nlost,"));
    let json: Value = serde_json::from_str(&fs::read_to_string(out.join("batch_report.json")).unwrap()).unwrap();
    for r in json["reports"].as_array().unwrap() {
        assert!(validator().is_valid(r));
    }
}

#[test]
fn perfect_batch_and_threshold_override() {
    let dir = TempDir::new().unwrap();
    let g = grid([12, 12, 12], [0.5; 3]);
    let m = cube(&g, [2, 2, 2], 5);
    write_mask(dir.path(), "m.nii.gz", &m);
    let text = "scan_id,pred_path,gt_path,prob_threshold\na,m.nii.gz,m.nii.gz,\nb,m.nii.gz,m.nii.gz,0.3\nc,m.nii.gz,m.nii.gz,\n";
    let path = dir.path().join("manifest.csv");
    fs::write(&path, text).unwrap();
    let batch = evaluate_batch(&BatchManifest::from_path(&path).unwrap(), &EvalConfig::default(), 3).unwrap();
    assert_eq!(batch.aggregate.dice.mean, Some(1.0));
    assert_eq!(batch.aggregate.lesion_wise_dice.mean, Some(1.0));
    assert_eq!(batch.reports[1].config.prob_threshold, 0.3);
    assert_eq!(batch.reports[0].config.prob_threshold, 0.5);
    assert!(matches!(
        evaluate_batch(&BatchManifest::from_path(&path).unwrap(), &EvalConfig::default(), 0),
        Err(Error::Config(_))
    ));
}

#[test]
fn phantom_specs_parse_from_json() {
    let spec: PhantomSpec = serde_json::from_str(
        r#"{"grid": {"dims": [20, 20, 20], "spacing": [1, 1, 1]},
            "lesions": [{"shape": "sphere", "center_mm": [10, 10, 10], "radius_mm": 2.5}]}"#,
    )
    .unwrap();
    assert!(matches!(spec.lesions[0], LesionShape::Sphere { .. }));
    let ph = generate_phantom(&spec).unwrap();
    assert!(ph.expected.identical);
}
