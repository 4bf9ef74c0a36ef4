//! Voxel-wise and lesion-wise evaluation of 3D binary segmentations.
//!
//! Inputs are NIfTI-1 volumes; predictions may be probability maps. Voxel
//! metrics (sensitivity, specificity, Dice, HD95) run on the masks as
//! given, lesion metrics (TP/FP/FN, lesion-wise Dice and HD95) on
//! size-filtered, dilated connected components. Everything is
//! deterministic: reports are byte-identical across thread counts.

pub mod batch;
pub mod error;
pub mod grid;
pub mod lesion;
pub mod morphology;
pub mod nifti;
pub mod overlay;
pub mod phantom;
pub mod report;
pub mod resample;
pub mod voxel_metrics;

pub use batch::{evaluate_batch, BatchManifest, BatchReport};
pub use error::{Error, Result};
pub use grid::{BinaryMask, GridSpec, Volume3D};
pub use lesion::EvalConfig;
pub use report::{evaluate_masks, evaluate_pair, ScanReport};
