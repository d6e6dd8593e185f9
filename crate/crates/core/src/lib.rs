//! Kidney and kidney-tumor CT segmentation post-processing.
//!
//! The pipeline normalises each CT slice and crops it around the patient's
//! body, combines three binary model outputs into a label volume, removes
//! implausible 3D regions and scores predictions against ground truth.
//! Segmentation models themselves live outside this crate; they exchange
//! masks through NIfTI files (see [`exchange`]).

pub mod ensemble;
pub mod error;
pub mod exchange;
pub mod metrics;
pub mod nifti;
pub mod par;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod validation;
pub mod volume;

pub use ensemble::{combine, combine_voxel};
pub use error::{Error, Result};
pub use exchange::{load_case_masks, CaseMasks};
pub use metrics::{aggregate, evaluate_case, prf, Phase};
pub use preprocess::{body_mask, preprocess_case, PreprocessedCase};
pub use validation::{volumetric_validate, ValidationRules};
pub use volume::{CtVolume, Dims, LabelVolume, MaskRole, MaskVolume, Spacing};
