//! Mask exchange layout shared with external segmenters.
//!
//! One directory per run holding `{case_id}_{role}.nii.gz` for each of the
//! three roles, stored as uint8 0/1 volumes on the preprocessed grid.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nifti;
use crate::volume::{MaskRole, MaskVolume};

pub fn mask_path(dir: &Path, case_id: &str, role: MaskRole) -> PathBuf {
    dir.join(format!("{case_id}_{}.nii.gz", role.as_str()))
}

/// The three masks of one case, in (kt_lax, kt_strict, tumor) order.
#[derive(Clone, Debug)]
pub struct CaseMasks {
    pub kt_lax: MaskVolume,
    pub kt_strict: MaskVolume,
    pub tumor: MaskVolume,
}

impl CaseMasks {
    pub fn new(kt_lax: MaskVolume, kt_strict: MaskVolume, tumor: MaskVolume) -> Result<Self> {
        let expect = [MaskRole::KtLax, MaskRole::KtStrict, MaskRole::Tumor];
        for (m, role) in [&kt_lax, &kt_strict, &tumor].into_iter().zip(expect) {
            if m.role() != role {
                return Err(Error::Inconsistent(format!(
                    "mask in the {role} slot has role {}",
                    m.role()
                )));
            }
        }
        if kt_lax.dims() != kt_strict.dims() || kt_lax.dims() != tumor.dims() {
            return Err(Error::Inconsistent(format!(
                "mask dimensions differ: kt_lax {}, kt_strict {}, tumor {}",
                kt_lax.dims(),
                kt_strict.dims(),
                tumor.dims()
            )));
        }
        Ok(Self {
            kt_lax,
            kt_strict,
            tumor,
        })
    }
}

pub fn load_case_masks(dir: impl AsRef<Path>, case_id: &str) -> Result<CaseMasks> {
    let dir = dir.as_ref();
    let load = |role: MaskRole| -> Result<MaskVolume> {
        let path = mask_path(dir, case_id, role);
        if !path.is_file() {
            return Err(Error::MissingMask {
                case_id: case_id.to_string(),
                role,
            });
        }
        nifti::load_mask(&path, role)
    };
    CaseMasks::new(load(MaskRole::KtLax)?, load(MaskRole::KtStrict)?, load(MaskRole::Tumor)?)
}

pub fn save_case_masks(dir: impl AsRef<Path>, case_id: &str, masks: &CaseMasks) -> Result<()> {
    let dir = dir.as_ref();
    for m in [&masks.kt_lax, &masks.kt_strict, &masks.tumor] {
        nifti::save_volume(m, mask_path(dir, case_id, m.role()))?;
    }
    Ok(())
}

/// Case ids that have at least one mask file in `dir`, sorted.
pub fn discover_mask_cases(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let mut ids = std::collections::BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io_at(dir, e))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        let Some(stem) = name.strip_suffix(".nii.gz") else {
            continue;
        };
        for role in MaskRole::ALL {
            if let Some(id) = stem.strip_suffix(&format!("_{}", role.as_str())) {
                ids.insert(id.to_string());
            }
        }
    }
    Ok(ids.into_iter().collect())
}
