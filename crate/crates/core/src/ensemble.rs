//! Logical ensemble of the three segmenter masks.
//!
//! Per voxel, with `A` = lax kidney+tumor, `B` = strict kidney+tumor and
//! `C` = tumor-only: `label = (A & B) + (A & C)`. The lax mask gates
//! everything; 2 requires all three masks.

use crate::error::Result;
use crate::exchange::CaseMasks;
use crate::par;
use crate::volume::LabelVolume;

/// Label for one voxel.
#[inline]
pub const fn combine_voxel(lax: u8, strict: u8, tumor: u8) -> u8 {
    (lax & strict) + (lax & tumor)
}

/// Side statistics of a combination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnsembleDiagnostics {
    /// Voxels with lax=1, strict=0, tumor=1; they become kidney under the
    /// literal sum even though only the tumor model fired there.
    pub lax_tumor_only: usize,
}

pub fn combine(masks: &CaseMasks) -> Result<LabelVolume> {
    combine_with_diagnostics(masks).map(|(v, _)| v)
}

pub fn combine_with_diagnostics(masks: &CaseMasks) -> Result<(LabelVolume, EnsembleDiagnostics)> {
    let dims = masks.kt_lax.dims();
    let (a, b, c) = (masks.kt_lax.data(), masks.kt_strict.data(), masks.tumor.data());
    let plane = dims.slice_len();
    let mut out = vec![0u8; dims.len()];
    par::for_each_chunk_mut(&mut out, plane, |z, chunk| {
        let off = z * plane;
        for (i, o) in chunk.iter_mut().enumerate() {
            *o = combine_voxel(a[off + i], b[off + i], c[off + i]);
        }
    });
    let lax_tumor_only = a
        .iter()
        .zip(b)
        .zip(c)
        .filter(|((&a, &b), &c)| a == 1 && b == 0 && c == 1)
        .count();
    let labels = LabelVolume::new(dims, masks.kt_lax.spacing(), out)?;
    Ok((labels, EnsembleDiagnostics { lax_tumor_only }))
}
