//! Rule-based 3D validation of a stacked 2D segmentation.
//!
//! Kidney components (label 1, 26-connected) must be large, centered in depth
//! and span more than one slice; failures become background. Tumor components
//! (label 2) must pass six shape/position tests; failures become kidney when
//! their bounding box touches a confirmed kidney's box, background otherwise.

mod components;
mod region;
mod rules;

pub use components::label_components;
pub use region::{measure_region, BoundingBox, Region3D, RegionProperties};
pub use rules::ValidationRules;

use crate::error::Result;
use crate::par;
use crate::volume::{LabelVolume, BACKGROUND, KIDNEY, TUMOR};

/// All 26-connected components of `class_label`, measured.
pub fn connected_components(labels: &LabelVolume, class_label: u8) -> Vec<Region3D> {
    label_components(labels, class_label)
        .into_iter()
        .map(|voxels| {
            let properties = region::measure_component(labels, class_label, &voxels);
            Region3D {
                class_label,
                voxels,
                properties,
            }
        })
        .collect()
}

/// Strictly above the threshold; NaN never is.
fn exceeds(value: f64, threshold: f64) -> bool {
    value > threshold
}

/// Names of the kidney predicates a region fails (empty = confirmed).
pub fn kidney_failures(p: &RegionProperties, rules: &ValidationRules) -> Vec<&'static str> {
    let mut failed = Vec::new();
    if !exceeds(p.volume as f64, rules.kidney_min_volume) {
        failed.push("volume");
    }
    if !(rules.kidney_z_min..=rules.kidney_z_max).contains(&p.z_fraction) {
        failed.push("depth");
    }
    if p.frame_span < rules.kidney_min_frames {
        failed.push("frames");
    }
    failed
}

/// Names of the tumor predicates a region fails (empty = keep).
pub fn tumor_failures(p: &RegionProperties, rules: &ValidationRules) -> Vec<&'static str> {
    let mut failed = Vec::new();
    if !exceeds(p.volume as f64, rules.tumor_min_volume) {
        failed.push("volume");
    }
    if !(rules.tumor_z_min..=rules.tumor_z_max).contains(&p.z_fraction) {
        failed.push("depth");
    }
    if !exceeds(p.major_axis, rules.tumor_min_major) {
        failed.push("major_axis");
    }
    if !exceeds(p.minor_axis, rules.tumor_min_minor) {
        failed.push("minor_axis");
    }
    if p.frame_span < rules.tumor_min_frames {
        failed.push("frames");
    }
    if !exceeds(p.sphericity, rules.tumor_min_sphericity) {
        failed.push("sphericity");
    }
    failed
}

/// Splits kidney regions into (confirmed, rejected).
pub fn validate_kidneys(regions: Vec<Region3D>, rules: &ValidationRules) -> (Vec<Region3D>, Vec<Region3D>) {
    regions
        .into_iter()
        .partition(|r| kidney_failures(&r.properties, rules).is_empty())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TumorVerdict {
    Keep,
    RelabelKidney,
    RelabelBackground,
}

impl TumorVerdict {
    pub const fn label(self) -> u8 {
        match self {
            TumorVerdict::Keep => TUMOR,
            TumorVerdict::RelabelKidney => KIDNEY,
            TumorVerdict::RelabelBackground => BACKGROUND,
        }
    }
}

pub fn tumor_verdict(p: &RegionProperties, kidney_bboxes: &[BoundingBox], rules: &ValidationRules) -> TumorVerdict {
    if tumor_failures(p, rules).is_empty() {
        TumorVerdict::Keep
    } else if kidney_bboxes.iter().any(|k| k.intersects(&p.bbox)) {
        TumorVerdict::RelabelKidney
    } else {
        TumorVerdict::RelabelBackground
    }
}

pub fn validate_tumors(regions: &[Region3D], kidney_bboxes: &[BoundingBox], rules: &ValidationRules) -> Vec<TumorVerdict> {
    regions
        .iter()
        .map(|r| tumor_verdict(&r.properties, kidney_bboxes, rules))
        .collect()
}

/// Outcome of validating one region, for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionVerdict {
    KidneyConfirmed,
    KidneyRemoved,
    Tumor(TumorVerdict),
}

impl RegionVerdict {
    pub const fn as_str(&self) -> &'static str {
        match self {
            RegionVerdict::KidneyConfirmed => "confirmed",
            RegionVerdict::KidneyRemoved => "removed",
            RegionVerdict::Tumor(TumorVerdict::Keep) => "keep",
            RegionVerdict::Tumor(TumorVerdict::RelabelKidney) => "relabel_kidney",
            RegionVerdict::Tumor(TumorVerdict::RelabelBackground) => "relabel_background",
        }
    }

    /// Label the region's voxels carry after validation.
    pub const fn output_label(&self) -> u8 {
        match self {
            RegionVerdict::KidneyConfirmed => KIDNEY,
            RegionVerdict::KidneyRemoved => BACKGROUND,
            RegionVerdict::Tumor(t) => t.label(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionReport {
    pub class_label: u8,
    pub properties: RegionProperties,
    pub verdict: RegionVerdict,
    pub failures: Vec<&'static str>,
}

#[derive(Clone, Debug)]
pub struct ValidationOutcome {
    pub labels: LabelVolume,
    /// Kidney regions first, then tumor regions, each in scan order.
    pub regions: Vec<RegionReport>,
}

/// Validates kidneys, then tumors against the confirmed kidneys.
pub fn volumetric_validate(labels: &LabelVolume, rules: &ValidationRules) -> Result<LabelVolume> {
    validate_detailed(labels, rules).map(|o| o.labels)
}

pub fn validate_detailed(labels: &LabelVolume, rules: &ValidationRules) -> Result<ValidationOutcome> {
    rules.check()?;
    let (kidneys, tumors) = par::join(
        || connected_components(labels, KIDNEY),
        || connected_components(labels, TUMOR),
    );
    let mut out = labels.data().to_vec();
    let mut reports = Vec::with_capacity(kidneys.len() + tumors.len());

    let (confirmed, rejected) = validate_kidneys(kidneys, rules);
    for r in &rejected {
        for &i in &r.voxels {
            out[i] = BACKGROUND;
        }
    }
    let kidney_bboxes: Vec<BoundingBox> = confirmed.iter().map(|r| r.properties.bbox).collect();
    let mut kidney_reports: Vec<(usize, RegionReport)> = confirmed
        .iter()
        .map(|r| (r, RegionVerdict::KidneyConfirmed))
        .chain(rejected.iter().map(|r| (r, RegionVerdict::KidneyRemoved)))
        .map(|(r, verdict)| {
            (
                r.voxels[0],
                RegionReport {
                    class_label: KIDNEY,
                    properties: r.properties,
                    verdict,
                    failures: kidney_failures(&r.properties, rules),
                },
            )
        })
        .collect();
    kidney_reports.sort_by_key(|(first, _)| *first);
    reports.extend(kidney_reports.into_iter().map(|(_, r)| r));

    let verdicts = validate_tumors(&tumors, &kidney_bboxes, rules);
    for (r, v) in tumors.iter().zip(&verdicts) {
        if *v != TumorVerdict::Keep {
            let label = v.label();
            for &i in &r.voxels {
                out[i] = label;
            }
        }
        reports.push(RegionReport {
            class_label: TUMOR,
            properties: r.properties,
            verdict: RegionVerdict::Tumor(*v),
            failures: tumor_failures(&r.properties, rules),
        });
    }

    Ok(ValidationOutcome {
        labels: LabelVolume::new(labels.dims(), labels.spacing(), out)?,
        regions: reports,
    })
}
