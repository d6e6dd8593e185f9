//! Directory-level drivers behind the command-line tool.
//!
//! Cases live in directories named `case_*`. Each driver processes every
//! selected case independently and reports per-case failures instead of
//! stopping at the first one.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::ensemble::combine_with_diagnostics;
use crate::error::{Error, Result};
use crate::exchange::{discover_mask_cases, load_case_masks, save_case_masks};
use crate::metrics::{evaluate_case, Phase};
use crate::nifti::{load_labels, load_volume, save_volume};
use crate::par;
use crate::phantom::{generate_case, stub_masks, Artifact, CorruptionSpec, PhantomSpec};
use crate::preprocess::{invert_labels, preprocess_case, read_transforms, write_transforms};
use crate::report::{export_report, regions_csv, CaseReport, CaseVolumes};
use crate::validation::{validate_detailed, ValidationRules};
use crate::volume::LabelVolume;

pub const IMAGING_FILE: &str = "imaging.nii.gz";
pub const SEGMENTATION_FILE: &str = "segmentation.nii.gz";
pub const TRANSFORMS_FILE: &str = "transforms.txt";
pub const COMBINED_FILE: &str = "combined.nii.gz";
pub const VALIDATED_FILE: &str = "validated.nii.gz";
pub const REGIONS_FILE: &str = "regions.csv";
pub const PHANTOM_MANIFEST: &str = "phantom.json";
pub const ARTIFACT_MANIFEST: &str = "artifacts.json";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseFailure {
    pub case_id: String,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub succeeded: Vec<String>,
    pub failed: Vec<CaseFailure>,
}

impl RunSummary {
    fn from_results<T>(ids: &[String], results: Vec<Result<T>>) -> (Self, Vec<(String, T)>) {
        let mut summary = RunSummary::default();
        let mut ok = Vec::new();
        for (id, r) in ids.iter().zip(results) {
            match r {
                Ok(v) => {
                    summary.succeeded.push(id.clone());
                    ok.push((id.clone(), v));
                }
                Err(e) => {
                    warn!("{id}: {e}");
                    summary.failed.push(CaseFailure {
                        case_id: id.clone(),
                        message: e.to_string(),
                    });
                }
            }
        }
        (summary, ok)
    }

    /// 0 when every case succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed.is_empty() {
            0
        } else {
            1
        }
    }
}

pub fn case_dir_name(index: usize) -> String {
    format!("case_{index:05}")
}

/// Sorted names of the `case_*` subdirectories of `dir`.
pub fn discover_cases(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Argument(format!("input directory {} does not exist", dir.display())));
    }
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io_at(dir, e))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("case_") && entry.path().is_dir() {
            ids.push(name);
        }
    }
    ids.sort();
    Ok(ids)
}

/// Restricts `available` to `filter` (when given); unknown ids and an empty
/// selection are argument errors.
pub fn select_cases(available: Vec<String>, filter: Option<&[String]>) -> Result<Vec<String>> {
    let selected = match filter {
        None => available,
        Some(wanted) => {
            for id in wanted {
                if !available.contains(id) {
                    return Err(Error::Argument(format!("unknown case {id}")));
                }
            }
            available.into_iter().filter(|id| wanted.contains(id)).collect()
        }
    };
    if selected.is_empty() {
        return Err(Error::Argument("no cases to process".into()));
    }
    Ok(selected)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io_at(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Format(e.to_string()))
}

#[derive(Serialize)]
struct PhantomEntry<'a> {
    case_id: &'a str,
    spec: &'a PhantomSpec,
}

/// Writes `cases` seeded phantom cases plus a manifest of their specs.
pub fn run_phantom(output: impl AsRef<Path>, cases: usize, seed: u64) -> Result<RunSummary> {
    if cases == 0 {
        return Err(Error::Argument("--cases must be at least 1".into()));
    }
    let output = output.as_ref();
    create_dir(output)?;
    let ids: Vec<String> = (0..cases).map(case_dir_name).collect();
    let specs: Vec<PhantomSpec> = (0..cases).map(|i| PhantomSpec::sample(seed, i)).collect();
    let results = par::map_range(cases, |i| -> Result<()> {
        let (ct, labels) = generate_case(&specs[i])?;
        let dir = output.join(&ids[i]);
        create_dir(&dir)?;
        save_volume(&ct, dir.join(IMAGING_FILE))?;
        save_volume(&labels, dir.join(SEGMENTATION_FILE))?;
        info!("{}: phantom {}", ids[i], ct.dims());
        Ok(())
    });
    let manifest: Vec<PhantomEntry> = ids
        .iter()
        .zip(&specs)
        .map(|(case_id, spec)| PhantomEntry { case_id, spec })
        .collect();
    write_text(&output.join(PHANTOM_MANIFEST), &to_json(&manifest)?)?;
    Ok(RunSummary::from_results(&ids, results).0)
}

/// Preprocesses `{input}/{case}/imaging.nii.gz` (and the segmentation when
/// present) into `{output}/{case}/` together with the slice transforms.
pub fn run_preprocess(input: impl AsRef<Path>, output: impl AsRef<Path>, filter: Option<&[String]>) -> Result<RunSummary> {
    let (input, output) = (input.as_ref(), output.as_ref());
    let ids = select_cases(discover_cases(input)?, filter)?;
    create_dir(output)?;
    let results = par::map_slice(&ids, |id| -> Result<()> {
        let src = input.join(id);
        let ct = load_volume(src.join(IMAGING_FILE))?;
        let seg_path = src.join(SEGMENTATION_FILE);
        let labels = if seg_path.exists() {
            Some(load_labels(&seg_path)?)
        } else {
            None
        };
        let pre = preprocess_case(&ct, labels.as_ref())?;
        let dst = output.join(id);
        create_dir(&dst)?;
        save_volume(&pre.ct, dst.join(IMAGING_FILE))?;
        if let Some(l) = &pre.labels {
            save_volume(l, dst.join(SEGMENTATION_FILE))?;
        }
        write_transforms(dst.join(TRANSFORMS_FILE), pre.original_dims, &pre.transforms)?;
        info!("{id}: preprocessed {} -> {}", pre.original_dims, pre.ct.dims());
        Ok(())
    });
    Ok(RunSummary::from_results(&ids, results).0)
}

/// Per-case seed: FNV-1a over the case id, mixed with the run seed.
fn case_seed(seed: u64, case_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in case_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Writes stand-in model masks for every preprocessed case with labels, plus
/// a manifest of the injected artifacts.
pub fn run_stub_masks(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    corruption: &CorruptionSpec,
    seed: u64,
    filter: Option<&[String]>,
) -> Result<RunSummary> {
    let (input, output) = (input.as_ref(), output.as_ref());
    let ids = select_cases(discover_cases(input)?, filter)?;
    create_dir(output)?;
    let results = par::map_slice(&ids, |id| -> Result<Vec<Artifact>> {
        let truth = load_labels(input.join(id).join(SEGMENTATION_FILE))?;
        let stub = stub_masks(&truth, corruption, case_seed(seed, id))?;
        save_case_masks(output, id, &stub.masks)?;
        Ok(stub.artifacts)
    });
    let (summary, ok) = RunSummary::from_results(&ids, results);
    let manifest: BTreeMap<String, Vec<Artifact>> = ok.into_iter().collect();
    write_text(&output.join(ARTIFACT_MANIFEST), &to_json(&manifest)?)?;
    Ok(summary)
}

pub fn read_artifact_manifest(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Artifact>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Combines the three masks of every case in `masks`; unless
/// `skip_validation`, also writes the validated labels and region table.
pub fn run_segment(
    masks: impl AsRef<Path>,
    output: impl AsRef<Path>,
    rules: &ValidationRules,
    skip_validation: bool,
    filter: Option<&[String]>,
) -> Result<RunSummary> {
    let (masks, output) = (masks.as_ref(), output.as_ref());
    if !masks.is_dir() {
        return Err(Error::Argument(format!("mask directory {} does not exist", masks.display())));
    }
    rules.check().map_err(|e| Error::Config(e.to_string()))?;
    let ids = select_cases(discover_mask_cases(masks)?, filter)?;
    create_dir(output)?;
    let results = par::map_slice(&ids, |id| -> Result<()> {
        let case_masks = load_case_masks(masks, id)?;
        let (combined, diag) = combine_with_diagnostics(&case_masks)?;
        if diag.lax_tumor_only > 0 {
            info!("{id}: {} voxels flagged by the tumor model outside kt_strict", diag.lax_tumor_only);
        }
        let dst = output.join(id);
        create_dir(&dst)?;
        save_volume(&combined, dst.join(COMBINED_FILE))?;
        if !skip_validation {
            let outcome = validate_detailed(&combined, rules)?;
            save_volume(&outcome.labels, dst.join(VALIDATED_FILE))?;
            write_text(&dst.join(REGIONS_FILE), &regions_csv(id, &outcome.regions))?;
        }
        Ok(())
    });
    Ok(RunSummary::from_results(&ids, results).0)
}

/// Where `run_evaluate` finds the reference labels.
#[derive(Clone, Debug)]
pub enum EvalGrid {
    /// Compare against `{truth}/{case}/segmentation.nii.gz` on the preprocessed grid.
    Preprocessed { truth: PathBuf },
    /// Map predictions back through `{truth}/{case}/transforms.txt` and compare
    /// against `{raw}/{case}/segmentation.nii.gz`.
    Original { truth: PathBuf, raw: PathBuf },
}

/// Scores `{input}/{case}/combined.nii.gz` (before validation) and
/// `validated.nii.gz` (after, when present) and writes the report CSVs.
pub fn run_evaluate(input: impl AsRef<Path>, grid: &EvalGrid, output: impl AsRef<Path>, filter: Option<&[String]>) -> Result<RunSummary> {
    let (input, output) = (input.as_ref(), output.as_ref());
    let ids = select_cases(discover_cases(input)?, filter)?;
    let results = par::map_slice(&ids, |id| -> Result<CaseReport> {
        let dir = input.join(id);
        let (truth, map): (LabelVolume, Box<dyn Fn(LabelVolume) -> Result<LabelVolume> + '_>) = match grid {
            EvalGrid::Preprocessed { truth } => (load_labels(truth.join(id).join(SEGMENTATION_FILE))?, Box::new(Ok)),
            EvalGrid::Original { truth, raw } => {
                let record = read_transforms(truth.join(id).join(TRANSFORMS_FILE))?;
                (
                    load_labels(raw.join(id).join(SEGMENTATION_FILE))?,
                    Box::new(move |p: LabelVolume| invert_labels(&p, &record.transforms, record.original_dims)),
                )
            }
        };
        let load = |name: &str| -> Result<Option<LabelVolume>> {
            let path = dir.join(name);
            if path.exists() {
                load_labels(&path).and_then(&map).map(Some)
            } else {
                Ok(None)
            }
        };
        let combined = load(COMBINED_FILE)?;
        let validated = load(VALIDATED_FILE)?;
        let last = validated
            .as_ref()
            .or(combined.as_ref())
            .ok_or_else(|| Error::Inconsistent(format!("{id}: no {COMBINED_FILE} or {VALIDATED_FILE}")))?;
        let before = combined
            .as_ref()
            .map(|p| evaluate_case(id, Phase::BeforeValidation, p, &truth))
            .transpose()?;
        let after = validated
            .as_ref()
            .map(|p| evaluate_case(id, Phase::AfterValidation, p, &truth))
            .transpose()?;
        Ok(CaseReport {
            case_id: id.clone(),
            volumes: CaseVolumes::measure(last, &truth),
            before,
            after,
        })
    });
    let (summary, ok) = RunSummary::from_results(&ids, results);
    if !ok.is_empty() {
        create_dir(output)?;
        let reports: Vec<CaseReport> = ok.into_iter().map(|(_, r)| r).collect();
        export_report(&reports, output)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_filter() {
        let all = vec!["case_00000".to_string(), "case_00001".to_string()];
        let pick = ["case_00001".to_string()];
        assert_eq!(select_cases(all.clone(), Some(&pick)).unwrap(), vec!["case_00001"]);
        assert!(matches!(select_cases(all.clone(), Some(&["case_9".to_string()])), Err(Error::Argument(_))));
        assert!(matches!(select_cases(all, Some(&[])), Err(Error::Argument(_))));
        assert!(matches!(select_cases(vec![], None), Err(Error::Argument(_))));
    }

    #[test]
    fn case_seeds_differ_per_case() {
        assert_ne!(case_seed(1, "case_00000"), case_seed(1, "case_00001"));
        assert_ne!(case_seed(1, "case_00000"), case_seed(2, "case_00000"));
    }
}
