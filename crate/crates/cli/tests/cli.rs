use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kidseg::exchange::{save_case_masks, CaseMasks};
use kidseg::nifti::{load_labels, save_volume};
use kidseg::phantom::{stub_masks, CorruptionSpec};
use kidseg::pipeline::read_artifact_manifest;
use kidseg::volume::{Dims, LabelVolume, MaskRole, MaskVolume, Spacing};
use kidseg::{combine, load_case_masks};

fn kidseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kidseg")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Small preprocessed-grid truth: a large kidney ellipsoid with a tumor cap.
fn truth(depth: usize) -> LabelVolume {
    let dims = Dims::new(80, 80, depth);
    let mut data = vec![0u8; dims.len()];
    let mid = (depth - 1) as f64 / 2.0;
    for z in 0..depth {
        for y in 0..80 {
            for x in 0..80 {
                let k = ((x as f64 - 40.0) / 22.0).powi(2) + ((y as f64 - 40.0) / 26.0).powi(2) + ((z as f64 - mid) / 12.0).powi(2);
                let t = ((x as f64 - 60.0) / 7.0).powi(2) + ((y as f64 - 40.0) / 7.0).powi(2) + ((z as f64 - mid) / 6.0).powi(2);
                let i = dims.index(x, y, z);
                if t <= 1.0 {
                    data[i] = 2;
                } else if k <= 1.0 {
                    data[i] = 1;
                }
            }
        }
    }
    LabelVolume::new(dims, Spacing::default(), data).unwrap()
}

/// Writes `{pre}/{case}/segmentation.nii.gz` for each case.
fn write_truth(pre: &Path, cases: &[&str], depth: usize) {
    for c in cases {
        fs::create_dir_all(pre.join(c)).unwrap();
        save_volume(&truth(depth), pre.join(c).join("segmentation.nii.gz")).unwrap();
    }
}

#[test]
fn phantom_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = kidseg(&["phantom", "--output", s(out), "--cases", "5", "--seed", "7"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    assert_eq!(ta.len(), 11);
    assert!(ta == tb, "phantom trees differ");
}

#[test]
fn preprocess_reports_missing_and_corrupt_cases() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, pre) = (dir.path().join("raw"), dir.path().join("pre"));

    let o = kidseg(&["preprocess", "--input", s(&dir.path().join("nope")), "--output", s(&pre)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));

    assert_eq!(code(&kidseg(&["phantom", "--output", s(&raw), "--cases", "3", "--seed", "1"])), 0);
    fs::write(raw.join("case_00001").join("imaging.nii.gz"), b"not a volume").unwrap();
    let o = kidseg(&["preprocess", "--input", s(&raw), "--output", s(&pre)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("case_00001"));
    for ok in ["case_00000", "case_00002"] {
        for f in ["imaging.nii.gz", "segmentation.nii.gz", "transforms.txt"] {
            assert!(pre.join(ok).join(f).exists(), "{ok}/{f}");
        }
    }
    assert!(!pre.join("case_00001").exists());

    let o = kidseg(&["preprocess", "--input", s(&raw), "--output", s(&dir.path().join("pre2")), "--cases", "case_00000,case_00002"]);
    assert_eq!(code(&o), 0);
    let made: Vec<_> = fs::read_dir(dir.path().join("pre2")).unwrap().collect();
    assert_eq!(made.len(), 2);
}

#[test]
fn segment_removes_artifacts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (pre, masks, pred) = (dir.path().join("pre"), dir.path().join("masks"), dir.path().join("pred"));
    write_truth(&pre, &["case_00000", "case_00001"], 40);
    let o = kidseg(&["stub-masks", "--input", s(&pre), "--output", s(&masks), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let rules = dir.path().join("rules.toml");
    // the synthetic kidneys are smaller than real ones
    fs::write(&rules, "kidney_min_volume = 5000.0\n").unwrap();
    let args = ["segment", "--masks", s(&masks), "--output", s(&pred), "--rules", s(&rules)];
    assert_eq!(code(&kidseg(&args)), 0);
    let first = tree_bytes(&pred);
    assert_eq!(code(&kidseg(&args)), 0);
    assert!(first == tree_bytes(&pred), "segment output changed on re-run");

    let manifest = read_artifact_manifest(masks.join("artifacts.json")).unwrap();
    assert_eq!(manifest.len(), 2);
    for (case, artifacts) in &manifest {
        assert!(!artifacts.is_empty());
        let combined = load_labels(pred.join(case).join("combined.nii.gz")).unwrap();
        let validated = load_labels(pred.join(case).join("validated.nii.gz")).unwrap();
        assert_eq!(combined, combine(&load_case_masks(&masks, case).unwrap()).unwrap());
        for a in artifacts {
            for v in &a.voxels {
                let i = combined.dims().index(v[0], v[1], v[2]);
                assert_eq!(combined.data()[i], a.label);
                assert_eq!(validated.data()[i], 0, "{case}: {:?} survived", a.kind);
            }
        }
        assert!(fs::read_to_string(pred.join(case).join("regions.csv")).unwrap().starts_with("case_id,class,region,"));
    }
}

#[test]
fn skip_validation_writes_exactly_the_combined_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (masks, pred) = (dir.path().join("masks"), dir.path().join("pred"));
    let t = truth(30);
    let stub = stub_masks(&t, &CorruptionSpec::standard(), 5).unwrap();
    fs::create_dir_all(&masks).unwrap();
    save_case_masks(&masks, "case_00004", &stub.masks).unwrap();
    let o = kidseg(&["segment", "--masks", s(&masks), "--output", s(&pred), "--skip-validation"]);
    assert_eq!(code(&o), 0);
    let out = load_labels(pred.join("case_00004").join("combined.nii.gz")).unwrap();
    assert_eq!(out, combine(&stub.masks).unwrap());
    assert!(!pred.join("case_00004").join("validated.nii.gz").exists());
}

#[test]
fn segment_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (masks, pred) = (dir.path().join("masks"), dir.path().join("pred"));
    fs::create_dir_all(&masks).unwrap();
    // no cases at all
    assert_eq!(code(&kidseg(&["segment", "--masks", s(&masks), "--output", s(&pred)])), 2);

    let dims = Dims::new(4, 4, 2);
    let m = |role| MaskVolume::new(dims, Spacing::default(), role, vec![0; dims.len()]).unwrap();
    save_case_masks(&masks, "case_00000", &CaseMasks::new(m(MaskRole::KtLax), m(MaskRole::KtStrict), m(MaskRole::Tumor)).unwrap()).unwrap();
    // filter that selects nothing known
    let o = kidseg(&["segment", "--masks", s(&masks), "--output", s(&pred), "--cases", "case_00009"]);
    assert_eq!(code(&o), 2);
    // bad rules file
    let rules = dir.path().join("bad.toml");
    fs::write(&rules, "tumor_min_volume = -3.0\n").unwrap();
    let o = kidseg(&["segment", "--masks", s(&masks), "--output", s(&pred), "--rules", s(&rules)]);
    assert_eq!(code(&o), 2);
    // a case with a missing mask is a per-case failure
    fs::remove_file(masks.join("case_00000_tumor.nii.gz")).unwrap();
    let o = kidseg(&["segment", "--masks", s(&masks), "--output", s(&pred)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tumor"));
}

#[test]
fn evaluate_identical_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let (pre, pred, rep) = (dir.path().join("pre"), dir.path().join("pred"), dir.path().join("report"));
    write_truth(&pre, &["case_00000", "case_00001"], 24);
    for c in ["case_00000", "case_00001"] {
        fs::create_dir_all(pred.join(c)).unwrap();
        fs::copy(pre.join(c).join("segmentation.nii.gz"), pred.join(c).join("combined.nii.gz")).unwrap();
        fs::copy(pre.join(c).join("segmentation.nii.gz"), pred.join(c).join("validated.nii.gz")).unwrap();
    }
    let o = kidseg(&["evaluate", "--input", s(&pred), "--truth", s(&pre), "--output", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(rep.join("summary.csv")).unwrap();
    for row in summary.lines().filter(|l| l.starts_with("after_validation")) {
        assert!(row.ends_with(",1.000000"), "{row}");
    }
    let per_case = fs::read_to_string(rep.join("case_metrics.csv")).unwrap();
    assert_eq!(per_case.lines().count(), 3);

    save_volume(&truth(30), pred.join("case_00001").join("validated.nii.gz")).unwrap();
    let o = kidseg(&["evaluate", "--input", s(&pred), "--truth", s(&pre), "--output", s(&rep)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("case_00001"));
}

#[test]
fn evaluate_on_the_original_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(code(&kidseg(&["phantom", "--output", s(&p("raw")), "--cases", "1", "--seed", "2"])), 0);
    assert_eq!(code(&kidseg(&["preprocess", "--input", s(&p("raw")), "--output", s(&p("pre"))])), 0);
    assert_eq!(code(&kidseg(&["stub-masks", "--input", s(&p("pre")), "--output", s(&p("masks")), "--clean"])), 0);
    assert_eq!(code(&kidseg(&["segment", "--masks", s(&p("masks")), "--output", s(&p("pred"))])), 0);
    let o = kidseg(&[
        "evaluate", "--input", s(&p("pred")), "--truth", s(&p("pre")), "--output", s(&p("rep")),
        "--original-grid", "--raw", s(&p("raw")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let volumes = fs::read_to_string(p("rep").join("case_volumes.csv")).unwrap();
    let row: Vec<&str> = volumes.lines().nth(1).unwrap().split(',').collect();
    let truth_raw = load_labels(p("raw").join("case_00000").join("segmentation.nii.gz")).unwrap();
    // volumes are counted on the original grid
    assert_eq!(row[1].parse::<usize>().unwrap(), truth_raw.count(1));

    // without --raw the flag is a usage error
    let o = kidseg(&["evaluate", "--input", s(&p("pred")), "--truth", s(&p("pre")), "--output", s(&p("rep")), "--original-grid"]);
    assert_eq!(code(&o), 2);
}
