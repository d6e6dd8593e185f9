//! CSV exports: per-case metrics, per-case volumes, (volume, F1) pairs,
//! aggregate summary and per-region validation diagnostics.
//!
//! Fixed column order, six-decimal fixed-point numbers, LF line endings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, CaseMetrics, CLASSES};
use crate::validation::RegionReport;
use crate::volume::{LabelVolume, KIDNEY, TUMOR};

pub const CASE_METRICS_FILE: &str = "case_metrics.csv";
pub const CASE_VOLUMES_FILE: &str = "case_volumes.csv";
pub const VOLUME_F1_FILE: &str = "volume_f1.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Kidney and tumor voxel counts of one case.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseVolumes {
    pub truth_kidney: usize,
    pub truth_tumor: usize,
    pub pred_kidney: usize,
    pub pred_tumor: usize,
}

impl CaseVolumes {
    pub fn measure(pred: &LabelVolume, truth: &LabelVolume) -> Self {
        Self {
            truth_kidney: truth.count(KIDNEY),
            truth_tumor: truth.count(TUMOR),
            pred_kidney: pred.count(KIDNEY),
            pred_tumor: pred.count(TUMOR),
        }
    }
}

/// Everything reported for one evaluated case.
#[derive(Clone, Debug)]
pub struct CaseReport {
    pub case_id: String,
    pub before: Option<CaseMetrics>,
    pub after: Option<CaseMetrics>,
    pub volumes: CaseVolumes,
}

impl CaseReport {
    /// The final-phase metrics (after validation when available).
    pub fn final_metrics(&self) -> Option<&CaseMetrics> {
        self.after.as_ref().or(self.before.as_ref())
    }
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn case_metrics_csv(cases: &[CaseReport]) -> String {
    let mut s = String::from("case_id");
    for phase in ["before", "after"] {
        for c in CLASSES {
            for col in ["tp", "fp", "fn", "precision", "recall", "f1"] {
                let _ = write!(s, ",{phase}_c{c}_{col}");
            }
        }
    }
    s.push('\n');
    for case in cases {
        s.push_str(&case.case_id);
        for m in [&case.before, &case.after] {
            for c in CLASSES {
                match m {
                    Some(m) => {
                        let cm = &m.classes[c as usize];
                        let _ = write!(
                            s,
                            ",{},{},{},{},{},{}",
                            cm.counts.tp,
                            cm.counts.fp,
                            cm.counts.fn_,
                            f6(cm.scores.precision),
                            f6(cm.scores.recall),
                            f6(cm.scores.f1)
                        );
                    }
                    None => s.push_str(",,,,,,"),
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn case_volumes_csv(cases: &[CaseReport]) -> String {
    let mut s = String::from("case_id,truth_kidney_volume,truth_tumor_volume,pred_kidney_volume,pred_tumor_volume\n");
    for c in cases {
        let v = &c.volumes;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.case_id, v.truth_kidney, v.truth_tumor, v.pred_kidney, v.pred_tumor
        );
    }
    s
}

/// (truth volume, final F1) per case for kidney and tumor.
pub fn volume_f1_csv(cases: &[CaseReport]) -> String {
    let mut s = String::from("case_id,class,truth_volume,f1\n");
    for c in cases {
        let Some(m) = c.final_metrics() else { continue };
        for (class, vol) in [(KIDNEY, c.volumes.truth_kidney), (TUMOR, c.volumes.truth_tumor)] {
            let _ = writeln!(s, "{},{class},{vol},{}", c.case_id, f6(m.classes[class as usize].scores.f1));
        }
    }
    s
}

pub fn summary_csv(metrics: &[CaseMetrics]) -> Result<String> {
    let summary = aggregate(metrics)?;
    let mut s = String::from(
        "# unweighted per-case means; a class absent from both prediction and truth scores 1, \
         precision is 0 when nothing is predicted but truth exists, recall is 1 when truth is empty\n",
    );
    s.push_str("phase,class,cases,precision,recall,f1\n");
    for p in &summary.phases {
        for c in CLASSES {
            let m = &p.mean[c as usize];
            let _ = writeln!(
                s,
                "{},{c},{},{},{},{}",
                p.phase.as_str(),
                p.cases,
                f6(m.precision),
                f6(m.recall),
                f6(m.f1)
            );
        }
        let _ = writeln!(
            s,
            "{},kidney_tumor_mean,{},,,{}",
            p.phase.as_str(),
            p.cases,
            f6(p.mean_f1_kidney_tumor)
        );
    }
    Ok(s)
}

/// Writes the four report files into `out_dir` and returns their paths.
pub fn export_report(cases: &[CaseReport], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let metrics: Vec<CaseMetrics> = cases
        .iter()
        .flat_map(|c| c.before.iter().chain(c.after.iter()).cloned())
        .collect();
    let files = [
        (CASE_METRICS_FILE, case_metrics_csv(cases)),
        (CASE_VOLUMES_FILE, case_volumes_csv(cases)),
        (VOLUME_F1_FILE, volume_f1_csv(cases)),
        (SUMMARY_FILE, summary_csv(&metrics)?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io_at(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// One row per region with every measured property and the verdict.
pub fn regions_csv(case_id: &str, regions: &[RegionReport]) -> String {
    let mut s = String::from(
        "case_id,class,region,volume,centroid_x,centroid_y,centroid_z,z_fraction,\
         bbox_x0,bbox_y0,bbox_z0,bbox_x1,bbox_y1,bbox_z1,frame_span,major_axis,minor_axis,\
         surface_area,sphericity,verdict,failed\n",
    );
    for (i, r) in regions.iter().enumerate() {
        let p = &r.properties;
        let _ = writeln!(
            s,
            "{case_id},{},{i},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.class_label,
            p.volume,
            f6(p.centroid[0]),
            f6(p.centroid[1]),
            f6(p.centroid[2]),
            f6(p.z_fraction),
            p.bbox.min[0],
            p.bbox.min[1],
            p.bbox.min[2],
            p.bbox.max[0],
            p.bbox.max[1],
            p.bbox.max[2],
            p.frame_span,
            f6(p.major_axis),
            f6(p.minor_axis),
            p.surface_area,
            f6(p.sphericity),
            r.verdict.as_str(),
            r.failures.join(";")
        );
    }
    s
}

