//! Per-class voxel precision, recall and F1.
//!
//! Degenerate denominators: precision is 1 when nothing was predicted and
//! nothing was missed (`tp + fp == 0 && fn == 0`), else 0 when nothing was
//! predicted; recall is 1 whenever the class is absent from the truth
//! (`tp + fn == 0`); F1 is 0 when `P + R == 0`. A class absent from both
//! volumes therefore scores 1 on all three.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::LabelVolume;

pub const CLASSES: [u8; 3] = [0, 1, 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BeforeValidation,
    AfterValidation,
}

impl Phase {
    pub const fn as_str(&self) -> &'static str {
        match self {
            Phase::BeforeValidation => "before_validation",
            Phase::AfterValidation => "after_validation",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub counts: Confusion,
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub phase: Phase,
    /// Indexed by class label.
    pub classes: [ClassMetrics; 3],
}

fn check_dims(pred: &LabelVolume, truth: &LabelVolume) -> Result<()> {
    if pred.dims() != truth.dims() {
        return Err(Error::Argument(format!(
            "prediction is {} but ground truth is {}",
            pred.dims(),
            truth.dims()
        )));
    }
    Ok(())
}

/// One-vs-rest counts for `class`.
pub fn confusion_counts(pred: &LabelVolume, truth: &LabelVolume, class: u8) -> Result<Confusion> {
    check_dims(pred, truth)?;
    let mut c = Confusion::default();
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        match (p == class, t == class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

pub fn prf(tp: u64, fp: u64, fn_: u64) -> Scores {
    let precision = if tp + fp == 0 {
        if fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores { precision, recall, f1 }
}

pub fn evaluate_case(case_id: &str, phase: Phase, pred: &LabelVolume, truth: &LabelVolume) -> Result<CaseMetrics> {
    check_dims(pred, truth)?;
    // one pass: counts[pred][truth]
    let mut table = [[0u64; 3]; 3];
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        table[p as usize][t as usize] += 1;
    }
    let classes = CLASSES.map(|c| {
        let c = c as usize;
        let tp = table[c][c];
        let predicted: u64 = table[c].iter().sum();
        let actual: u64 = table.iter().map(|row| row[c]).sum();
        let counts = Confusion {
            tp,
            fp: predicted - tp,
            fn_: actual - tp,
        };
        ClassMetrics {
            counts,
            scores: prf(counts.tp, counts.fp, counts.fn_),
        }
    });
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        phase,
        classes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub cases: usize,
    /// Unweighted per-case means, indexed by class.
    pub mean: [Scores; 3],
    /// Mean of the kidney and tumor mean F1.
    pub mean_f1_kidney_tumor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    /// One entry per phase present, before-validation first.
    pub phases: Vec<PhaseSummary>,
}

impl Summary {
    pub fn phase(&self, phase: Phase) -> Option<&PhaseSummary> {
        self.phases.iter().find(|p| p.phase == phase)
    }
}

pub fn aggregate(metrics: &[CaseMetrics]) -> Result<Summary> {
    if metrics.is_empty() {
        return Err(Error::Argument("cannot aggregate an empty list of cases".into()));
    }
    let mut phases = Vec::new();
    for phase in [Phase::BeforeValidation, Phase::AfterValidation] {
        let group: Vec<&CaseMetrics> = metrics.iter().filter(|m| m.phase == phase).collect();
        if group.is_empty() {
            continue;
        }
        let n = group.len() as f64;
        let mean = CLASSES.map(|c| {
            let sum = |f: fn(&Scores) -> f64| group.iter().map(|m| f(&m.classes[c as usize].scores)).sum::<f64>() / n;
            Scores {
                precision: sum(|s| s.precision),
                recall: sum(|s| s.recall),
                f1: sum(|s| s.f1),
            }
        });
        phases.push(PhaseSummary {
            phase,
            cases: group.len(),
            mean_f1_kidney_tumor: (mean[1].f1 + mean[2].f1) / 2.0,
            mean,
        });
    }
    Ok(Summary { phases })
}
