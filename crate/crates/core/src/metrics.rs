//! Confusion matrices, per-class metrics and table rendering.
//!
//! Metrics with a zero denominator are undefined (`None`) and render as `—`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts seen from the other class.
    pub fn flipped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

pub fn confusion(preds: &[Label], golds: &[Label], positive: Label) -> Result<ConfusionMatrix> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Config("nothing to evaluate".into()));
    }
    let task = positive.task();
    if let Some(bad) = preds.iter().chain(golds).find(|l| l.task() != task) {
        return Err(Error::Config(format!("label {bad} does not belong to {task}")));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, g) in preds.iter().zip(golds) {
        match (*p == positive, *g == positive) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision == recall {
        precision
    } else if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    ClassMetrics {
        recall,
        precision,
        specificity: ratio(cm.tn, cm.tn + cm.fp),
        f1: match (precision, recall) {
            (Some(p), Some(r)) => Some(f1_score(p, r)),
            _ => None,
        },
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub n_evaluated: usize,
    /// Oriented to the task's positive class.
    pub confusion: ConfusionMatrix,
    /// Metrics with the positive class (cancer / reportable) as positive.
    pub positive: ClassMetrics,
    /// Metrics with the negative class as positive.
    pub negative: ClassMetrics,
    pub micro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub missed_positive_count: usize,
}

impl EvalReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        if label.is_positive() {
            &self.positive
        } else {
            &self.negative
        }
    }
}

pub fn eval_report(preds: &[Label], golds: &[Label], task: Task) -> Result<EvalReport> {
    let cm = confusion(preds, golds, task.positive())?;
    let flipped = cm.flipped();
    let positive = class_metrics(&cm);
    let negative = class_metrics(&flipped);

    // micro average pools the per-class counts of both orientations
    let pooled_tp = cm.tp + flipped.tp;
    let pooled_fp = cm.fp + flipped.fp;
    let pooled_fn = cm.fn_ + flipped.fn_;
    let micro_p = ratio(pooled_tp, pooled_tp + pooled_fp);
    let micro_r = ratio(pooled_tp, pooled_tp + pooled_fn);
    let micro_f1 = match (micro_p, micro_r) {
        (Some(p), Some(r)) => Some(f1_score(p, r)),
        _ => None,
    };
    let macro_f1 = match (positive.f1, negative.f1) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };

    Ok(EvalReport {
        task,
        n_evaluated: preds.len(),
        confusion: cm,
        positive,
        negative,
        micro_f1,
        macro_f1,
        missed_positive_count: cm.fn_,
    })
}

/// Round half up to two decimals.
pub fn round2(x: f64) -> f64 {
    ((x * 100.0 + 0.5 + 1e-9).floor()) / 100.0
}

pub fn format_metric(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}", round2(v)),
        None => "—".to_owned(),
    }
}

/// Renders a per-class table: for each model a negative-class row followed
/// by a positive-class row, then one missed-positive line per model.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut labels = Vec::new();
    for (model, report) in rows {
        for class in [report.task.negative(), report.task.positive()] {
            labels.push((format!("{model} ({})", class.display_name()), report.class(class)));
        }
    }
    let width = labels
        .iter()
        .map(|(l, _)| l.chars().count())
        .chain(std::iter::once("Model (class)".len()))
        .max()
        .unwrap_or(0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>9}  {:>8}",
        "Model (class)", "Recall", "Precision", "F1 score"
    );
    for (label, m) in &labels {
        let pad = width - label.chars().count();
        let _ = writeln!(
            out,
            "{label}{:pad$}  {:>6}  {:>9}  {:>8}",
            "",
            format_metric(m.recall),
            format_metric(m.precision),
            format_metric(m.f1),
        );
    }
    for (model, report) in rows {
        let _ = writeln!(
            out,
            "missed {}: {model} {} of {}",
            report.task.positive().display_name(),
            report.missed_positive_count,
            report.confusion.tp + report.confusion.fn_,
        );
    }
    out
}
