//! Two-tier triage with a two-member OR-ensemble per tier.
//!
//! Each tier has one member fed by the synoptic-first pipeline and one fed
//! by the diagnosis-first pipeline. A report is positive for the tier when at
//! least one member calls it positive. Tier 2 runs only on reports that the
//! tier-1 ensemble called cancer (or, in gold-gated evaluation runs, also on
//! every gold cancer-positive report).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{check_threshold, decide, score_batch, ClassifierBackend, Decision};
use crate::corpus::{LabeledReport, PathologyReport};
use crate::preprocess::{NormalizedInput, Pipeline, PipelineVariant};
use crate::{Error, Label, Result, Task};

pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone)]
pub struct Member {
    pub backend: Arc<dyn ClassifierBackend>,
    pub pipeline: Pipeline,
    pub threshold: f64,
}

impl Member {
    pub fn new(backend: Arc<dyn ClassifierBackend>, pipeline: Pipeline, threshold: f64) -> Self {
        Member {
            backend,
            pipeline,
            threshold,
        }
    }

    pub fn variant(&self) -> PipelineVariant {
        self.pipeline.variant
    }
}

#[derive(Debug, Clone)]
pub struct TierConfig {
    pub task: Task,
    members: [Member; 2],
    pub batch_size: usize,
    pub workers: usize,
}

impl TierConfig {
    /// Members may be given in either order; they are stored A first.
    pub fn new(task: Task, a: Member, b: Member) -> Result<Self> {
        if a.variant() == b.variant() {
            return Err(Error::Config(format!(
                "{task}: both members use pipeline {}; one synoptic-first and one diagnosis-first member are required",
                a.variant()
            )));
        }
        if a.backend.id() == b.backend.id() {
            return Err(Error::Config(format!(
                "{task}: duplicate backend_id {:?}",
                a.backend.id()
            )));
        }
        check_threshold(a.threshold)?;
        check_threshold(b.threshold)?;
        let members = if a.variant() == PipelineVariant::SynopticFirst {
            [a, b]
        } else {
            [b, a]
        };
        Ok(TierConfig {
            task,
            members,
            batch_size: DEFAULT_BATCH_SIZE,
            workers: 1,
        })
    }

    pub fn with_batching(mut self, batch_size: usize, workers: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self.workers = workers.max(1);
        self
    }

    pub fn members(&self) -> &[Member; 2] {
        &self.members
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EnsembleRecord", try_from = "EnsembleRecord")]
pub struct EnsembleResult {
    pub member_decisions: Vec<Decision>,
    pub combined_label: Label,
}

impl EnsembleResult {
    pub const COMBINED_BY: &'static str = "or";

    pub fn is_positive(&self) -> bool {
        self.combined_label.is_positive()
    }
}

/// Serialized ensemble audit record: parallel arrays, one entry per member.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnsembleRecord {
    labels: Vec<Label>,
    scores: Vec<f64>,
    thresholds: Vec<f64>,
    backend_ids: Vec<String>,
    combined: Label,
    combined_by: String,
}

impl From<EnsembleResult> for EnsembleRecord {
    fn from(r: EnsembleResult) -> Self {
        EnsembleRecord {
            labels: r.member_decisions.iter().map(|d| d.label).collect(),
            scores: r.member_decisions.iter().map(|d| d.score.probability()).collect(),
            thresholds: r.member_decisions.iter().map(|d| d.threshold).collect(),
            backend_ids: r.member_decisions.into_iter().map(|d| d.backend_id).collect(),
            combined: r.combined_label,
            combined_by: EnsembleResult::COMBINED_BY.to_owned(),
        }
    }
}

impl TryFrom<EnsembleRecord> for EnsembleResult {
    type Error = String;

    fn try_from(r: EnsembleRecord) -> std::result::Result<Self, String> {
        let n = r.labels.len();
        if r.scores.len() != n || r.thresholds.len() != n || r.backend_ids.len() != n {
            return Err("ensemble arrays differ in length".into());
        }
        if r.combined_by != EnsembleResult::COMBINED_BY {
            return Err(format!("unsupported combiner {:?}", r.combined_by));
        }
        let member_decisions = r
            .labels
            .into_iter()
            .zip(r.scores)
            .zip(r.thresholds)
            .zip(r.backend_ids)
            .map(|(((label, p), threshold), backend_id)| {
                let score =
                    crate::backend::ClassifierScore::new(p).ok_or_else(|| format!("score {p} outside [0, 1]"))?;
                Ok(Decision {
                    label,
                    score,
                    threshold,
                    backend_id,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let expected = or_combine(&member_decisions).map_err(|e| e.to_string())?;
        if expected != r.combined {
            return Err(format!("combined label {} contradicts member labels", r.combined));
        }
        Ok(EnsembleResult {
            member_decisions,
            combined_label: r.combined,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalLabel {
    NonCancer,
    CancerNonReportable,
    CancerReportable,
}

impl FinalLabel {
    pub const ALL: [FinalLabel; 3] = [
        FinalLabel::NonCancer,
        FinalLabel::CancerNonReportable,
        FinalLabel::CancerReportable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FinalLabel::NonCancer => "non_cancer",
            FinalLabel::CancerNonReportable => "cancer_non_reportable",
            FinalLabel::CancerReportable => "cancer_reportable",
        }
    }
}

/// Which reports tier 2 was run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gating {
    /// Only reports the tier-1 ensemble called cancer (production flow).
    #[default]
    Predicted,
    /// Additionally every gold cancer-positive report, so tier 2 can be
    /// evaluated on the gold subset.
    Gold,
}

impl Gating {
    pub fn as_str(self) -> &'static str {
        match self {
            Gating::Predicted => "predicted",
            Gating::Gold => "gold",
        }
    }
}

impl std::str::FromStr for Gating {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "predicted" => Ok(Gating::Predicted),
            "gold" => Ok(Gating::Gold),
            other => Err(format!("unknown gating mode {other:?} (expected predicted or gold)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageOutcome {
    pub report_id: String,
    #[serde(rename = "final")]
    pub final_label: FinalLabel,
    pub gating: Gating,
    pub t1: EnsembleResult,
    /// Tier-2 result on the triage path; present iff tier 1 is positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<EnsembleResult>,
    /// Tier-2 result for a gold cancer that tier 1 called negative. Only
    /// produced under gold gating, for evaluation; never affects `final`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_evaluation: Option<EnsembleResult>,
}

impl TriageOutcome {
    fn new(report_id: String, gating: Gating, t1: EnsembleResult, t2r: Option<EnsembleResult>) -> Self {
        let (t2, t2_evaluation) = if t1.is_positive() { (t2r, None) } else { (None, t2r) };
        let final_label = match (t1.is_positive(), &t2) {
            (false, _) => FinalLabel::NonCancer,
            (true, Some(r)) if r.is_positive() => FinalLabel::CancerReportable,
            (true, _) => FinalLabel::CancerNonReportable,
        };
        TriageOutcome {
            report_id,
            final_label,
            gating,
            t1,
            t2,
            t2_evaluation,
        }
    }

    /// Tier-2 result to score in an evaluation under this outcome's gating.
    pub fn t2_for_evaluation(&self) -> Option<&EnsembleResult> {
        self.t2.as_ref().or(self.t2_evaluation.as_ref())
    }

    /// Checks the gating invariants: `t2` present iff tier 1 is positive,
    /// evaluation-only results only under gold gating, `final` consistent.
    pub fn is_gating_sound(&self) -> bool {
        let t1_pos = self.t1.is_positive();
        let gate_ok =
            self.t2.is_some() == t1_pos && (self.t2_evaluation.is_none() || (self.gating == Gating::Gold && !t1_pos));
        let final_ok = match self.final_label {
            FinalLabel::NonCancer => !t1_pos,
            FinalLabel::CancerReportable => t1_pos && self.t2.as_ref().is_some_and(|r| r.is_positive()),
            FinalLabel::CancerNonReportable => t1_pos && !self.t2.as_ref().is_some_and(|r| r.is_positive()),
        };
        gate_ok && final_ok
    }
}

/// Positive iff any member decision is positive.
pub fn or_combine(decisions: &[Decision]) -> Result<Label> {
    let first = decisions
        .first()
        .ok_or_else(|| Error::Config("cannot combine an empty decision list".into()))?;
    let task = first.task();
    if decisions.iter().any(|d| d.task() != task) {
        return Err(Error::Config("decisions mix tiers".into()));
    }
    Ok(Label::for_task(task, decisions.iter().any(Decision::is_positive)))
}

fn tier_error(task: Task, reports: &[&PathologyReport], range: std::ops::Range<usize>, source: Error) -> Error {
    let first = reports
        .get(range.start)
        .map(|r| r.report_id.clone())
        .unwrap_or_default();
    let last = reports
        .get(range.end.saturating_sub(1))
        .map(|r| r.report_id.clone())
        .unwrap_or_default();
    Error::Tier {
        task,
        first_report: first,
        last_report: last,
        source: Box::new(source),
    }
}

fn member_decisions(
    reports: &[&PathologyReport],
    member: &Member,
    config: &TierConfig,
    pool: &rayon::ThreadPool,
) -> Result<Vec<Decision>> {
    let task = config.task;
    let inputs: Vec<NormalizedInput> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            member
                .pipeline
                .assemble(r)
                .map_err(|e| tier_error(task, reports, i..i + 1, e))
        })
        .collect::<Result<_>>()?;

    let ranges: Vec<std::ops::Range<usize>> = (0..inputs.len())
        .step_by(config.batch_size)
        .map(|s| s..(s + config.batch_size).min(inputs.len()))
        .collect();
    let backend = member.backend.as_ref();
    let batches: Vec<std::result::Result<_, _>> = pool.install(|| {
        ranges
            .par_iter()
            .map(|range| score_batch(backend, task, &inputs[range.clone()], range.clone()))
            .collect()
    });

    let mut decisions = Vec::with_capacity(inputs.len());
    for (range, batch) in ranges.into_iter().zip(batches) {
        let scores = batch.map_err(|e| tier_error(task, reports, range, e.into()))?;
        for s in scores {
            decisions.push(decide(s, member.threshold, task, backend.id())?);
        }
    }
    Ok(decisions)
}

fn run_tier_refs(reports: &[&PathologyReport], config: &TierConfig) -> Result<Vec<EnsembleResult>> {
    if reports.is_empty() {
        return Ok(Vec::new());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let [a, b] = config.members();
    let da = member_decisions(reports, a, config, &pool)?;
    let db = member_decisions(reports, b, config, &pool)?;
    da.into_iter()
        .zip(db)
        .map(|(x, y)| {
            let member_decisions = vec![x, y];
            let combined_label = or_combine(&member_decisions)?;
            Ok(EnsembleResult {
                member_decisions,
                combined_label,
            })
        })
        .collect()
}

/// Runs both members of a tier over `reports`, order-preserving. Any backend
/// failure fails the whole call; partial results are never returned.
pub fn run_tier(reports: &[PathologyReport], config: &TierConfig) -> Result<Vec<EnsembleResult>> {
    let refs: Vec<&PathologyReport> = reports.iter().collect();
    run_tier_refs(&refs, config)
}

fn check_tiers(t1: &TierConfig, t2: &TierConfig) -> Result<()> {
    if t1.task != Task::T1 || t2.task != Task::T2 {
        return Err(Error::Config(
            "triage needs a t1 tier config followed by a t2 tier config".into(),
        ));
    }
    Ok(())
}

fn cascade(
    reports: &[&PathologyReport],
    t1: &TierConfig,
    t2: &TierConfig,
    gating: Gating,
    gold_cancer: impl Fn(usize) -> bool,
) -> Result<Vec<TriageOutcome>> {
    check_tiers(t1, t2)?;
    let t1_results = run_tier_refs(reports, t1)?;
    let selected: Vec<usize> = t1_results
        .iter()
        .enumerate()
        .filter(|(i, r)| r.is_positive() || gold_cancer(*i))
        .map(|(i, _)| i)
        .collect();
    let t2_inputs: Vec<&PathologyReport> = selected.iter().map(|&i| reports[i]).collect();
    let t2_results = run_tier_refs(&t2_inputs, t2)?;

    let mut t2_slots: Vec<Option<EnsembleResult>> = vec![None; reports.len()];
    for (i, r) in selected.into_iter().zip(t2_results) {
        t2_slots[i] = Some(r);
    }
    Ok(reports
        .iter()
        .zip(t1_results)
        .zip(t2_slots)
        .map(|((report, t1r), t2r)| TriageOutcome::new(report.report_id.clone(), gating, t1r, t2r))
        .collect())
}

/// Production triage: tier 2 runs on tier-1 ensemble positives only.
pub fn triage(reports: &[PathologyReport], t1: &TierConfig, t2: &TierConfig) -> Result<Vec<TriageOutcome>> {
    let refs: Vec<&PathologyReport> = reports.iter().collect();
    cascade(&refs, t1, t2, Gating::Predicted, |_| false)
}

/// Evaluation triage: tier 2 also runs on every report whose gold tier-1
/// label is cancer. `final` still follows the predicted tier-1 label.
pub fn triage_gold_gated(records: &[LabeledReport], t1: &TierConfig, t2: &TierConfig) -> Result<Vec<TriageOutcome>> {
    let refs: Vec<&PathologyReport> = records.iter().map(|r| &r.report).collect();
    cascade(&refs, t1, t2, Gating::Gold, |i| {
        records[i].t1_label.is_some_and(|l| l.is_positive())
    })
}

pub fn triage_with(
    records: &[LabeledReport],
    t1: &TierConfig,
    t2: &TierConfig,
    gating: Gating,
) -> Result<Vec<TriageOutcome>> {
    match gating {
        Gating::Predicted => {
            let refs: Vec<&PathologyReport> = records.iter().map(|r| &r.report).collect();
            cascade(&refs, t1, t2, Gating::Predicted, |_| false)
        }
        Gating::Gold => triage_gold_gated(records, t1, t2),
    }
}

/// Outcome counts per final label, in [`FinalLabel::ALL`] order.
pub fn summarize(outcomes: &[TriageOutcome]) -> [(FinalLabel, usize); 3] {
    FinalLabel::ALL.map(|f| (f, outcomes.iter().filter(|o| o.final_label == f).count()))
}
