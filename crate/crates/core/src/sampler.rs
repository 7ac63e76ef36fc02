//! Train/test splitting and ratio-based undersampling.
//!
//! The tier-1 policy keeps every cancer record and draws
//! `floor(0.8 * N(cancer))` non-cancer records; the tier-2 policy keeps every
//! non-reportable record and draws `floor(1.2 * N(non_reportable))`
//! reportable records. Draws are uniform without replacement. Undersampling
//! is applied to the training portion of a split only, so the test portion
//! keeps the natural class distribution.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::corpus::{Corpus, LabeledReport};
use crate::{Error, Label, Result, Task};

pub const T1_RATIO: f64 = 0.8;
pub const T2_RATIO: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed,
            stratified: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_fraction > 0.0 && self.train_fraction < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UndersamplePolicy {
    pub task: Task,
    pub kept_class: Label,
    pub sampled_class: Label,
    pub ratio: f64,
    pub seed: u64,
}

impl UndersamplePolicy {
    /// Keeps cancers, draws non-cancers at 0.8x.
    pub fn t1(seed: u64) -> Self {
        UndersamplePolicy {
            task: Task::T1,
            kept_class: Label::Cancer,
            sampled_class: Label::NonCancer,
            ratio: T1_RATIO,
            seed,
        }
    }

    /// Keeps non-reportables, draws reportables at 1.2x.
    pub fn t2(seed: u64) -> Self {
        UndersamplePolicy {
            task: Task::T2,
            kept_class: Label::NonReportable,
            sampled_class: Label::Reportable,
            ratio: T2_RATIO,
            seed,
        }
    }

    pub fn for_task(task: Task, ratio: f64, seed: u64) -> Self {
        let base = match task {
            Task::T1 => Self::t1(seed),
            Task::T2 => Self::t2(seed),
        };
        UndersamplePolicy { ratio, ..base }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::Config(format!(
                "undersampling ratio must be positive, got {}",
                self.ratio
            )));
        }
        if self.kept_class == self.sampled_class
            || self.kept_class.task() != self.task
            || self.sampled_class.task() != self.task
        {
            return Err(Error::Config(format!(
                "policy classes {} / {} are not the two {} labels",
                self.kept_class, self.sampled_class, self.task
            )));
        }
        Ok(())
    }

    /// `min(floor(ratio * kept), available)`.
    pub fn target(&self, kept: usize, available: usize) -> usize {
        floor_product(self.ratio, kept).min(available)
    }
}

/// `floor(ratio * n)`, treating products within relative 1e-9 of an integer
/// as that integer so decimal ratios such as 1.2 floor as they would in exact
/// arithmetic.
pub fn floor_product(ratio: f64, n: usize) -> usize {
    let x = ratio * n as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest as usize
    } else {
        x.floor() as usize
    }
}

/// Per-class record counts for one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub task: Task,
    pub positive: usize,
    pub negative: usize,
    /// Records carrying no label for the task.
    pub unlabeled: usize,
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> usize {
        if label.task() != self.task {
            0
        } else if label.is_positive() {
            self.positive
        } else {
            self.negative
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative + self.unlabeled
    }
}

impl Serialize for ClassCounts {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry(self.task.positive().as_str(), &self.positive)?;
        m.serialize_entry(self.task.negative().as_str(), &self.negative)?;
        m.serialize_entry("unlabeled", &self.unlabeled)?;
        m.end()
    }
}

pub fn class_counts(corpus: &Corpus, task: Task) -> ClassCounts {
    count_records(corpus.records.iter(), task)
}

fn count_records<'a>(records: impl Iterator<Item = &'a LabeledReport>, task: Task) -> ClassCounts {
    let mut c = ClassCounts {
        task,
        positive: 0,
        negative: 0,
        unlabeled: 0,
    };
    for r in records {
        match r.label(task) {
            Some(l) if l.is_positive() => c.positive += 1,
            Some(_) => c.negative += 1,
            None => c.unlabeled += 1,
        }
    }
    c
}

fn require_labels(corpus: &Corpus, task: Task) -> Result<Vec<Label>> {
    corpus
        .records
        .iter()
        .map(|r| {
            r.label(task).ok_or_else(|| Error::MissingLabel {
                report_id: r.id().to_owned(),
                task,
            })
        })
        .collect()
}

fn subset(corpus: &Corpus, keep: &[bool], role: &str) -> Corpus {
    let records = corpus
        .records
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(r, _)| r.clone())
        .collect();
    let mut out = Corpus {
        records,
        provenance: corpus.provenance.clone(),
    };
    out.provenance.insert("role".into(), role.into());
    out
}

/// Disjoint, exhaustive train/test partition. Both halves keep corpus order.
pub fn split(corpus: &Corpus, spec: &SplitSpec, task: Task) -> Result<(Corpus, Corpus)> {
    spec.validate()?;
    let labels = require_labels(corpus, task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_train = vec![false; labels.len()];

    let strata: Vec<Vec<usize>> = if spec.stratified {
        [task.positive(), task.negative()]
            .iter()
            .map(|class| (0..labels.len()).filter(|&i| labels[i] == *class).collect())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    for mut stratum in strata {
        let n_train = (stratum.len() as f64 * spec.train_fraction).round() as usize;
        stratum.shuffle(&mut rng);
        for &i in &stratum[..n_train] {
            in_train[i] = true;
        }
    }

    let in_test: Vec<bool> = in_train.iter().map(|t| !t).collect();
    Ok((subset(corpus, &in_train, "train"), subset(corpus, &in_test, "test")))
}

/// Keeps every `kept_class` record and a uniform draw without replacement of
/// `min(floor(ratio * N(kept)), N(sampled))` `sampled_class` records.
pub fn undersample(train: &Corpus, policy: &UndersamplePolicy) -> Result<Corpus> {
    policy.validate()?;
    let labels = require_labels(train, policy.task)?;
    let kept = labels.iter().filter(|l| **l == policy.kept_class).count();
    if kept == 0 {
        return Err(Error::EmptyKeptClass(policy.kept_class.to_string()));
    }
    let sampled_idx: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == policy.sampled_class)
        .collect();
    let target = policy.target(kept, sampled_idx.len());

    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut keep: Vec<bool> = labels.iter().map(|l| *l == policy.kept_class).collect();
    for pos in index::sample(&mut rng, sampled_idx.len(), target) {
        keep[sampled_idx[pos]] = true;
    }
    Ok(subset(train, &keep, "train_undersampled"))
}

/// Records a task's dataset is built from: every record for tier 1, the
/// records carrying a tier-2 label for tier 2.
pub fn task_records(corpus: &Corpus, task: Task) -> Corpus {
    match task {
        Task::T1 => corpus.clone(),
        Task::T2 => Corpus {
            records: corpus
                .records
                .iter()
                .filter(|r| r.t2_label.is_some())
                .cloned()
                .collect(),
            provenance: corpus.provenance.clone(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetManifest {
    pub task: Task,
    pub split: SplitSpec,
    pub policy: UndersamplePolicy,
    pub counts_all: ClassCounts,
    pub counts_train_before: ClassCounts,
    pub counts_train_after: ClassCounts,
    pub counts_test: ClassCounts,
    /// `floor(ratio * N(kept))` before capping at availability.
    pub sampled_target: usize,
}

#[derive(Debug, Clone)]
pub struct BuiltDataset {
    pub train: Corpus,
    pub test: Corpus,
    pub manifest: DatasetManifest,
}

/// Split first, then undersample the training portion.
pub fn build_dataset(corpus: &Corpus, split_spec: &SplitSpec, policy: &UndersamplePolicy) -> Result<BuiltDataset> {
    let task = policy.task;
    let source = task_records(corpus, task);
    let (train_full, test) = split(&source, split_spec, task)?;
    let train = undersample(&train_full, policy)?;
    let counts_train_before = class_counts(&train_full, task);
    let manifest = DatasetManifest {
        task,
        split: *split_spec,
        policy: *policy,
        counts_all: class_counts(&source, task),
        counts_train_before,
        counts_train_after: class_counts(&train, task),
        counts_test: class_counts(&test, task),
        sampled_target: floor_product(policy.ratio, counts_train_before.get(policy.kept_class)),
    };
    Ok(BuiltDataset { train, test, manifest })
}
