//! Binary classifier backends.
//!
//! A backend turns normalized inputs into positive-class probabilities. Two
//! implementations exist: [`BaselineBackend`], a hashed-feature logistic
//! regression trained locally, and [`RemoteBackend`], a client for an
//! inference service that hosts fine-tuned transformer models.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, BackendErrorKind};
use crate::preprocess::{NormalizedInput, PipelineVariant};
use crate::{Error, Label, Result, Task};

pub mod baseline;
pub mod features;
pub mod remote;

pub use baseline::{train_baseline, BaselineBackend, BaselineModel, Hyperparameters};
pub use remote::{remote_score, RemoteBackend, RemoteOptions};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Probability of the task's positive class.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ClassifierScore(f64);

impl ClassifierScore {
    /// Returns `None` for NaN or values outside `[0, 1]`.
    pub fn new(probability: f64) -> Option<Self> {
        (0.0..=1.0)
            .contains(&probability)
            .then_some(ClassifierScore(probability))
    }

    pub fn probability(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for ClassifierScore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = f64::deserialize(d)?;
        ClassifierScore::new(p).ok_or_else(|| serde::de::Error::custom(format!("probability {p} outside [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: Label,
    pub score: ClassifierScore,
    pub threshold: f64,
    pub backend_id: String,
}

impl Decision {
    pub fn is_positive(&self) -> bool {
        self.label.is_positive()
    }

    pub fn task(&self) -> Task {
        self.label.task()
    }
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")))
    }
}

/// Thresholds a score. Ties resolve to the positive class.
pub fn decide(score: ClassifierScore, threshold: f64, task: Task, backend_id: &str) -> Result<Decision> {
    check_threshold(threshold)?;
    Ok(Decision {
        label: Label::for_task(task, score.probability() >= threshold),
        score,
        threshold,
        backend_id: backend_id.to_owned(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    NativeBaseline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub task: Task,
    pub variant: PipelineVariant,
    pub kind: BackendKind,
}

/// Anything that scores a batch of inputs for a task.
///
/// Implementations must be pure with respect to model state: scoring the
/// same batch twice, serially or concurrently, gives the same scores.
pub trait ClassifierBackend: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    fn kind(&self) -> BackendKind;

    fn score(
        &self,
        task: Task,
        inputs: &[NormalizedInput],
    ) -> std::result::Result<Vec<ClassifierScore>, BackendErrorKind>;
}

impl<B: ClassifierBackend + ?Sized> ClassifierBackend for Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn kind(&self) -> BackendKind {
        (**self).kind()
    }

    fn score(
        &self,
        task: Task,
        inputs: &[NormalizedInput],
    ) -> std::result::Result<Vec<ClassifierScore>, BackendErrorKind> {
        (**self).score(task, inputs)
    }
}

/// Scores one batch and checks the one-score-per-input contract. `batch`
/// is the batch's index range within the caller's input list and is
/// reported on failure.
pub fn score_batch(
    backend: &dyn ClassifierBackend,
    task: Task,
    inputs: &[NormalizedInput],
    batch: Range<usize>,
) -> std::result::Result<Vec<ClassifierScore>, BackendError> {
    let wrap = |kind| BackendError {
        backend_id: backend.id().to_owned(),
        batch: batch.clone(),
        kind,
    };
    if inputs.is_empty() {
        return Err(wrap(BackendErrorKind::EmptyBatch));
    }
    let scores = backend.score(task, inputs).map_err(wrap)?;
    if scores.len() != inputs.len() {
        return Err(wrap(BackendErrorKind::CountMismatch {
            expected: inputs.len(),
            got: scores.len(),
        }));
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_range() {
        assert!(ClassifierScore::new(0.0).is_some());
        assert!(ClassifierScore::new(1.0).is_some());
        assert!(ClassifierScore::new(1.5).is_none());
        assert!(ClassifierScore::new(-0.1).is_none());
        assert!(ClassifierScore::new(f64::NAN).is_none());
        assert!(serde_json::from_str::<ClassifierScore>("1.5").is_err());
    }

    fn d(p: f64, t: f64) -> Decision {
        decide(ClassifierScore::new(p).unwrap(), t, Task::T1, "m").unwrap()
    }

    #[test]
    fn decide_examples() {
        assert!(d(0.7, 0.5).is_positive());
        assert!(d(0.5, 0.5).is_positive());
        assert!(!d(0.49, 0.5).is_positive());
        assert_eq!(d(0.49, 0.5).label, Label::NonCancer);
        let t2 = decide(ClassifierScore::new(0.9).unwrap(), 0.5, Task::T2, "m").unwrap();
        assert_eq!(t2.label, Label::Reportable);
    }

    #[test]
    fn decide_rejects_bad_threshold() {
        let s = ClassifierScore::new(0.5).unwrap();
        for t in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(decide(s, t, Task::T1, "m").is_err());
        }
    }

    #[derive(Debug)]
    struct Short;

    impl ClassifierBackend for Short {
        fn id(&self) -> &str {
            "short"
        }
        fn kind(&self) -> BackendKind {
            BackendKind::Remote
        }
        fn score(
            &self,
            _: Task,
            inputs: &[NormalizedInput],
        ) -> std::result::Result<Vec<ClassifierScore>, BackendErrorKind> {
            Ok(vec![ClassifierScore::new(0.5).unwrap(); inputs.len() - 1])
        }
    }

    #[test]
    fn score_batch_enforces_count() {
        let inputs = vec![NormalizedInput::from_text("a"), NormalizedInput::from_text("b")];
        let err = score_batch(&Short, Task::T1, &inputs, 4..6).unwrap_err();
        assert_eq!(err.backend_id, "short");
        assert_eq!(err.batch, 4..6);
        assert_eq!(err.kind, BackendErrorKind::CountMismatch { expected: 2, got: 1 });
        let err = score_batch(&Short, Task::T1, &[], 0..0).unwrap_err();
        assert_eq!(err.kind, BackendErrorKind::EmptyBatch);
    }
}
