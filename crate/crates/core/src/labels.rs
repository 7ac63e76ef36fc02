//! Tier identifiers and the gold/predicted label vocabularies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Classification tier.
///
/// `T1` separates cancer from non-cancer reports; `T2` separates reportable
/// from non-reportable reports among cancers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    T1,
    T2,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::T1 => "t1",
            Task::T2 => "t2",
        }
    }

    pub fn positive(self) -> Label {
        Label::for_task(self, true)
    }

    pub fn negative(self) -> Label {
        Label::for_task(self, false)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(Task::T1),
            "t2" => Ok(Task::T2),
            other => Err(format!("unknown tier {other:?} (expected t1 or t2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T1Label {
    Cancer,
    NonCancer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T2Label {
    Reportable,
    NonReportable,
}

impl T1Label {
    pub fn is_positive(self) -> bool {
        self == T1Label::Cancer
    }
}

impl T2Label {
    pub fn is_positive(self) -> bool {
        self == T2Label::Reportable
    }
}

/// A label of either tier. Used where code is generic over the task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Cancer,
    NonCancer,
    Reportable,
    NonReportable,
}

impl Label {
    pub fn for_task(task: Task, positive: bool) -> Label {
        match (task, positive) {
            (Task::T1, true) => Label::Cancer,
            (Task::T1, false) => Label::NonCancer,
            (Task::T2, true) => Label::Reportable,
            (Task::T2, false) => Label::NonReportable,
        }
    }

    pub fn task(self) -> Task {
        match self {
            Label::Cancer | Label::NonCancer => Task::T1,
            Label::Reportable | Label::NonReportable => Task::T2,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Cancer | Label::Reportable)
    }

    /// The other label of the same task.
    pub fn opposite(self) -> Label {
        Label::for_task(self.task(), !self.is_positive())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Cancer => "cancer",
            Label::NonCancer => "non_cancer",
            Label::Reportable => "reportable",
            Label::NonReportable => "non_reportable",
        }
    }

    /// Human-readable class name as used in table rows.
    pub fn display_name(self) -> &'static str {
        match self {
            Label::Cancer => "cancer",
            Label::NonCancer => "non cancer",
            Label::Reportable => "reportable",
            Label::NonReportable => "non reportable",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<T1Label> for Label {
    fn from(l: T1Label) -> Self {
        Label::for_task(Task::T1, l.is_positive())
    }
}

impl From<T2Label> for Label {
    fn from(l: T2Label) -> Self {
        Label::for_task(Task::T2, l.is_positive())
    }
}
