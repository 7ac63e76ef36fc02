//! Text normalization and the two section-prioritizing input pipelines.
//!
//! Pipeline A puts the synoptic section first, pipeline B the diagnosis
//! section. Both continue with the other primary section, then specimen, then
//! any remaining sections in document order, and cut the result at a
//! whitespace-token budget.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::PathologyReport;
use crate::sectioner::{DIAGNOSIS, SPECIMEN, SYNOPTIC};
use crate::{Error, Result};

pub const DEFAULT_TOKEN_BUDGET: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineVariant {
    #[serde(rename = "A_synoptic_first", alias = "A")]
    SynopticFirst,
    #[serde(rename = "B_diagnosis_first", alias = "B")]
    DiagnosisFirst,
}

impl PipelineVariant {
    pub const ALL: [PipelineVariant; 2] = [PipelineVariant::SynopticFirst, PipelineVariant::DiagnosisFirst];

    pub fn priority_section(self) -> &'static str {
        match self {
            PipelineVariant::SynopticFirst => SYNOPTIC,
            PipelineVariant::DiagnosisFirst => DIAGNOSIS,
        }
    }

    /// Sections tried after the priority section, before the remainder.
    pub fn default_fallback(self) -> Vec<String> {
        let other = match self {
            PipelineVariant::SynopticFirst => DIAGNOSIS,
            PipelineVariant::DiagnosisFirst => SYNOPTIC,
        };
        vec![other.to_owned(), SPECIMEN.to_owned()]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineVariant::SynopticFirst => "A_synoptic_first",
            PipelineVariant::DiagnosisFirst => "B_diagnosis_first",
        }
    }

    /// `A` or `B`.
    pub fn short(self) -> &'static str {
        match self {
            PipelineVariant::SynopticFirst => "A",
            PipelineVariant::DiagnosisFirst => "B",
        }
    }
}

impl fmt::Display for PipelineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" | "A_synoptic_first" => Ok(PipelineVariant::SynopticFirst),
            "B" | "b" | "B_diagnosis_first" => Ok(PipelineVariant::DiagnosisFirst),
            other => Err(format!("unknown pipeline variant {other:?} (expected A or B)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedInput {
    pub text: String,
    pub approx_token_count: usize,
    pub truncated: bool,
    pub sections_used: Vec<String>,
}

impl NormalizedInput {
    /// Wraps already-normalized text, e.g. for scoring ad hoc strings.
    pub fn from_text(text: &str) -> Self {
        let text = normalize_text(text);
        NormalizedInput {
            approx_token_count: text.split(' ').filter(|t| !t.is_empty()).count(),
            text,
            truncated: false,
            sections_used: Vec::new(),
        }
    }
}

static PUNCT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}").expect("static regex"));

/// Lowercases, replaces every Unicode punctuation character with a space and
/// collapses whitespace. Digits are kept.
pub fn normalize_text(text: &str) -> String {
    let lowered = text.to_lowercase();
    let spaced = PUNCT_RE.replace_all(&lowered, " ");
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipeline {
    pub variant: PipelineVariant,
    pub token_budget: usize,
    /// Sections tried after the priority section.
    pub fallback: Vec<String>,
    /// Append sections not named above, in document order.
    pub include_remaining: bool,
}

impl Pipeline {
    pub fn new(variant: PipelineVariant) -> Self {
        Pipeline {
            variant,
            token_budget: DEFAULT_TOKEN_BUDGET,
            fallback: variant.default_fallback(),
            include_remaining: true,
        }
    }

    pub fn with_budget(mut self, token_budget: usize) -> Self {
        self.token_budget = token_budget;
        self
    }

    pub fn assemble(&self, report: &PathologyReport) -> Result<NormalizedInput> {
        if self.token_budget == 0 {
            return Err(Error::Config("token_budget must be positive".into()));
        }
        if report.sections.is_empty() && report.raw_text.is_empty() {
            return Err(Error::EmptyReport {
                report_id: report.report_id.clone(),
            });
        }

        let mut order: Vec<usize> = Vec::with_capacity(report.sections.len());
        let named = std::iter::once(self.variant.priority_section()).chain(self.fallback.iter().map(String::as_str));
        for name in named {
            if let Some(i) = report.sections.iter().position(|s| s.name == name) {
                if !order.contains(&i) {
                    order.push(i);
                }
            }
        }
        if self.include_remaining {
            for i in 0..report.sections.len() {
                if !order.contains(&i) {
                    order.push(i);
                }
            }
        }

        let mut tokens: Vec<String> = Vec::new();
        let mut sections_used = Vec::new();
        let mut truncated = false;
        for i in order {
            let section = &report.sections[i];
            let normalized = normalize_text(&section.text);
            let mut contributed = false;
            for tok in normalized.split(' ').filter(|t| !t.is_empty()) {
                if tokens.len() == self.token_budget {
                    truncated = true;
                    break;
                }
                tokens.push(tok.to_owned());
                contributed = true;
            }
            if contributed {
                sections_used.push(section.name.clone());
            }
            if truncated {
                break;
            }
        }

        if tokens.is_empty() {
            let normalized = normalize_text(&report.raw_text);
            let all: Vec<&str> = normalized.split(' ').filter(|t| !t.is_empty()).collect();
            truncated = all.len() > self.token_budget;
            tokens = all.into_iter().take(self.token_budget).map(str::to_owned).collect();
        }

        Ok(NormalizedInput {
            approx_token_count: tokens.len(),
            text: tokens.join(" "),
            truncated,
            sections_used,
        })
    }
}

/// Assembles `report` with the default pipeline for `variant`.
pub fn assemble_input(
    report: &PathologyReport,
    variant: PipelineVariant,
    token_budget: usize,
) -> Result<NormalizedInput> {
    Pipeline::new(variant).with_budget(token_budget).assemble(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Section;
    use crate::sectioner::Sectioner;

    fn report(sections: &[(&str, &str)]) -> PathologyReport {
        let sections: Vec<Section> = sections
            .iter()
            .map(|(n, t)| Section {
                name: (*n).into(),
                header: Some(format!("{}:\n", n.to_uppercase())),
                text: (*t).into(),
            })
            .collect();
        PathologyReport {
            report_id: "R".into(),
            diagnosis_year: 2023,
            source_site: None,
            raw_text: crate::sectioner::reassemble(&sections),
            sections,
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_text("Invasive CARCINOMA, Grade 2."),
            "invasive carcinoma grade 2"
        );
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("a  b"), "a b");
        assert_eq!(normalize_text("2cm.grade2"), "2cm grade2");
        assert_eq!(normalize_text("  «Résumé»—ÉTAT\t\n"), "résumé état");
        // symbols are not punctuation
        assert_eq!(normalize_text("Ki-67 > 20%"), "ki 67 > 20");
    }

    #[test]
    fn missing_priority_section_falls_back() {
        let r = report(&[("diagnosis", "Benign nevus.")]);
        let got = assemble_input(&r, PipelineVariant::SynopticFirst, 512).unwrap();
        assert_eq!(got.text, "benign nevus");
        assert_eq!(got.sections_used, ["diagnosis"]);
        assert!(!got.truncated);
    }

    #[test]
    fn variant_order() {
        let r = report(&[
            ("preamble", "History: mass."),
            ("diagnosis", "Benign nevus"),
            ("specimen", "Skin"),
            ("synoptic", "Tumour size 2 cm"),
        ]);
        let a = assemble_input(&r, PipelineVariant::SynopticFirst, 512).unwrap();
        assert!(a.text.starts_with("tumour size 2 cm benign nevus"));
        assert_eq!(a.sections_used, ["synoptic", "diagnosis", "specimen", "preamble"]);
        let b = assemble_input(&r, PipelineVariant::DiagnosisFirst, 512).unwrap();
        assert_eq!(b.text, "benign nevus tumour size 2 cm skin history mass");
        assert_ne!(a.text.split(' ').next(), b.text.split(' ').next());
    }

    #[test]
    fn budget_of_one() {
        let r = report(&[("diagnosis", "invasive carcinoma")]);
        let got = assemble_input(&r, PipelineVariant::DiagnosisFirst, 1).unwrap();
        assert_eq!(got.approx_token_count, 1);
        assert!(got.truncated);
        assert_eq!(got.text, "invasive");
    }

    #[test]
    fn budget_boundary_is_not_truncation() {
        let r = report(&[("diagnosis", "invasive carcinoma"), ("specimen", "")]);
        let got = assemble_input(&r, PipelineVariant::DiagnosisFirst, 2).unwrap();
        assert!(!got.truncated);
        assert_eq!(got.sections_used, ["diagnosis"]);
    }

    #[test]
    fn truncation_drops_later_sections() {
        let r = report(&[("diagnosis", "a b c"), ("synoptic", "d e")]);
        let got = assemble_input(&r, PipelineVariant::DiagnosisFirst, 4).unwrap();
        assert_eq!(got.text, "a b c d");
        assert!(got.truncated);
        assert_eq!(got.sections_used, ["diagnosis", "synoptic"]);
    }

    #[test]
    fn empty_report_errors() {
        let r = PathologyReport {
            report_id: "E".into(),
            diagnosis_year: 2023,
            source_site: None,
            sections: vec![],
            raw_text: String::new(),
        };
        let err = assemble_input(&r, PipelineVariant::SynopticFirst, 8).unwrap_err();
        assert!(matches!(err, Error::EmptyReport { .. }));
    }

    #[test]
    fn headers_only_falls_back_to_raw_text() {
        let r = PathologyReport::parse("H", 2023, "DIAGNOSIS:\nSYNOPTIC:\n", &Sectioner::default());
        let got = assemble_input(&r, PipelineVariant::SynopticFirst, 8).unwrap();
        assert_eq!(got.text, "diagnosis synoptic");
        assert!(got.sections_used.is_empty());
    }

    #[test]
    fn duplicate_priority_section_uses_first_then_rest() {
        let r = report(&[("diagnosis", "first"), ("diagnosis", "second")]);
        let got = assemble_input(&r, PipelineVariant::DiagnosisFirst, 8).unwrap();
        assert_eq!(got.text, "first second");
    }

    #[test]
    fn custom_fallback_without_remaining() {
        let r = report(&[("preamble", "p"), ("diagnosis", "d"), ("specimen", "s")]);
        let p = Pipeline {
            variant: PipelineVariant::SynopticFirst,
            token_budget: 10,
            fallback: vec!["specimen".into()],
            include_remaining: false,
        };
        assert_eq!(p.assemble(&r).unwrap().text, "s");
    }

    #[test]
    fn variant_parsing_and_serde() {
        assert_eq!("A".parse::<PipelineVariant>().unwrap(), PipelineVariant::SynopticFirst);
        let json = serde_json::to_string(&PipelineVariant::DiagnosisFirst).unwrap();
        assert_eq!(json, "\"B_diagnosis_first\"");
        let back: PipelineVariant = serde_json::from_str("\"A\"").unwrap();
        assert_eq!(back, PipelineVariant::SynopticFirst);
    }
}
