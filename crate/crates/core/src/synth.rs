//! Deterministic synthetic pathology corpora for desk-scale runs.
//!
//! Class counts are realized by rounding (`round(n * fraction)`), never by
//! independent draws, so a given spec always yields the same number of cancer
//! and reportable records. Class-indicative phrases are planted independently
//! in the synoptic and diagnosis sections; each signal slot carries a class
//! phrase with probability `vocabulary_signal_strength` and a neutral phrase
//! otherwise.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledReport, PathologyReport};
use crate::labels::{T1Label, T2Label};
use crate::sectioner::Sectioner;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_reports: usize,
    pub cancer_fraction: f64,
    pub reportable_fraction_within_cancer: f64,
    pub vocabulary_signal_strength: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_reports: 1000,
            cancer_fraction: 0.21,
            reportable_fraction_within_cancer: 0.8,
            vocabulary_signal_strength: 0.9,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cancer_fraction", self.cancer_fraction),
            (
                "reportable_fraction_within_cancer",
                self.reportable_fraction_within_cancer,
            ),
            ("vocabulary_signal_strength", self.vocabulary_signal_strength),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn cancer_count(&self) -> usize {
        (self.n_reports as f64 * self.cancer_fraction).round() as usize
    }

    pub fn reportable_count(&self) -> usize {
        (self.cancer_count() as f64 * self.reportable_fraction_within_cancer).round() as usize
    }
}

const NEUTRAL: &[&str] = &[
    "tissue submitted in toto",
    "sections examined at multiple levels",
    "received in formalin",
    "fragments of soft tan tissue",
    "representative sections submitted",
    "stained slides reviewed",
    "see gross description",
    "clinical correlation suggested",
];

const BENIGN: &[&str] = &[
    "benign nevus",
    "no malignancy identified",
    "chronic gastritis",
    "fibrocystic change",
    "seborrheic keratosis",
    "reactive lymphoid hyperplasia",
    "tubular adenoma with low grade dysplasia",
    "negative for dysplasia",
];

const MALIGNANT: &[&str] = &[
    "malignant neoplasm",
    "carcinoma identified",
    "tumour present",
    "malignancy confirmed",
    "neoplastic cells infiltrate",
];

const REPORTABLE: &[&str] = &[
    "invasive ductal carcinoma",
    "adenocarcinoma moderately differentiated",
    "malignant melanoma invasive",
    "lymphovascular invasion present",
    "metastatic carcinoma in lymph node",
    "high grade urothelial carcinoma",
];

const NON_REPORTABLE: &[&str] = &[
    "basal cell carcinoma nodular type",
    "cutaneous squamous cell carcinoma",
    "basal cell carcinoma superficial",
    "keratinizing squamous cell carcinoma of skin",
];

const SITES: &[&str] = &[
    "skin left forearm",
    "breast right core biopsy",
    "colon sigmoid",
    "stomach antrum",
    "lymph node axillary",
    "prostate needle core",
    "bladder transurethral resection",
];

const SOURCE_SITES: &[&str] = &["HSC", "WMH", "CWH", "JPMH", "GBCH"];

#[derive(Clone, Copy)]
enum Truth {
    NonCancer,
    NonReportable,
    Reportable,
}

struct Writer<'a> {
    rng: &'a mut ChaCha8Rng,
    strength: f64,
}

impl Writer<'_> {
    fn pick(&mut self, pool: &[&'static str]) -> &'static str {
        pool.choose(self.rng).copied().expect("non-empty pool")
    }

    fn t1_slot(&mut self, truth: Truth) -> &'static str {
        if !self.rng.random_bool(self.strength) {
            return self.pick(NEUTRAL);
        }
        match truth {
            Truth::NonCancer => self.pick(BENIGN),
            _ => self.pick(MALIGNANT),
        }
    }

    fn t2_slot(&mut self, truth: Truth) -> &'static str {
        if !self.rng.random_bool(self.strength) {
            return self.pick(NEUTRAL);
        }
        match truth {
            Truth::NonCancer => self.pick(NEUTRAL),
            Truth::NonReportable => self.pick(NON_REPORTABLE),
            Truth::Reportable => self.pick(REPORTABLE),
        }
    }

    fn report(&mut self, truth: Truth, accession: usize) -> String {
        let site = self.pick(SITES);
        let mut text = format!("Accession {accession:06}\nClinical history: lesion of {site}, rule out malignancy.\n");

        let specimen_header = self.pick(&["SPECIMEN:", "SPECIMENS RECEIVED:", "GROSS DESCRIPTION:"]);
        text.push_str(&format!("{specimen_header}\n{site}, {}.\n", self.pick(NEUTRAL)));

        if self.rng.random_bool(0.6) {
            let header = self.pick(&["SYNOPTIC REPORT:", "SYNOPTIC DATA:", "CANCER SYNOPTIC REPORT:"]);
            let histology = self.t1_slot(truth);
            let behaviour = self.t2_slot(truth);
            let size = self.rng.random_range(1..60) as f64 / 10.0;
            text.push_str(&format!(
                "{header}\nProcedure: excision\nHistologic type: {histology}\nBehaviour: {behaviour}\nTumour size: {size:.1} cm\nMargins: {}\n",
                self.pick(&["clear", "involved", "not applicable"])
            ));
        }

        let header = self.pick(&["DIAGNOSIS:", "FINAL DIAGNOSIS:", "PATHOLOGIC DIAGNOSIS:"]);
        let first = self.t1_slot(truth);
        let second = self.t2_slot(truth);
        let third = self.t1_slot(truth);
        text.push_str(&format!(
            "{header}\n{site}: {first}; {second}.\nComment: {third}, {}.\n",
            self.pick(NEUTRAL)
        ));
        text
    }
}

/// Generates a labeled corpus. Deterministic in `(spec, seed)`.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let n = spec.n_reports;
    let n_cancer = spec.cancer_count().min(n);
    let n_reportable = spec.reportable_count().min(n_cancer);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut truths = vec![Truth::NonCancer; n];
    for (rank, &idx) in order.iter().enumerate().take(n_cancer) {
        truths[idx] = if rank < n_reportable {
            Truth::Reportable
        } else {
            Truth::NonReportable
        };
    }

    let sectioner = Sectioner::default();
    let mut records = Vec::with_capacity(n);
    for (i, truth) in truths.into_iter().enumerate() {
        let mut writer = Writer {
            rng: &mut rng,
            strength: spec.vocabulary_signal_strength,
        };
        let raw = writer.report(truth, i);
        let year = 2022 + i32::from(rng.random_bool(0.5));
        let mut report = PathologyReport::parse(format!("S{i:06}"), year, raw, &sectioner);
        report.source_site = Some(SOURCE_SITES.choose(&mut rng).expect("non-empty").to_string());
        let (t1_label, t2_label) = match truth {
            Truth::NonCancer => (T1Label::NonCancer, None),
            Truth::NonReportable => (T1Label::Cancer, Some(T2Label::NonReportable)),
            Truth::Reportable => (T1Label::Cancer, Some(T2Label::Reportable)),
        };
        records.push(LabeledReport {
            report,
            t1_label: Some(t1_label),
            t2_label,
        });
    }

    Ok(Corpus::new(records)?
        .with_provenance("generator", "synth_corpus")
        .with_provenance("seed", seed.to_string())
        .with_provenance("spec", serde_json::to_string(spec).expect("spec serializes")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::corpus_to_bytes;
    use crate::sectioner::{get_section, reassemble};

    fn spec(n: usize, cancer: f64) -> SynthSpec {
        SynthSpec {
            n_reports: n,
            cancer_fraction: cancer,
            ..Default::default()
        }
    }

    #[test]
    fn zero_reports() {
        assert!(synth_corpus(&spec(0, 0.21), 1).unwrap().is_empty());
    }

    #[test]
    fn default_distribution_at_10400() {
        let c = synth_corpus(&spec(10_400, 0.21), 7).unwrap();
        let cancers = c.records.iter().filter(|r| r.t1_label == Some(T1Label::Cancer)).count();
        assert_eq!(cancers, 2_184);
        let reportable = c
            .records
            .iter()
            .filter(|r| r.t2_label == Some(T2Label::Reportable))
            .count();
        assert_eq!(reportable, (2_184.0f64 * 0.8).round() as usize);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = synth_corpus(&spec(300, 0.3), 42).unwrap();
        let b = synth_corpus(&spec(300, 0.3), 42).unwrap();
        assert_eq!(corpus_to_bytes(&a), corpus_to_bytes(&b));
        let c = synth_corpus(&spec(300, 0.3), 43).unwrap();
        assert_ne!(corpus_to_bytes(&a), corpus_to_bytes(&c));
    }

    #[test]
    fn reports_carry_primary_sections() {
        let c = synth_corpus(&spec(200, 0.5), 3).unwrap();
        let mut with_synoptic = 0;
        for r in &c.records {
            assert!(get_section(&r.report, "diagnosis").is_some());
            assert!(get_section(&r.report, "specimen").is_some());
            with_synoptic += usize::from(get_section(&r.report, "synoptic").is_some());
            assert_eq!(reassemble(&r.report.sections), r.report.raw_text);
        }
        assert!(with_synoptic > 50 && with_synoptic < 200);
    }

    #[test]
    fn full_signal_plants_class_vocabulary() {
        let s = SynthSpec {
            n_reports: 100,
            cancer_fraction: 0.5,
            reportable_fraction_within_cancer: 0.5,
            vocabulary_signal_strength: 1.0,
        };
        let c = synth_corpus(&s, 9).unwrap();
        for r in &c.records {
            let diag = &get_section(&r.report, "diagnosis").unwrap().text;
            let benign = BENIGN.iter().any(|p| diag.contains(p));
            assert_eq!(benign, r.t1_label == Some(T1Label::NonCancer), "{diag}");
            if r.t2_label == Some(T2Label::Reportable) {
                assert!(REPORTABLE.iter().any(|p| diag.contains(p)));
            }
        }
    }

    #[test]
    fn rejects_out_of_range_fractions() {
        assert!(synth_corpus(&spec(10, 1.5), 0).is_err());
        assert!(synth_corpus(&spec(10, f64::NAN), 0).is_err());
    }
}
