//! Report data model and the line-delimited corpus format.
//!
//! Each line of a corpus file is one JSON object:
//!
//! ```text
//! {"report_id":"R1","diagnosis_year":2023,"source_site":"HSC",
//!  "raw_text":"...","sections":[{"name":"diagnosis","header":"DIAGNOSIS:\n","text":"..."}],
//!  "t1_label":"cancer","t2_label":"reportable"}
//! ```
//!
//! `source_site`, `sections` and both labels are optional. When `sections` is
//! absent the loader derives them from `raw_text` with the configured
//! [`Sectioner`].

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::labels::{T1Label, T2Label};
use crate::sectioner::{reassemble, Sectioner};
use crate::{Error, Label, Result, Task};

/// True for non-empty, lowercase, whitespace-free section names.
pub fn is_normalized_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(char::is_whitespace) && name.chars().all(|c| !c.is_uppercase())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {
    pub name: String,
    /// Raw header line as it appears in the report, absent for the preamble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathologyReport {
    pub report_id: String,
    pub diagnosis_year: i32,
    pub source_site: Option<String>,
    pub sections: Vec<Section>,
    pub raw_text: String,
}

impl PathologyReport {
    /// Builds a report whose sections are parsed from `raw_text`.
    pub fn parse(
        report_id: impl Into<String>,
        diagnosis_year: i32,
        raw_text: impl Into<String>,
        sectioner: &Sectioner,
    ) -> Self {
        let raw_text = raw_text.into();
        PathologyReport {
            report_id: report_id.into(),
            diagnosis_year,
            source_site: None,
            sections: sectioner.parse(&raw_text),
            raw_text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledReport {
    pub report: PathologyReport,
    pub t1_label: Option<T1Label>,
    pub t2_label: Option<T2Label>,
}

impl LabeledReport {
    pub fn label(&self, task: Task) -> Option<Label> {
        match task {
            Task::T1 => self.t1_label.map(Label::from),
            Task::T2 => self.t2_label.map(Label::from),
        }
    }

    pub fn id(&self) -> &str {
        &self.report.report_id
    }

    fn check_label_consistency(&self) -> std::result::Result<(), String> {
        if self.t2_label.is_some() && self.t1_label != Some(T1Label::Cancer) {
            return Err("t2_label requires t1_label = cancer".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub records: Vec<LabeledReport>,
    pub provenance: BTreeMap<String, String>,
}

impl Corpus {
    /// Validates uniqueness and label consistency.
    pub fn new(records: Vec<LabeledReport>) -> Result<Self> {
        let corpus = Corpus {
            records,
            provenance: BTreeMap::new(),
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn with_provenance(mut self, key: &str, value: impl Into<String>) -> Self {
        self.provenance.insert(key.to_owned(), value.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(self.records.len());
        for (idx, rec) in self.records.iter().enumerate() {
            if let Some(first) = seen.insert(rec.id(), idx) {
                return Err(Error::InvalidCorpus(format!(
                    "duplicate report_id {:?} at records {} and {}",
                    rec.id(),
                    first + 1,
                    idx + 1
                )));
            }
            rec.check_label_consistency()
                .map_err(|m| Error::InvalidCorpus(format!("report {:?}: {m}", rec.id())))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn reports(&self) -> Vec<PathologyReport> {
        self.records.iter().map(|r| r.report.clone()).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Reject unknown fields and require supplied sections to reassemble to
    /// `raw_text`.
    pub strict: bool,
    pub sectioner: Sectioner,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    report_id: &'a str,
    diagnosis_year: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_site: Option<&'a str>,
    raw_text: &'a str,
    sections: &'a [Section],
    #[serde(skip_serializing_if = "Option::is_none")]
    t1_label: Option<T1Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t2_label: Option<T2Label>,
}

const KNOWN_FIELDS: &[&str] = &[
    "report_id",
    "diagnosis_year",
    "source_site",
    "raw_text",
    "sections",
    "t1_label",
    "t2_label",
];

fn field_err(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Record {
        line,
        field: field.to_owned(),
        message: message.into(),
    }
}

fn take_string(obj: &mut Map<String, Value>, line: usize, field: &str) -> Result<Option<String>> {
    match obj.remove(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(field_err(line, field, format!("expected string, got {other}"))),
    }
}

fn take_label<T: serde::de::DeserializeOwned>(
    obj: &mut Map<String, Value>,
    line: usize,
    field: &str,
) -> Result<Option<T>> {
    match obj.remove(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|_| field_err(line, field, format!("unknown label {v}"))),
    }
}

/// Parses one corpus line. `line` is 1-based and used for error messages.
pub fn parse_record(text: &str, line: usize, opts: &LoadOptions) -> Result<LabeledReport> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| field_err(line, "<record>", format!("not valid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(field_err(line, "<record>", "expected a JSON object"));
    };

    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| !KNOWN_FIELDS.contains(&k.as_str()))
        .cloned()
        .collect();
    if let Some(first) = unknown.first() {
        if opts.strict {
            return Err(field_err(line, first, "unknown field"));
        }
        log::warn!("line {line}: ignoring unknown field(s) {}", unknown.join(", "));
    }

    let report_id = take_string(&mut obj, line, "report_id")?.ok_or_else(|| field_err(line, "report_id", "missing"))?;
    if report_id.is_empty() {
        return Err(field_err(line, "report_id", "must not be empty"));
    }
    let diagnosis_year = match obj.remove("diagnosis_year") {
        Some(Value::Number(n)) => n
            .as_i64()
            .and_then(|y| i32::try_from(y).ok())
            .ok_or_else(|| field_err(line, "diagnosis_year", format!("not an integer year: {n}")))?,
        None | Some(Value::Null) => return Err(field_err(line, "diagnosis_year", "missing")),
        Some(other) => {
            return Err(field_err(
                line,
                "diagnosis_year",
                format!("expected integer, got {other}"),
            ))
        }
    };
    let source_site = take_string(&mut obj, line, "source_site")?;
    let raw_text = take_string(&mut obj, line, "raw_text")?.ok_or_else(|| field_err(line, "raw_text", "missing"))?;

    let sections = match obj.remove("sections") {
        None | Some(Value::Null) => opts.sectioner.parse(&raw_text),
        Some(v) => {
            let sections: Vec<Section> =
                serde_json::from_value(v).map_err(|e| field_err(line, "sections", e.to_string()))?;
            if let Some(bad) = sections.iter().find(|s| !is_normalized_name(&s.name)) {
                return Err(field_err(
                    line,
                    "sections",
                    format!("section name {:?} is not normalized", bad.name),
                ));
            }
            if opts.strict && !sections.is_empty() && reassemble(&sections) != raw_text {
                return Err(field_err(line, "sections", "sections do not reassemble to raw_text"));
            }
            sections
        }
    };

    let t1_label = take_label::<T1Label>(&mut obj, line, "t1_label")?;
    let t2_label = take_label::<T2Label>(&mut obj, line, "t2_label")?;

    let rec = LabeledReport {
        report: PathologyReport {
            report_id,
            diagnosis_year,
            source_site,
            sections,
            raw_text,
        },
        t1_label,
        t2_label,
    };
    rec.check_label_consistency()
        .map_err(|m| field_err(line, "t2_label", m))?;
    Ok(rec)
}

pub fn read_corpus<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Corpus> {
    let mut records = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| field_err(line_no, "<record>", format!("read failed: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line, line_no, opts)?;
        if let Some(&prev) = first_line.get(rec.id()) {
            return Err(Error::DuplicateReportId {
                report_id: rec.id().to_owned(),
                first_line: prev,
                second_line: line_no,
            });
        }
        first_line.insert(rec.id().to_owned(), line_no);
        records.push(rec);
    }
    Ok(Corpus {
        records,
        provenance: BTreeMap::new(),
    })
}

pub fn load_corpus(path: &Path, opts: &LoadOptions) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let corpus = read_corpus(BufReader::new(file), opts)?;
    Ok(corpus.with_provenance("source", path.display().to_string()))
}

/// Serializes one record as a single JSON line (without the newline).
pub fn record_to_line(rec: &LabeledReport) -> String {
    let out = RecordOut {
        report_id: &rec.report.report_id,
        diagnosis_year: rec.report.diagnosis_year,
        source_site: rec.report.source_site.as_deref(),
        raw_text: &rec.report.raw_text,
        sections: &rec.report.sections,
        t1_label: rec.t1_label,
        t2_label: rec.t2_label,
    };
    serde_json::to_string(&out).expect("record serialization cannot fail")
}

pub fn corpus_to_bytes(corpus: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    for rec in &corpus.records {
        buf.extend_from_slice(record_to_line(rec).as_bytes());
        buf.push(b'\n');
    }
    buf
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    corpus.validate()?;
    write_atomic(path, &corpus_to_bytes(corpus))
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("not a file path")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
