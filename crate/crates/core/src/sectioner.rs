//! Splits raw report text into named sections.
//!
//! A line is a header when its leading content (indentation ignored) is a
//! short label of letters, digits, spaces and `&,/-` followed by a colon, and
//! the label's letters are mostly uppercase. Labels found in the
//! [`SectionSynonymTable`] map to their normalized section name; anything
//! else becomes an `other` section that keeps its raw header. Text before the
//! first header is the `preamble`.
//!
//! Parsing is total and lossless: concatenating every section's header line
//! and body in order gives back the input byte for byte.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::{is_normalized_name, PathologyReport, Section};
use crate::{Error, Result};

pub const PREAMBLE: &str = "preamble";
pub const OTHER: &str = "other";
pub const SYNOPTIC: &str = "synoptic";
pub const DIAGNOSIS: &str = "diagnosis";
pub const SPECIMEN: &str = "specimen";

const DEFAULT_SYNONYMS: &[(&str, &str)] = &[
    ("synoptic", SYNOPTIC),
    ("synoptic report", SYNOPTIC),
    ("synoptic data", SYNOPTIC),
    ("synoptic summary", SYNOPTIC),
    ("cancer synoptic report", SYNOPTIC),
    ("diagnosis", DIAGNOSIS),
    ("diagnoses", DIAGNOSIS),
    ("final diagnosis", DIAGNOSIS),
    ("pathologic diagnosis", DIAGNOSIS),
    ("pathological diagnosis", DIAGNOSIS),
    ("final pathologic diagnosis", DIAGNOSIS),
    ("specimen", SPECIMEN),
    ("specimens", SPECIMEN),
    ("specimen received", SPECIMEN),
    ("specimens received", SPECIMEN),
    ("specimen s received", SPECIMEN),
    ("source of specimen", SPECIMEN),
    ("gross description", SPECIMEN),
    ("clinical history", "history"),
    ("clinical information", "history"),
    ("microscopic description", "microscopic"),
    ("comment", "comment"),
    ("comments", "comment"),
    ("addendum", "addendum"),
];

/// Maps raw header labels to normalized section names.
///
/// Keys are stored in [`normalize_header_key`] form, so lookups are
/// case-insensitive and ignore punctuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSynonymTable {
    entries: BTreeMap<String, String>,
}

impl Default for SectionSynonymTable {
    fn default() -> Self {
        let entries = DEFAULT_SYNONYMS
            .iter()
            .map(|(raw, name)| (normalize_header_key(raw), (*name).to_owned()))
            .collect();
        SectionSynonymTable { entries }
    }
}

impl SectionSynonymTable {
    pub fn lookup(&self, raw_header: &str) -> Option<&str> {
        self.entries.get(&normalize_header_key(raw_header)).map(String::as_str)
    }

    pub fn insert(&mut self, raw_header: &str, name: &str) -> Result<()> {
        let key = normalize_header_key(raw_header);
        if key.is_empty() {
            return Err(Error::Config(format!("empty synonym header {raw_header:?}")));
        }
        if !is_normalized_name(name) {
            return Err(Error::Config(format!(
                "synonym target {name:?} is not a normalized section name"
            )));
        }
        self.entries.insert(key, name.to_owned());
        Ok(())
    }

    /// Parses `raw header = normalized name` lines on top of the default table.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn extend_from_config(&mut self, text: &str) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (raw, name) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("synonym table line {}: expected `header = name`", idx + 1)))?;
            self.insert(raw.trim(), name.trim())
                .map_err(|e| Error::Config(format!("synonym table line {}: {e}", idx + 1)))?;
        }
        Ok(())
    }

    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = Self::default();
        table.extend_from_config(&text)?;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Lowercases, turns anything that is not a letter or digit into a space and
/// collapses whitespace.
pub fn normalize_header_key(raw: &str) -> String {
    let mapped: String = raw
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Tunable thresholds of the header rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeaderRule {
    pub max_label_chars: usize,
    pub min_uppercase_ratio: f64,
}

impl Default for HeaderRule {
    fn default() -> Self {
        HeaderRule {
            max_label_chars: 48,
            min_uppercase_ratio: 0.8,
        }
    }
}

static LABEL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([\p{L}\p{N} &,/\-]+):").expect("static regex"));

#[derive(Debug, Clone)]
pub struct Sectioner {
    pub table: SectionSynonymTable,
    pub rule: HeaderRule,
}

impl Default for Sectioner {
    fn default() -> Self {
        Sectioner::new(SectionSynonymTable::default())
    }
}

struct HeaderMatch<'a> {
    /// Header portion of the line, including indentation and, when the rest
    /// of the line is blank, the line terminator.
    header: &'a str,
    /// Inline body content that follows the header on the same line.
    rest: &'a str,
    name: String,
}

impl Sectioner {
    pub fn new(table: SectionSynonymTable) -> Self {
        Sectioner {
            table,
            rule: HeaderRule::default(),
        }
    }

    pub fn with_rule(mut self, rule: HeaderRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn parse(&self, raw_text: &str) -> Vec<Section> {
        let mut sections: Vec<Section> = Vec::new();
        let mut current = Section {
            name: PREAMBLE.to_owned(),
            header: None,
            text: String::new(),
        };

        for line in raw_text.split_inclusive('\n') {
            match self.match_header(line) {
                Some(m) => {
                    if current.header.is_some() || !current.text.is_empty() {
                        sections.push(current);
                    }
                    current = Section {
                        name: m.name,
                        header: Some(m.header.to_owned()),
                        text: m.rest.to_owned(),
                    };
                }
                None => current.text.push_str(line),
            }
        }
        if current.header.is_some() || !current.text.is_empty() {
            sections.push(current);
        }
        sections
    }

    fn match_header<'a>(&self, line: &'a str) -> Option<HeaderMatch<'a>> {
        let content = line.trim_end_matches(['\n', '\r']);
        let indent = content.len() - content.trim_start().len();
        let trimmed = &content[indent..];

        let caps = LABEL_RE.captures(trimmed)?;
        let label = caps.get(1)?.as_str();
        if label.chars().count() > self.rule.max_label_chars {
            return None;
        }
        let (letters, upper) = label
            .chars()
            .filter(|c| c.is_alphabetic())
            .fold((0usize, 0usize), |(l, u), c| (l + 1, u + usize::from(c.is_uppercase())));
        if letters == 0 || (upper as f64) < self.rule.min_uppercase_ratio * letters as f64 {
            return None;
        }

        let after_colon = indent + label.len() + 1;
        let inline = &content[after_colon..];
        let known = self.table.lookup(label);
        if inline.trim().is_empty() {
            let name = known.unwrap_or(OTHER).to_owned();
            return Some(HeaderMatch {
                header: line,
                rest: "",
                name,
            });
        }
        // Content after the colon on the same line: only known section
        // headers qualify, otherwise checklist lines such as `MARGINS: CLEAR`
        // would fragment the section they belong to.
        let name = known?.to_owned();
        let pad = inline.len() - inline.trim_start().len();
        let split = after_colon + pad;
        Some(HeaderMatch {
            header: &line[..split],
            rest: &line[split..],
            name,
        })
    }
}

/// Parses `raw_text` into sections with the default header rule.
pub fn parse_sections(raw_text: &str, table: &SectionSynonymTable) -> Vec<Section> {
    Sectioner {
        table: table.clone(),
        rule: HeaderRule::default(),
    }
    .parse(raw_text)
}

/// Concatenates header lines and bodies in order.
pub fn reassemble(sections: &[Section]) -> String {
    let mut out = String::new();
    for s in sections {
        if let Some(h) = &s.header {
            out.push_str(h);
        }
        out.push_str(&s.text);
    }
    out
}

/// First section with the given normalized name, in document order.
pub fn get_section<'a>(report: &'a PathologyReport, name: &str) -> Option<&'a Section> {
    report.sections.iter().find(|s| s.name == name)
}
