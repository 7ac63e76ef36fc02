use std::io::Cursor;

use triage_core::corpus::{corpus_to_bytes, load_corpus, read_corpus, write_corpus, LoadOptions};
use triage_core::synth::{synth_corpus, SynthSpec};

#[test]
fn synthetic_corpus_survives_write_and_load() {
    let spec = SynthSpec {
        n_reports: 1000,
        ..Default::default()
    };
    let corpus = synth_corpus(&spec, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, &path).unwrap();

    let strict = LoadOptions {
        strict: true,
        ..Default::default()
    };
    let loaded = load_corpus(&path, &strict).unwrap();
    assert_eq!(loaded.records, corpus.records);
    assert_eq!(corpus_to_bytes(&loaded), std::fs::read(&path).unwrap());
}

#[test]
fn generator_is_deterministic() {
    let spec = SynthSpec {
        n_reports: 300,
        ..Default::default()
    };
    let a = corpus_to_bytes(&synth_corpus(&spec, 5).unwrap());
    let b = corpus_to_bytes(&synth_corpus(&spec, 5).unwrap());
    let c = corpus_to_bytes(&synth_corpus(&spec, 6).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn lenient_loader_ignores_unknown_fields() {
    let line = r#"{"report_id":"X1","diagnosis_year":2024,"raw_text":"DIAGNOSIS:\nbenign\n","t1_label":"non_cancer","mrn":"123"}"#;
    let lenient = read_corpus(Cursor::new(line), &LoadOptions::default()).unwrap();
    assert_eq!(lenient.len(), 1);
    assert_eq!(lenient.records[0].report.sections.len(), 1);
    let strict = LoadOptions {
        strict: true,
        ..Default::default()
    };
    let err = read_corpus(Cursor::new(line), &strict).unwrap_err();
    assert!(err.to_string().contains("mrn"), "{err}");
}
