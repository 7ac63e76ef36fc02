use proptest::prelude::*;
use triage_core::sectioner::{reassemble, Sectioner};

fn fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("DIAGNOSIS:".to_owned()),
        Just("FINAL DIAGNOSIS:".to_owned()),
        Just("Synoptic Report:".to_owned()),
        Just("SPECIMEN RECEIVED:".to_owned()),
        Just("GROSS DESCRIPTION: 2 cores".to_owned()),
        Just("COMMENT:".to_owned()),
        Just("MICROSCOPIC/IHC:".to_owned()),
        Just("Diagnosis: benign".to_owned()),
        Just("Time: 12:30".to_owned()),
        Just("   ".to_owned()),
        Just("\t".to_owned()),
        Just(":".to_owned()),
        Just("DIAGNOSIS".to_owned()),
        "[a-zA-Z0-9 ,.;:()\\-]{0,40}",
        "\\PC{0,12}",
        any::<String>(),
    ]
}

fn newline() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("\n"), Just("\r\n"), Just("\n\n"), Just(""), Just("\r")]
}

fn document() -> impl Strategy<Value = String> {
    proptest::collection::vec((fragment(), newline()), 0..30)
        .prop_map(|parts| parts.into_iter().map(|(f, n)| f + n).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn partition_is_lossless_and_idempotent(doc in document()) {
        let s = Sectioner::default();
        let sections = s.parse(&doc);
        let rebuilt = reassemble(&sections);
        prop_assert_eq!(&rebuilt, &doc);
        prop_assert_eq!(s.parse(&rebuilt), sections);
    }
}
