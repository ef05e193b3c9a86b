#![no_main]
use libfuzzer_sys::fuzz_target;
use pacroute_core::{extract_boxed, AnswerExtractor};

fuzz_target!(|s: &str| {
    if let Some(inner) = extract_boxed(s) {
        assert!(s.contains(inner));
    }
    // Canonical forms are fixed points.
    let once = AnswerExtractor::Identity.canonicalize(s);
    assert_eq!(AnswerExtractor::Identity.canonicalize(&once), once);
    let _ = AnswerExtractor::Boxed.canonicalize(s);
});
