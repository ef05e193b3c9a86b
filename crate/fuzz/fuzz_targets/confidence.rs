#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    if let Some(c) = pacroute_gateway::parse_confidence(s) {
        assert!((0.0..=1.0).contains(&c), "confidence {c} from {s:?}");
    }
});
