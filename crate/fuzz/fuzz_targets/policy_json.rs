#![no_main]

//! Accepted policies must survive a write and re-read unchanged.

use libfuzzer_sys::fuzz_target;
use pacroute_core::ThresholdPolicy;

fuzz_target!(|s: &str| {
    if let Ok(policy) = ThresholdPolicy::from_json(s) {
        let again = ThresholdPolicy::from_json(&policy.to_json_pretty()).expect("round trip");
        assert_eq!(again, policy);
    }
});
