#![no_main]
use libfuzzer_sys::fuzz_target;
use pacroute_core::Scenario;

fuzz_target!(|s: &str| {
    if let Ok(scenario) = Scenario::from_toml_str(s) {
        let _ = Scenario::from_toml_str(&scenario.to_toml_string());
    }
    let _ = Scenario::from_json_str(s);
});
