#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    let _ = pacroute_gateway::parse_input_jsonl(s);
});
