#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    let _ = pacroute_gateway::decode_embedding_response(s);
});
