#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else {
        return;
    };
    let _ = pacroute_gateway::decode_chat_response(body, false);
    if let Ok(out) = pacroute_gateway::decode_chat_response(body, true) {
        // Log-probabilities of sampled tokens can never exceed zero.
        for lp in out.token_logprobs.iter().flatten() {
            assert!(*lp <= 0.0);
        }
    }
});
