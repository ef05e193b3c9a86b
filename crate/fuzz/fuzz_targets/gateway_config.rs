#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    let _ = pacroute_gateway::GatewayConfig::from_toml_str(s, std::path::Path::new("/tmp"));
});
