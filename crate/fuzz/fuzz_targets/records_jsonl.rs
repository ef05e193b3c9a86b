#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    if let Ok(records) = pacroute_gateway::parse_records_jsonl(s) {
        let text = pacroute_gateway::to_jsonl(&records);
        let again = pacroute_gateway::parse_records_jsonl(&text).expect("serialized records parse");
        assert_eq!(again.len(), records.len());
    }
});
