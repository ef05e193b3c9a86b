use pacroute_gateway::{decode_chat_response, decode_embedding_response, parse_confidence};
use proptest::prelude::*;

proptest! {
    #[test]
    fn confidence_in_unit_interval_round_trips(x in 0.0f64..=1.0) {
        let text = format!("{x}");
        prop_assert_eq!(parse_confidence(&text), Some(x));
        prop_assert_eq!(parse_confidence(&format!("  {text}\n")), Some(x));
    }

    #[test]
    fn parsed_confidence_is_always_a_probability(s in "\\PC{0,12}") {
        if let Some(p) = parse_confidence(&s) {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn decoders_never_panic(s in "\\PC{0,200}", lp in any::<bool>()) {
        let _ = decode_chat_response(&s, lp);
        let _ = decode_embedding_response(&s);
    }

    #[test]
    fn decoded_logprobs_are_non_positive(lps in prop::collection::vec(-20.0f64..0.5, 1..8)) {
        let content: Vec<_> = lps.iter().enumerate().map(|(i, l)| serde_json::json!({"token": format!("t{i}"), "logprob": l})).collect();
        let text: String = (0..lps.len()).map(|i| format!("t{i}")).collect();
        let body = serde_json::json!({"choices": [{"message": {"content": text}, "logprobs": {"content": content}}]});
        let out = decode_chat_response(&body.to_string(), true).unwrap();
        let got = out.token_logprobs.unwrap();
        prop_assert_eq!(got.len(), lps.len());
        prop_assert!(got.iter().all(|l| *l <= 0.0));
    }
}
