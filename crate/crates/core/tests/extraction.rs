use std::path::PathBuf;

use chrono::DateTime;
use coach_core::gateway::{load_stub_script, StubGateway};
use coach_core::prompts::EXTRACTION_EXEMPLARS;
use coach_core::{
    extract_price_signal, extract_rule_based, ExtractionConfig, Money, PriceSignal, Speaker, Transcript,
};
use proptest::prelude::*;

fn stub_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/extraction_stub.json")
}

fn expected_labels() -> [PriceSignal; 9] {
    [
        PriceSignal::Range { lo: Money(10000), hi: Money(11000) },
        PriceSignal::Range { lo: Money(11500), hi: Money(12000) },
        PriceSignal::Offer { amount: Money(14000) },
        PriceSignal::Accepted,
        PriceSignal::Refused,
        PriceSignal::NoOffer,
        PriceSignal::Refused,
        PriceSignal::Offer { amount: Money(13000) },
        PriceSignal::Rephrasing,
    ]
}

#[test]
fn all_nine_exemplars_through_the_pipeline() {
    let stub = StubGateway::new(load_stub_script(stub_path()).unwrap());
    let cfg = ExtractionConfig::default();
    for ((message, _), expected) in EXTRACTION_EXEMPLARS.iter().zip(expected_labels()) {
        let got = extract_price_signal(message, &[], &stub, &cfg).unwrap();
        assert_eq!(got, expected, "{message}");
    }
    // Only the semantic cases reach the gateway.
    assert_eq!(stub.calls(), 3);
}

#[test]
fn table_two_lines_extract_by_rule() {
    let cfg = ExtractionConfig::default();
    let cases = [
        (
            "Hi, I'm new to California and I'm looking for probably a Honda Accord with reasonable mileage around maybe $11,000 to $12,000. Do you have anything like that?",
            PriceSignal::Range { lo: Money(11000), hi: Money(12000) },
        ),
        (
            "Nice. We have something similar. We have a nice 2013 Honda. It does have a little bit more miles than that. It has about 50,000. It doesn't have any rust and it's in great condition. What's the price range you're looking to come out with?",
            PriceSignal::NoOffer,
        ),
        ("Probably around $11,000 or $12,000.", PriceSignal::Range { lo: Money(11000), hi: Money(12000) }),
        (
            "Ooh, yeah, that's definitely a little bit too much. Could I take it for a test drive maybe?",
            PriceSignal::Refused,
        ),
        (
            "Okay, great. Yeah, it's pretty good. What do you think about maybe $12,500 and I would buy it today?",
            PriceSignal::Offer { amount: Money(12500) },
        ),
        ("$12,500. I mean, could we call it even $13,000?", PriceSignal::Offer { amount: Money(13000) }),
    ];
    for (text, expected) in cases {
        assert_eq!(extract_rule_based(text, &[], &cfg), Some(expected), "{text}");
    }
}

fn grouped(a: u64) -> String {
    let digits = a.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn history(signals: &[PriceSignal]) -> Vec<coach_core::Turn> {
    let mut t = Transcript::new("s");
    for (i, s) in signals.iter().enumerate() {
        let speaker = if i % 2 == 0 { Speaker::Learner } else { Speaker::Agent };
        t.push(speaker, "...", *s, DateTime::from_timestamp(0, 0).unwrap());
    }
    t.turns
}

fn unpriced_signal() -> impl Strategy<Value = PriceSignal> {
    prop_oneof![
        Just(PriceSignal::NoOffer),
        Just(PriceSignal::Refused),
        Just(PriceSignal::Rephrasing),
        Just(PriceSignal::Accepted),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn dollar_amounts_round_trip(a in 1u64..=10_000_000) {
        let cfg = ExtractionConfig::default();
        let text = format!("${}", grouped(a));
        prop_assert_eq!(
            extract_rule_based(&text, &[], &cfg),
            Some(PriceSignal::Offer { amount: Money(a as i64) })
        );
        let sentence = format!("Would you take ${} for it?", grouped(a));
        prop_assert_eq!(
            extract_rule_based(&sentence, &[], &cfg),
            Some(PriceSignal::Offer { amount: Money(a as i64) })
        );
    }

    #[test]
    fn no_acceptance_without_a_prior_offer(
        words in prop::collection::vec(
            prop::sample::select(vec![
                "deal", "Deal!", "sure", "okay", "sounds good", "I accept", "yes", "that works",
                "12k", "$13,000", "fine", "agreed", "no", "too much", "you said", "thanks", "I'll take it",
            ]),
            1..8,
        ),
        prior in prop::collection::vec(unpriced_signal(), 0..6),
    ) {
        let text = words.join(" ");
        let got = extract_rule_based(&text, &history(&prior), &ExtractionConfig::default());
        prop_assert_ne!(got, Some(PriceSignal::Accepted), "{}", text);
    }

    #[test]
    fn rule_layer_is_deterministic(text in "[a-zA-Z0-9$,. ]{1,60}") {
        let cfg = ExtractionConfig::default();
        prop_assert_eq!(extract_rule_based(&text, &[], &cfg), extract_rule_based(&text, &[], &cfg));
    }
}
