use chrono::DateTime;
use coach_core::{
    AnnotatedTranscript, AnnotationLabel, Condition, ErrorCategory, Money, PriceSignal, Speaker, Transcript,
};
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = PriceSignal> {
    prop_oneof![
        (1i64..10_000_000).prop_map(|a| PriceSignal::Offer { amount: Money(a) }),
        (1i64..10_000_000, 1i64..100_000).prop_map(|(a, d)| PriceSignal::Range { lo: Money(a), hi: Money(a + d) }),
        Just(PriceSignal::NoOffer),
        Just(PriceSignal::Accepted),
        Just(PriceSignal::Refused),
        Just(PriceSignal::Rephrasing),
    ]
}

fn label() -> impl Strategy<Value = AnnotationLabel> {
    (prop::sample::select(ErrorCategory::ALL.to_vec()), prop::option::of(0usize..40), any::<bool>(), any::<bool>())
        .prop_map(|(c, i, v, a)| if a { AnnotationLabel::applicable(c, i, v) } else { AnnotationLabel::not_applicable(c, i) })
}

fn annotated() -> impl Strategy<Value = AnnotatedTranscript> {
    (
        prop::collection::vec((any::<bool>(), "[ -~]{0,40}", signal(), 0i64..4_000_000_000), 0..20),
        prop::option::of(1i64..1_000_000),
        0u32..100_000,
        prop::collection::vec(label(), 0..12),
    )
        .prop_map(|(turns, deal, secs, annotations)| {
            let mut t = Transcript::new("used-car");
            for (learner, text, s, ts) in turns {
                let speaker = if learner { Speaker::Learner } else { Speaker::Agent };
                t.push(speaker, text, s, DateTime::from_timestamp(ts, 0).unwrap());
            }
            t.deal = deal.map(Money);
            t.duration_seconds = f64::from(secs) / 4.0;
            AnnotatedTranscript { transcript: t, annotations }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn annotated_transcripts_round_trip(a in annotated()) {
        let json = serde_json::to_string(&a).unwrap();
        let back: AnnotatedTranscript = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn signals_round_trip(s in signal()) {
        let back: PriceSignal = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn condition_names() {
    let names: Vec<String> = Condition::ALL.iter().map(|c| serde_json::to_string(c).unwrap()).collect();
    assert_eq!(names, ["\"ACE\"", "\"OtherFeedback\"", "\"NoFeedback\""]);
}
