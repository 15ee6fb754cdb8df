use chrono::DateTime;
use coach_core::detection::{annotate_transcript, COUNTEROFFER_WINDOW, RATIONALE_WINDOW};
use coach_core::feedback::{assemble_bundle, FeedbackConfig, FeedbackRequest};
use coach_core::scenarios::used_car;
use coach_core::{
    extract_rule_based, AnnotationLabel, Condition, ErrorCategory as C, ExtractionConfig, Money,
    PreparationSheet, PriceSignal, Speaker, StubGateway, StubScript, Transcript,
};
use proptest::prelude::*;

fn at(i: usize) -> chrono::DateTime<chrono::Utc> {
    DateTime::from_timestamp(1_700_000_000 + 20 * i as i64, 0).unwrap()
}

fn classifiers_say(answer: &str) -> StubGateway {
    StubGateway::new(
        StubScript::new()
            .substring("Rationale :Answer here", format!("Rationale :{answer}"))
            .substring("Breaking the ice :Answer here", answer)
            .substring("Strategic closing :Answer here", answer)
            .with_default("Keep your offers closer to your target."),
    )
}

fn used_car_dialogue() -> Transcript {
    use PriceSignal::*;
    let lines: [(Speaker, &str, PriceSignal); 12] = [
        (Speaker::Learner, "Hi, I'm looking for a Honda Accord around $11,000 to $12,000. Anything like that?", Range { lo: Money(11000), hi: Money(12000) }),
        (Speaker::Agent, "We have a 2013 Honda in great condition. What price range are you thinking?", NoOffer),
        (Speaker::Learner, "Probably around $11,000 or $12,000.", Range { lo: Money(11000), hi: Money(12000) }),
        (Speaker::Agent, "This one is listed at $14,000.", Offer { amount: Money(14000) }),
        (Speaker::Learner, "That's a little bit too much. Could I take it for a test drive?", Refused),
        (Speaker::Agent, "Of course. How did it feel?", NoOffer),
        (Speaker::Learner, "Pretty good. What about $12,500 and I buy it today?", Offer { amount: Money(12500) }),
        (Speaker::Agent, "I could come down to $13,000.", Offer { amount: Money(13000) }),
        (Speaker::Learner, "$12,500. Could we call it even $13,000?", Offer { amount: Money(13000) }),
        (Speaker::Agent, "Sounds good.", Accepted),
        (Speaker::Learner, "Great, thank you!", Accepted),
        (Speaker::Agent, "Enjoy the car.", NoOffer),
    ];
    let mut t = Transcript::new("used-car");
    for (i, (speaker, text, signal)) in lines.into_iter().enumerate() {
        t.push(speaker, text, signal, at(i));
    }
    t.deal = Some(Money(13000));
    t
}

#[test]
fn used_car_dialogue_labels() {
    let scenario = used_car();
    let prep = PreparationSheet { walk_away: Money(13500), target: Money(11500), planned_opening: Money(10000) };
    let gw = classifiers_say("False");
    let got = annotate_transcript(&used_car_dialogue(), Some(&prep), &scenario, &gw);
    let a = AnnotationLabel::applicable;
    let expected = vec![
        a(C::StrategicWalkAway, None, true),
        a(C::StrategicTarget, None, true),
        a(C::BreakingIce, Some(0), false),
        a(C::GivingFirstOffer, Some(0), true),
        a(C::AmbitiousOpening, Some(0), false),
        a(C::IncludingRationale, Some(0), false),
        AnnotationLabel::not_applicable(C::StrongCounteroffer, Some(2)),
        a(C::IncludingRationale, Some(2), false),
        a(C::StrongCounteroffer, Some(6), true),
        a(C::IncludingRationale, Some(6), false),
        a(C::StrongCounteroffer, Some(8), false),
        a(C::IncludingRationale, Some(8), false),
        a(C::StrategicClosing, Some(10), false),
    ];
    assert_eq!(got.labels, expected);
    assert!(got.diagnostics.is_empty(), "{:?}", got.diagnostics);
}

fn long_haggle() -> Transcript {
    let lines = [
        (Speaker::Agent, "Hello! Thanks for stopping by the lot."),
        (Speaker::Learner, "Hi, I'm interested in the Honda Accord."),
        (Speaker::Agent, "Great choice. It runs well and was recently serviced."),
        (Speaker::Learner, "What are you asking for it?"),
        (Speaker::Agent, "I'm asking $16,000."),
        (Speaker::Learner, "How about $12,500?"),
        (Speaker::Agent, "I can go to $15,000."),
        (Speaker::Learner, "I could do $13,100."),
        (Speaker::Agent, "Let's say $14,500."),
        (Speaker::Learner, "Has it had any accidents?"),
        (Speaker::Agent, "None at all, clean history."),
        (Speaker::Learner, "Then $13,300."),
        (Speaker::Agent, "I can meet you at $14,000."),
        (Speaker::Learner, "$13,500 is my final offer."),
        (Speaker::Agent, "Alright, $13,500 it is."),
        (Speaker::Learner, "Deal."),
    ];
    let cfg = ExtractionConfig::default();
    let mut t = Transcript::new("used-car");
    for (i, (speaker, text)) in lines.into_iter().enumerate() {
        let signal = extract_rule_based(text, &t.turns, &cfg).unwrap_or_else(|| panic!("{text}"));
        t.push(speaker, text, signal, at(i));
    }
    t.deal = Some(Money(13500));
    t
}

#[test]
fn long_haggle_extracts_as_expected() {
    let t = long_haggle();
    let offers: Vec<(usize, PriceSignal)> = t
        .turns
        .iter()
        .filter(|x| x.price_signal.is_priced() || x.price_signal == PriceSignal::Accepted)
        .map(|x| (x.index, x.price_signal))
        .collect();
    let o = |a| PriceSignal::Offer { amount: Money(a) };
    assert_eq!(
        offers,
        vec![
            (4, o(16000)),
            (5, o(12500)),
            (6, o(15000)),
            (7, o(13100)),
            (8, o(14500)),
            (11, o(13300)),
            (12, o(14000)),
            (13, o(13500)),
            (14, PriceSignal::Accepted),
            (15, PriceSignal::Accepted),
        ]
    );
}

#[test]
fn bundle_for_long_haggle() {
    let scenario = used_car();
    let t = long_haggle();
    let prep = PreparationSheet { walk_away: Money(13500), target: Money(12500), planned_opening: Money(11000) };
    let gw = StubGateway::new(
        StubScript::new()
            .substring("Rationale :Answer here", "Rationale :True")
            .substring("Breaking the ice :Answer here", "True")
            .substring("Strategic closing :Answer here", "True")
            .substring("Given the negotiation transcript:", "When you said \"I could do $13,100\" you gave up too much ground at once.")
            .with_default("ANSWER: Keep your offers closer to your target."),
    )
    .recording();
    let labels = annotate_transcript(&t, Some(&prep), &scenario, &gw).labels;
    let req = FeedbackRequest { transcript: &t, labels: &labels, prep: Some(&prep), scenario: &scenario, condition: Condition::Ace };
    let bundle = assemble_bundle(&req, &gw, &FeedbackConfig::default());

    let prep_cats: Vec<C> = bundle.preparation_items.iter().map(|p| p.category).collect();
    assert_eq!(prep_cats, vec![C::StrategicTarget]);
    let turns: Vec<(usize, Vec<C>)> = bundle.turn_items.iter().map(|i| (i.turn_index, i.categories.clone())).collect();
    assert_eq!(
        turns,
        vec![
            (3, vec![C::GivingFirstOffer]),
            (5, vec![C::AmbitiousOpening]),
            (7, vec![C::StrongCounteroffer]),
            (11, vec![C::StrongCounteroffer]),
            (13, vec![C::StrongCounteroffer]),
        ]
    );
    for item in &bundle.turn_items {
        assert!(!item.direct_feedback.is_empty());
        assert_eq!(item.revised_utterance.as_deref(), Some("Keep your offers closer to your target."));
    }
    assert!(bundle.holistic.as_deref().unwrap().contains("I could do $13,100"));
    assert!(bundle.diagnostics.is_empty(), "{:?}", bundle.diagnostics);

    let req = FeedbackRequest { condition: Condition::NoFeedback, ..req };
    assert!(assemble_bundle(&req, &gw, &FeedbackConfig::default()).is_empty());
}

fn signal() -> impl Strategy<Value = PriceSignal> {
    prop_oneof![
        3 => (9_000i64..16_000).prop_map(|a| PriceSignal::Offer { amount: Money(a) }),
        1 => (9_000i64..16_000, 1i64..2_000).prop_map(|(a, d)| PriceSignal::Range { lo: Money(a), hi: Money(a + d) }),
        1 => Just(PriceSignal::NoOffer),
        1 => Just(PriceSignal::Refused),
        1 => Just(PriceSignal::Accepted),
    ]
}

fn transcript_strategy() -> impl Strategy<Value = Transcript> {
    (prop::collection::vec((any::<bool>(), signal()), 0..30), any::<bool>()).prop_map(|(turns, deal)| {
        let mut t = Transcript::new("used-car");
        for (i, (learner, s)) in turns.into_iter().enumerate() {
            let speaker = if learner { Speaker::Learner } else { Speaker::Agent };
            t.push(speaker, format!("turn {i}"), s, at(i));
        }
        if deal {
            t.deal = Some(Money(13000));
        }
        t
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn windows_are_capped_and_labels_sit_on_learner_turns(
        t in transcript_strategy(),
        answer in prop::sample::select(vec!["True", "False", "garbled"]),
    ) {
        let scenario = used_car();
        let prep = PreparationSheet { walk_away: Money(13500), target: Money(11500), planned_opening: Money(10000) };
        let gw = classifiers_say(answer);
        let a = annotate_transcript(&t, Some(&prep), &scenario, &gw);
        let count = |c: C| a.labels.iter().filter(|l| l.category == c).count();
        prop_assert!(count(C::StrongCounteroffer) <= COUNTEROFFER_WINDOW);
        prop_assert!(count(C::IncludingRationale) <= RATIONALE_WINDOW);
        prop_assert_eq!(count(C::StrategicWalkAway), 1);
        prop_assert_eq!(count(C::StrategicTarget), 1);
        prop_assert!(count(C::AmbitiousOpening) <= 1);
        prop_assert_eq!(count(C::BreakingIce), 1);
        prop_assert_eq!(count(C::GivingFirstOffer), 1);
        prop_assert_eq!(count(C::StrategicClosing), usize::from(t.deal.is_some()));
        for l in &a.labels {
            if let Some(i) = l.turn_index {
                prop_assert_eq!(t.turns[i].speaker, Speaker::Learner, "{:?}", l);
            }
            if !l.applicable {
                prop_assert!(l.verdict && !l.is_mistake());
            }
        }
        let again = annotate_transcript(&t, Some(&prep), &scenario, &gw);
        prop_assert_eq!(a.labels, again.labels);
    }
}
