//! Seeded generators for synthetic corpora.

use chrono::DateTime;
use coach_core::{AnnotationLabel, ErrorCategory, Money, PriceSignal, Speaker, Transcript};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusRecord;

fn random_label(rng: &mut ChaCha8Rng, category: ErrorCategory, turn: Option<usize>) -> AnnotationLabel {
    if rng.random_bool(0.1) {
        AnnotationLabel::not_applicable(category, turn)
    } else {
        AnnotationLabel::applicable(category, turn, rng.random_bool(0.6))
    }
}

/// A random transcript of `turns` turns with the used-car price band.
pub fn transcript(rng: &mut ChaCha8Rng, turns: usize) -> Transcript {
    let mut t = Transcript::new("used-car");
    for i in 0..turns {
        let speaker = if rng.random_bool(0.5) { Speaker::Learner } else { Speaker::Agent };
        let signal = match rng.random_range(0..6) {
            0 | 1 => PriceSignal::Offer { amount: Money(rng.random_range(9_000..16_000)) },
            2 => {
                let lo = rng.random_range(9_000..15_000);
                PriceSignal::Range { lo: Money(lo), hi: Money(lo + rng.random_range(1..2_000)) }
            }
            3 => PriceSignal::Refused,
            4 => PriceSignal::Accepted,
            _ => PriceSignal::NoOffer,
        };
        t.push(speaker, format!("turn {i}"), signal, DateTime::from_timestamp(1_700_000_000 + 20 * i as i64, 0).expect("valid"));
    }
    if rng.random_bool(0.5) {
        t.deal = Some(Money(rng.random_range(12_000..14_000)));
    }
    t
}

/// Prediction and gold corpora over identical keys. Predictions agree with
/// gold with probability `agreement`.
pub fn prediction_gold_pair(seed: u64, dialogues: usize, agreement: f64) -> (Vec<CorpusRecord>, Vec<CorpusRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pred = Vec::with_capacity(dialogues);
    let mut gold = Vec::with_capacity(dialogues);
    for d in 0..dialogues {
        let turns = rng.random_range(2..24);
        let t = transcript(&mut rng, turns);
        let mut g = Vec::new();
        let mut p = Vec::new();
        for &category in &ErrorCategory::ALL {
            let slots: Vec<Option<usize>> = if category.is_preparation() {
                vec![None]
            } else {
                let n = rng.random_range(0..=3.min(turns));
                let mut idx: Vec<usize> = (0..turns).collect();
                for i in 0..n {
                    let j = rng.random_range(i..turns);
                    idx.swap(i, j);
                }
                idx.truncate(n);
                idx.sort_unstable();
                idx.into_iter().map(Some).collect()
            };
            for turn in slots {
                let gl = random_label(&mut rng, category, turn);
                let pl = if rng.random_bool(agreement) { gl } else { random_label(&mut rng, category, turn) };
                g.push(gl);
                p.push(pl);
            }
        }
        let id = Some(format!("synthetic-{d}"));
        gold.push(CorpusRecord { id: id.clone(), transcript: t.clone(), prep: None, annotations: g });
        pred.push(CorpusRecord { id, transcript: t, prep: None, annotations: p });
    }
    (pred, gold)
}
