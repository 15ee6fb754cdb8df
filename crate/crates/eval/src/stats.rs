use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub task: String,
    pub conversations: usize,
    pub avg_turns: f64,
    pub avg_tokens_per_turn: f64,
    pub vocabulary: usize,
    pub deal_pct: f64,
    /// Mean over conversations that reached a deal.
    pub mean_deal: Option<f64>,
}

/// Lower-cased whitespace tokens with punctuation removed; tokens that were
/// only punctuation are dropped.
pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|w| w.chars().filter(|c| !c.is_ascii_punctuation() && !is_unicode_punct(*c)).flat_map(char::to_lowercase).collect::<String>())
        .filter(|w| !w.is_empty())
}

fn is_unicode_punct(c: char) -> bool {
    matches!(c, '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{00A1}' | '\u{00BF}' | '\u{00AB}' | '\u{00BB}')
}

fn summarize<'a>(task: &str, records: impl Iterator<Item = &'a CorpusRecord>) -> DatasetStats {
    let (mut n, mut turns, mut toks, mut deals, mut deal_sum) = (0usize, 0usize, 0usize, 0usize, 0i128);
    let mut vocab = BTreeSet::new();
    for r in records {
        n += 1;
        turns += r.transcript.turns.len();
        for t in &r.transcript.turns {
            for tok in tokens(&t.text) {
                toks += 1;
                vocab.insert(tok);
            }
        }
        if let Some(d) = r.transcript.deal {
            deals += 1;
            deal_sum += i128::from(d.get());
        }
    }
    let div = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
    DatasetStats {
        task: task.to_owned(),
        conversations: n,
        avg_turns: div(turns as f64, n),
        avg_tokens_per_turn: div(toks as f64, turns),
        vocabulary: vocab.len(),
        deal_pct: 100.0 * div(deals as f64, n),
        mean_deal: (deals > 0).then(|| deal_sum as f64 / deals as f64),
    }
}

/// One row per scenario id, sorted, followed by a "Total" row.
pub fn dataset_stats(records: &[CorpusRecord]) -> Vec<DatasetStats> {
    let mut by_task: BTreeMap<&str, Vec<&CorpusRecord>> = BTreeMap::new();
    for r in records {
        by_task.entry(&r.transcript.scenario_id).or_default().push(r);
    }
    let mut rows: Vec<DatasetStats> = by_task.iter().map(|(task, rs)| summarize(task, rs.iter().copied())).collect();
    rows.push(summarize("Total", records.iter()));
    rows
}

pub fn render_stats(rows: &[DatasetStats]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18} {:>6} {:>10} {:>12} {:>7} {:>7} {:>11}",
        "task", "convs", "avg turns", "tokens/turn", "vocab", "deal%", "mean deal"
    );
    for r in rows {
        let deal = r.mean_deal.map_or_else(|| "-".to_owned(), |d| format!("{d:.0}"));
        let _ = writeln!(
            s,
            "{:<18} {:>6} {:>10.1} {:>12.1} {:>7} {:>6.1}% {:>11}",
            r.task, r.conversations, r.avg_turns, r.avg_tokens_per_turn, r.vocabulary, r.deal_pct, deal
        );
    }
    s
}
