use std::collections::HashMap;
use std::fmt::Write;

use coach_core::detection::annotate_transcript;
use coach_core::{ErrorCategory, ModelGateway, PreparationSheet, Scenario};
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusRecord;
use crate::EvalError;

/// Applicable labels and mistakes for one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: ErrorCategory,
    pub applicable: u64,
    pub mistakes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateSummary {
    pub dialogues: usize,
    pub counts: Vec<CategoryCount>,
    pub diagnostics: Vec<String>,
}

/// Annotates every dialogue. A prep sheet in `preps` (keyed by dialogue
/// key) overrides one stored on the record. Gateway failures become
/// diagnostics; unknown scenarios fail the run with the dialogue index.
pub fn annotate_corpus(
    records: &[CorpusRecord],
    scenarios: &HashMap<String, Scenario>,
    preps: &HashMap<String, PreparationSheet>,
    gateway: &dyn ModelGateway,
) -> Result<(Vec<CorpusRecord>, AnnotateSummary), EvalError> {
    let mut out = Vec::with_capacity(records.len());
    let mut diagnostics = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let key = record.key(i);
        let scenario = scenarios
            .get(&record.transcript.scenario_id)
            .ok_or_else(|| EvalError::UnknownScenario { index: i, id: record.transcript.scenario_id.clone() })?;
        let prep = preps.get(&key).or(record.prep.as_ref());
        let annotation = annotate_transcript(&record.transcript, prep, scenario, gateway);
        diagnostics.extend(annotation.diagnostics.into_iter().map(|d| format!("dialogue {key}: {d}")));
        out.push(CorpusRecord { prep: prep.copied(), annotations: annotation.labels, ..record.clone() });
    }
    let counts = count_mistakes(&out);
    let dialogues = out.len();
    Ok((out, AnnotateSummary { dialogues, counts, diagnostics }))
}

pub fn count_mistakes(records: &[CorpusRecord]) -> Vec<CategoryCount> {
    ErrorCategory::ALL
        .iter()
        .map(|&category| {
            let labels = records.iter().flat_map(|r| &r.annotations).filter(|l| l.category == category);
            let (applicable, mistakes) = labels.fold((0, 0), |(a, m), l| {
                (a + u64::from(l.applicable), m + u64::from(l.is_mistake()))
            });
            CategoryCount { category, applicable, mistakes }
        })
        .collect()
}

pub fn render_counts(summary: &AnnotateSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} dialogues", summary.dialogues);
    let _ = writeln!(s, "{:<28} {:>10} {:>8} {:>8}", "category", "applicable", "errors", "rate");
    for c in &summary.counts {
        let rate = if c.applicable == 0 { 0.0 } else { c.mistakes as f64 / c.applicable as f64 };
        let _ = writeln!(s, "{:<28} {:>10} {:>8} {:>7.1}%", c.category.title(), c.applicable, c.mistakes, 100.0 * rate);
    }
    s
}
