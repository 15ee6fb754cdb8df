use std::collections::BTreeMap;
use std::fmt::Write;

use coach_core::{AnnotationLabel, CategoryMetrics, ConfusionCounts, ErrorCategory, MetricsReport};

use crate::corpus::CorpusRecord;
use crate::EvalError;

pub const POSITIVE_CLASS: &str = "mistake present (verdict false)";

/// (dialogue key, turn index, category). Preparation labels have no turn.
pub type LabelKey = (String, Option<usize>, ErrorCategory);

pub fn label_map(records: &[CorpusRecord]) -> Result<BTreeMap<LabelKey, AnnotationLabel>, Vec<LabelKey>> {
    let mut map = BTreeMap::new();
    let mut duplicates = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let key = r.key(i);
        for l in &r.annotations {
            let k = (key.clone(), l.turn_index, l.category);
            if map.insert(k.clone(), *l).is_some() {
                duplicates.push(k);
            }
        }
    }
    if duplicates.is_empty() {
        Ok(map)
    } else {
        Err(duplicates)
    }
}

/// Scores predictions against gold labels. Items count when the gold label
/// is applicable; a non-applicable prediction there counts as "no mistake".
pub fn evaluate(pred: &[CorpusRecord], gold: &[CorpusRecord]) -> Result<MetricsReport, EvalError> {
    let p = label_map(pred).map_err(|d| EvalError::DuplicateKeys { side: "prediction", keys: d })?;
    let g = label_map(gold).map_err(|d| EvalError::DuplicateKeys { side: "gold", keys: d })?;
    let missing_in_pred: Vec<LabelKey> = g.keys().filter(|k| !p.contains_key(*k)).cloned().collect();
    let missing_in_gold: Vec<LabelKey> = p.keys().filter(|k| !g.contains_key(*k)).cloned().collect();
    if !missing_in_pred.is_empty() || !missing_in_gold.is_empty() {
        return Err(EvalError::KeyMismatch { missing_in_pred, missing_in_gold });
    }

    let mut counts: BTreeMap<ErrorCategory, ConfusionCounts> = BTreeMap::new();
    for (key, gold_label) in g.iter().filter(|(_, l)| l.applicable) {
        let pred_label = p[key];
        let predicted = !pred_label.applicable || pred_label.verdict;
        counts.entry(key.2).or_default().record(predicted, gold_label.verdict);
    }
    Ok(MetricsReport {
        positive_class: POSITIVE_CLASS.to_owned(),
        categories: ErrorCategory::ALL
            .iter()
            .map(|&c| CategoryMetrics::from_counts(c, counts.get(&c).copied().unwrap_or_default()))
            .collect(),
    })
}

pub fn render_report(report: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "positive class: {}", report.positive_class);
    let _ = writeln!(s, "{:<28} {:>5} {:>9} {:>9} {:>9} {:>9}", "category", "n", "accuracy", "precision", "recall", "f1");
    for m in &report.categories {
        let _ = writeln!(
            s,
            "{:<28} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            m.category.title(),
            m.applicable,
            m.accuracy,
            m.precision,
            m.recall,
            m.f1
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use coach_core::Transcript;

    fn record(id: &str, labels: Vec<AnnotationLabel>) -> CorpusRecord {
        let mut r = CorpusRecord::new(Transcript::new("used-car"));
        r.id = Some(id.into());
        r.annotations = labels;
        r
    }

    fn labels(verdicts: &[bool]) -> Vec<AnnotationLabel> {
        verdicts
            .iter()
            .enumerate()
            .map(|(i, &v)| AnnotationLabel::applicable(ErrorCategory::StrongCounteroffer, Some(i), v))
            .collect()
    }

    #[test]
    fn hand_built_confusion_matrix() {
        // 3 tp, 1 fp, 1 fn, 15 tn.
        let mut gold = vec![false; 3];
        let mut pred = vec![false; 3];
        gold.push(true);
        pred.push(false);
        gold.push(false);
        pred.push(true);
        gold.extend([true; 15]);
        pred.extend([true; 15]);
        let report = evaluate(&[record("a", labels(&pred))], &[record("a", labels(&gold))]).unwrap();
        let m = report.categories.iter().find(|m| m.category == ErrorCategory::StrongCounteroffer).unwrap();
        assert_eq!(m.counts, ConfusionCounts { tp: 3, fp: 1, fn_: 1, tn: 15 });
        assert!((m.accuracy - 0.9).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.75).abs() < 1e-12);
        assert!((m.f1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identity_scores_one() {
        let v: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let r = record("a", labels(&v));
        let report = evaluate(std::slice::from_ref(&r), std::slice::from_ref(&r)).unwrap();
        let m = &report.categories[5];
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn no_positives_gives_zero_scores() {
        let r = record("a", labels(&[true; 5]));
        let m = evaluate(std::slice::from_ref(&r), std::slice::from_ref(&r)).unwrap().categories[5].clone();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn mismatched_keys_are_listed() {
        let gold = record("a", labels(&[true, false, true]));
        let pred = record("a", labels(&[true]));
        match evaluate(&[pred], &[gold]) {
            Err(EvalError::KeyMismatch { missing_in_pred, missing_in_gold }) => {
                assert_eq!(missing_in_pred.len(), 2);
                assert!(missing_in_gold.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }
}
