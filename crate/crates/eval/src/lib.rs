//! Offline tooling around the coaching core: annotate corpora, score
//! detectors against gold labels, summarise datasets and run batches of
//! simulated negotiations.

pub mod annotate;
pub mod corpus;
pub mod metrics;
pub mod simulate;
pub mod stats;
pub mod synth;

use std::path::Path;

use metrics::LabelKey;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error{}: {message}", index.map(|i| format!(" in dialogue {i}")).unwrap_or_default())]
    Parse { index: Option<usize>, message: String },
    #[error("dialogue {index}: unknown scenario {id:?}")]
    UnknownScenario { index: usize, id: String },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{} keys missing from predictions, {} missing from gold{}", missing_in_pred.len(), missing_in_gold.len(), list_keys(missing_in_pred, missing_in_gold))]
    KeyMismatch { missing_in_pred: Vec<LabelKey>, missing_in_gold: Vec<LabelKey> },
    #[error("duplicate {side} labels: {keys:?}")]
    DuplicateKeys { side: &'static str, keys: Vec<LabelKey> },
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl EvalError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        EvalError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

fn list_keys(pred: &[LabelKey], gold: &[LabelKey]) -> String {
    let fmt = |(d, t, c): &LabelKey| {
        format!("({d}, {}, {})", t.map_or_else(|| "-".to_owned(), |t| t.to_string()), c.slug())
    };
    let mut s = String::new();
    for k in pred {
        s.push_str("\n  missing in predictions: ");
        s.push_str(&fmt(k));
    }
    for k in gold {
        s.push_str("\n  missing in gold: ");
        s.push_str(&fmt(k));
    }
    s
}
