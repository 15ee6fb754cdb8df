//! Corpus files: a JSON array or JSON Lines of transcripts, optionally with
//! a preparation sheet and annotations per dialogue.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use coach_core::scenarios::{self, load_scenario, load_scenario_dir};
use coach_core::{AnnotationLabel, PreparationSheet, Scenario, Transcript};
use serde::{Deserialize, Serialize};

use crate::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub transcript: Transcript,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep: Option<PreparationSheet>,
    #[serde(default)]
    pub annotations: Vec<AnnotationLabel>,
}

impl CorpusRecord {
    pub fn new(transcript: Transcript) -> Self {
        CorpusRecord { id: None, transcript, prep: None, annotations: Vec::new() }
    }

    /// The record's id, or its position in the corpus when it has none.
    pub fn key(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| index.to_string())
    }
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, EvalError> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let values: Vec<serde_json::Value> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| EvalError::Parse { index: None, message: e.to_string() })?
    } else {
        let mut out = Vec::new();
        for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let v = serde_json::from_str(line).map_err(|e| EvalError::Parse {
                index: Some(out.len()),
                message: format!("line {}: {e}", line_no + 1),
            })?;
            out.push(v);
        }
        out
    };
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let record: CorpusRecord =
                serde_json::from_value(v).map_err(|e| EvalError::Parse { index: Some(i), message: e.to_string() })?;
            record
                .transcript
                .validate()
                .map_err(|e| EvalError::Parse { index: Some(i), message: e.to_string() })?;
            Ok(record)
        })
        .collect()
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>, EvalError> {
    let path = path.as_ref();
    parse_corpus(&fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?)
}

/// Writes JSON Lines when the path ends in `.jsonl`, otherwise a JSON array.
pub fn write_corpus(path: impl AsRef<Path>, records: &[CorpusRecord]) -> Result<(), EvalError> {
    let path = path.as_ref();
    let text = if path.extension().is_some_and(|e| e == "jsonl") {
        let mut s = String::new();
        for r in records {
            s.push_str(&serde_json::to_string(r).expect("corpus records serialize"));
            s.push('\n');
        }
        s
    } else {
        serde_json::to_string_pretty(records).expect("corpus records serialize") + "\n"
    };
    fs::write(path, text).map_err(|e| EvalError::io(path, e))
}

/// A JSON object mapping dialogue keys to preparation sheets.
pub fn read_preps(path: impl AsRef<Path>) -> Result<HashMap<String, PreparationSheet>, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EvalError::Parse { index: None, message: e.to_string() })
}

/// Scenarios by id: the built-ins, overridden by a scenario file or every
/// `*.json` in a directory.
pub fn read_scenarios(path: Option<&Path>) -> Result<HashMap<String, Scenario>, EvalError> {
    let mut out: HashMap<String, Scenario> = scenarios::builtin().into_iter().map(|s| (s.id.clone(), s)).collect();
    let loaded = match path {
        None => Vec::new(),
        Some(p) if p.is_dir() => load_scenario_dir(p).map_err(|e| EvalError::Scenario(e.to_string()))?,
        Some(p) => vec![load_scenario(p).map_err(|e| EvalError::Scenario(e.to_string()))?],
    };
    for s in loaded {
        out.insert(s.id.clone(), s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::DateTime;
    use coach_core::{Money, PriceSignal, Speaker};

    fn record() -> CorpusRecord {
        let mut t = Transcript::new("used-car");
        t.push(Speaker::Learner, "hi", PriceSignal::NoOffer, DateTime::from_timestamp(0, 0).unwrap());
        t.deal = Some(Money(13000));
        CorpusRecord::new(t)
    }

    #[test]
    fn array_and_lines_agree() {
        let r = record();
        let array = serde_json::to_string(&vec![r.clone(), r.clone()]).unwrap();
        let lines = format!("{}\n\n{}\n", serde_json::to_string(&r).unwrap(), serde_json::to_string(&r).unwrap());
        assert_eq!(parse_corpus(&array).unwrap(), parse_corpus(&lines).unwrap());
        assert_eq!(parse_corpus("").unwrap(), vec![]);
    }

    #[test]
    fn parse_errors_carry_the_dialogue_index() {
        let good = serde_json::to_string(&record()).unwrap();
        let text = format!("{good}\n{{\"turns\": 3}}\n");
        match parse_corpus(&text) {
            Err(EvalError::Parse { index: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn key_falls_back_to_position() {
        let mut r = record();
        assert_eq!(r.key(4), "4");
        r.id = Some("d-1".into());
        assert_eq!(r.key(4), "d-1");
    }
}
