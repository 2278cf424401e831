//! Exact-match score tables.
//!
//! JSON document format:
//!
//! ```json
//! {"default": 1.0, "entries": [{"context": "", "candidate": "A.", "score": 0.5}]}
//! ```
//!
//! Scores are raw positive weights; the scorer reports their natural log.
//! Pairs that are not listed fall back to `default`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerError};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularScoreTable {
    default: f64,
    // context -> candidate -> raw score
    entries: HashMap<String, HashMap<String, f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDocument {
    default: f64,
    #[serde(default)]
    entries: Vec<TableEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    context: String,
    candidate: String,
    score: f64,
}

fn check_weight(w: f64, what: &str) -> Result<(), ScorerError> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(ScorerError::InvalidTable(format!("{what} must be a finite positive number, got {w}")))
    }
}

impl TabularScoreTable {
    pub fn new(default: f64) -> Result<Self, ScorerError> {
        check_weight(default, "default score")?;
        Ok(Self { default, entries: HashMap::new() })
    }

    /// Inserts or replaces one entry.
    pub fn insert(
        &mut self,
        context: impl Into<String>,
        candidate: impl Into<String>,
        score: f64,
    ) -> Result<(), ScorerError> {
        check_weight(score, "score")?;
        self.entries.entry(context.into()).or_default().insert(candidate.into(), score);
        Ok(())
    }

    pub fn default_score(&self) -> f64 {
        self.default
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn raw_score(&self, context: &str, candidate: &str) -> f64 {
        self.entries.get(context).and_then(|row| row.get(candidate)).copied().unwrap_or(self.default)
    }

    pub fn from_json(text: &str) -> Result<Self, ScorerError> {
        let doc: TableDocument = serde_json::from_str(text).map_err(|e| ScorerError::InvalidTable(e.to_string()))?;
        let mut table = Self::new(doc.default)?;
        for entry in doc.entries {
            if table.entries.get(&entry.context).is_some_and(|r| r.contains_key(&entry.candidate)) {
                return Err(ScorerError::InvalidTable(format!(
                    "duplicate entry for context {:?} and candidate {:?}",
                    entry.context, entry.candidate
                )));
            }
            table.insert(entry.context, entry.candidate, entry.score)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, ScorerError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ScorerError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical JSON: entries sorted by (context, candidate).
    pub fn to_json(&self) -> String {
        let mut entries: Vec<TableEntry> = self
            .entries
            .iter()
            .flat_map(|(context, row)| {
                row.iter().map(move |(candidate, &score)| TableEntry {
                    context: context.clone(),
                    candidate: candidate.clone(),
                    score,
                })
            })
            .collect();
        entries.sort_by(|a, b| (&a.context, &a.candidate).cmp(&(&b.context, &b.candidate)));
        let doc = TableDocument { default: self.default, entries };
        let mut text = serde_json::to_string_pretty(&doc).expect("table serializes");
        text.push('\n');
        text
    }
}

/// Scorer over a [`TabularScoreTable`]; deterministic and allocation-free per lookup.
#[derive(Debug, Clone)]
pub struct TabularScorer {
    table: TabularScoreTable,
}

impl TabularScorer {
    pub fn new(table: TabularScoreTable) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &TabularScoreTable {
        &self.table
    }
}

impl Scorer for TabularScorer {
    fn log_score(&self, context: &str, candidate: &str) -> Result<f64, ScorerError> {
        Ok(self.table.raw_score(context, candidate).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_pair_falls_back_to_default() {
        let mut t = TabularScoreTable::new(0.25).unwrap();
        t.insert("ctx", "a", 2.0).unwrap();
        assert_eq!(t.raw_score("ctx", "a"), 2.0);
        assert_eq!(t.raw_score("ctx", "b"), 0.25);
        assert_eq!(t.raw_score("ctx ", "a"), 0.25);
    }

    #[test]
    fn rejects_nonpositive_scores() {
        assert!(TabularScoreTable::new(0.0).is_err());
        let mut t = TabularScoreTable::new(1.0).unwrap();
        assert!(t.insert("", "a", -1.0).is_err());
        assert!(t.insert("", "a", f64::NAN).is_err());
        assert!(TabularScoreTable::from_json(
            r#"{"default": 1, "entries": [{"context": "", "candidate": "a", "score": 0}]}"#
        )
        .is_err());
    }

    #[test]
    fn json_round_trip_is_canonical() {
        let text = r#"{"default": 0.5, "entries": [
            {"context": "z", "candidate": "b", "score": 3},
            {"context": "a", "candidate": "b", "score": 1.5}]}"#;
        let t = TabularScoreTable::from_json(text).unwrap();
        let canon = t.to_json();
        let again = TabularScoreTable::from_json(&canon).unwrap();
        assert_eq!(t, again);
        assert_eq!(canon, again.to_json());
        assert!(canon.find("\"a\"").unwrap() < canon.find("\"z\"").unwrap());
    }

    #[test]
    fn duplicate_entries_rejected() {
        let text = r#"{"default": 1, "entries": [
            {"context": "", "candidate": "a", "score": 1},
            {"context": "", "candidate": "a", "score": 2}]}"#;
        assert!(TabularScoreTable::from_json(text).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(TabularScoreTable::from_json(r#"{"default": 1, "extra": 2}"#).is_err());
    }
}
