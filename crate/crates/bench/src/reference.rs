//! Bundled reference numbers.
//!
//! Every value carries the table or figure it was taken from. Keys are
//! written `suite/row/column`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

const BUNDLED: &str = include_str!("../data/reference.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub suite: String,
    pub row: String,
    pub column: String,
    pub value: f64,
    /// `cycles` unless stated otherwise.
    #[serde(default = "cycles")]
    pub unit: String,
    pub source: String,
}

fn cycles() -> String {
    "cycles".into()
}

impl ReferenceEntry {
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.suite, self.row, self.column)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceData {
    entries: BTreeMap<String, ReferenceEntry>,
}

#[derive(Deserialize)]
struct File {
    entries: Vec<ReferenceEntry>,
}

impl ReferenceData {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled reference data parses")
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let file: File = serde_json::from_str(text).map_err(|e| BenchError::Config(format!("reference data: {e}")))?;
        let mut entries = BTreeMap::new();
        for e in file.entries {
            if e.source.trim().is_empty() {
                return Err(BenchError::Config(format!("reference `{}` has no source", e.key())));
            }
            if let Some(prev) = entries.insert(e.key(), e) {
                return Err(BenchError::Config(format!("reference `{}` listed twice", prev.key())));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn get(&self, key: &str) -> Option<&ReferenceEntry> {
        self.entries.get(key)
    }

    pub fn lookup(&self, suite: &str, row: &str, column: &str) -> Option<&ReferenceEntry> {
        self.get(&format!("{suite}/{row}/{column}"))
    }

    pub fn suite(&self, suite: &str) -> impl Iterator<Item = &ReferenceEntry> {
        let suite = suite.to_string();
        self.entries.values().filter(move |e| e.suite == suite)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ReferenceEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
