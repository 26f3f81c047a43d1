use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalence::ClassId;
use crate::grid::CellAddress;

/// Origin categories of an irregularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    ConstantInsteadOfFormula,
    ConstantInsteadOfReference,
    ReferenceToEmptyCell,
    FormulaCopiedTooFar,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::ConstantInsteadOfFormula,
        Category::ConstantInsteadOfReference,
        Category::ReferenceToEmptyCell,
        Category::FormulaCopiedTooFar,
        Category::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::ConstantInsteadOfFormula => "Constant instead of formula",
            Category::ConstantInsteadOfReference => "Constant instead of reference",
            Category::ReferenceToEmptyCell => "Reference to empty cell",
            Category::FormulaCopiedTooFar => "Formula copied too far",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Impact {
    Qualitative,
    Quantitative,
}

impl FromStr for Impact {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qualitative" => Ok(Impact::Qualitative),
            "quantitative" => Ok(Impact::Quantitative),
            _ => Err(format!("unknown impact `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Open,
    ConfirmedError,
    Dismissed,
}

/// A detector-reported irregularity awaiting an auditor verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub category: Category,
    pub location: CellAddress,
    /// Classes involved: the disrupted class first, then the class of the
    /// finding's own cell when it holds a formula.
    pub classes: Vec<ClassId>,
    /// The run(s) examined, in A1 notation.
    pub run: Option<String>,
    pub description: String,
    pub status: Status,
    /// Copy fingerprint of the formula at `location`, if it holds one.
    pub formula_key: Option<String>,
}

impl Finding {
    /// Key under which confirmed errors coalesce into error classes.
    pub fn error_class_key(&self) -> String {
        match &self.formula_key {
            Some(key) => format!("formula:{key}"),
            None => format!("cell:{}", self.location),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Verdict {
    Confirm { impact: Impact, note: String },
    Dismiss { note: String },
}

/// An auditor-confirmed error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub finding_id: String,
    pub impact: Impact,
    pub note: String,
    pub error_class_key: String,
    pub category: Category,
    pub location: CellAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Created { finding: Finding },
    Verdict {
        finding_id: String,
        verdict: Verdict,
        record: Option<ErrorRecord>,
    },
}

/// One line of the findings log. `ts` (Unix milliseconds) is the envelope
/// field excluded when comparing logs for determinism.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub ts: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("no finding with id `{0}`")]
    NotFound(String),
    #[error("finding `{id}` is {status:?}; only open findings accept a verdict")]
    NotOpen { id: String, status: Status },
    #[error("finding id `{0}` already exists")]
    DuplicateId(String),
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Store {
        line: usize,
        #[source]
        source: StoreError,
    },
}

/// The error database: findings, confirmed error records, and the append-only
/// event log that reconstructs both.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FindingStore {
    findings: Vec<Finding>,
    records: Vec<ErrorRecord>,
    log: Vec<LogEntry>,
}

impl FindingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store holding `findings` as Open, each logged as a creation event.
    pub fn with_findings(findings: Vec<Finding>, ts: u64) -> Result<Self, StoreError> {
        let mut store = Self::new();
        for f in findings {
            store.create(f, ts)?;
        }
        Ok(store)
    }

    pub fn create(&mut self, mut finding: Finding, ts: u64) -> Result<(), StoreError> {
        if self.find(&finding.id).is_some() {
            return Err(StoreError::DuplicateId(finding.id));
        }
        finding.status = Status::Open;
        self.findings.push(finding.clone());
        self.log.push(LogEntry {
            ts,
            event: Event::Created { finding },
        });
        Ok(())
    }

    fn find(&self, id: &str) -> Option<usize> {
        self.findings.iter().position(|f| f.id == id)
    }

    pub fn finding(&self, id: &str) -> Option<&Finding> {
        self.find(id).map(|i| &self.findings[i])
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }

    pub fn records(&self) -> &[ErrorRecord] {
        &self.records
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Applies an auditor verdict to an open finding. Confirmation appends an
    /// error record keyed by the finding's error class.
    pub fn record_verdict(&mut self, id: &str, verdict: Verdict, ts: u64) -> Result<&Finding, StoreError> {
        let idx = self.find(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        let finding = &mut self.findings[idx];
        if finding.status != Status::Open {
            return Err(StoreError::NotOpen {
                id: id.to_string(),
                status: finding.status,
            });
        }
        let record = match &verdict {
            Verdict::Confirm { impact, note } => {
                finding.status = Status::ConfirmedError;
                Some(ErrorRecord {
                    finding_id: finding.id.clone(),
                    impact: *impact,
                    note: note.clone(),
                    error_class_key: finding.error_class_key(),
                    category: finding.category,
                    location: finding.location.clone(),
                })
            }
            Verdict::Dismiss { .. } => {
                finding.status = Status::Dismissed;
                None
            }
        };
        if let Some(r) = &record {
            self.records.push(r.clone());
        }
        self.log.push(LogEntry {
            ts,
            event: Event::Verdict {
                finding_id: id.to_string(),
                verdict,
                record,
            },
        });
        Ok(&self.findings[idx])
    }

    /// The log as JSON lines, one event per line, LF-terminated.
    pub fn to_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|e| serde_json::to_string(e).expect("log entries serialize") + "\n")
            .collect()
    }

    /// The log without timestamps, for determinism comparisons.
    pub fn events_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|e| serde_json::to_string(&e.event).expect("events serialize") + "\n")
            .collect()
    }

    /// Rebuilds a store from its JSON-lines log.
    pub fn replay(text: &str) -> Result<Self, ReplayError> {
        let mut store = Self::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line_no = n + 1;
            let entry: LogEntry = serde_json::from_str(line).map_err(|source| ReplayError::Json {
                line: line_no,
                source,
            })?;
            let result = match entry.event {
                Event::Created { finding } => store.create(finding, entry.ts),
                Event::Verdict { finding_id, verdict, .. } => {
                    store.record_verdict(&finding_id, verdict, entry.ts).map(|_| ())
                }
            };
            result.map_err(|source| ReplayError::Store { line: line_no, source })?;
        }
        Ok(store)
    }
}
