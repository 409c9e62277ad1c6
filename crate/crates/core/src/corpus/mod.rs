//! Message ingestion, synthetic corpora, model persistence and metrics.

mod generate;
mod metrics;
mod persist;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{gen_corpus, CorpusSpec, DriftSpec};
pub use metrics::{compute_metrics, Metrics};
pub use persist::{
    decode_state, encode_state, export_json, import_json, load_state, save_state, FORMAT_VERSION,
    MAGIC,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate message id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("{verdicts} verdicts but {labels} labels")]
    LengthMismatch { verdicts: usize, labels: usize },
    #[error("state file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("corrupt state: {0}")]
    CorruptState(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Spam,
    Legitimate,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Spam => "spam",
            Label::Legitimate => "legitimate",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Spam => Label::Legitimate,
            Label::Legitimate => Label::Spam,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One network transaction. `label` is absent for unlabeled traffic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledMessage {
    pub id: String,
    pub sender: String,
    #[serde(default)]
    pub header: String,
    #[serde(default)]
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl LabeledMessage {
    pub fn new(
        id: impl Into<String>,
        sender: impl Into<String>,
        header: impl Into<String>,
        body: impl Into<String>,
        label: Option<Label>,
    ) -> Self {
        Self {
            id: id.into(),
            sender: sender.into(),
            header: header.into(),
            body: body.into(),
            label,
        }
    }
}

/// Reads a JSONL corpus. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<LabeledMessage>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: LabeledMessage = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if msg.sender.trim().is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                reason: "empty sender".into(),
            });
        }
        if !ids.insert(msg.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: msg.id,
            });
        }
        out.push(msg);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<LabeledMessage>, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut writer: W, messages: &[LabeledMessage]) -> std::io::Result<()> {
    for m in messages {
        serde_json::to_writer(&mut writer, m)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(path: impl AsRef<Path>, messages: &[LabeledMessage]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_corpus(std::io::BufWriter::new(file), messages).map_err(|e| CorpusError::io(path, e))
}
