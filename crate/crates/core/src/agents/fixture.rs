//! JSONL fixtures of structured-output calls, and the backend that replays
//! them in call order.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{AgentBackend, AgentError, GenerationRequest, Message};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub request_messages: Vec<Message>,
    pub output_schema_hash: String,
    /// The response document, or a string holding it.
    pub response_json: Value,
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn write(v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push('{');
                for (i, k) in keys.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&Value::String(k.clone()).to_string());
                    out.push(':');
                    write(&map[k], out);
                }
                out.push('}');
            }
            Value::Array(items) => {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write(x, out);
                }
                out.push(']');
            }
            other => out.push_str(&other.to_string()),
        }
    }
    let mut s = String::new();
    write(v, &mut s);
    s
}

/// Hex SHA-256 of the canonical schema text.
pub fn schema_hash(schema: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(schema).as_bytes()))
}

/// Parses a recorded response and checks it against `schema`.
pub fn decode_response(response: &Value, schema: &Value) -> Result<Value, AgentError> {
    let doc = match response {
        Value::String(s) => {
            serde_json::from_str(s).map_err(|e| AgentError::SchemaViolation(format!("not JSON: {e}")))?
        }
        other => other.clone(),
    };
    check_schema(&doc, schema)?;
    Ok(doc)
}

pub(crate) fn check_schema(doc: &Value, schema: &Value) -> Result<(), AgentError> {
    let validator =
        jsonschema::validator_for(schema).map_err(|e| AgentError::SchemaViolation(format!("bad schema: {e}")))?;
    if let Some(err) = validator.iter_errors(doc).next() {
        return Err(AgentError::SchemaViolation(format!("{err} at {}", err.instance_path)));
    }
    Ok(())
}

/// Appends records to a JSONL file, one line per call.
#[derive(Debug, Clone)]
pub struct FixtureWriter {
    path: PathBuf,
}

impl FixtureWriter {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &FixtureRecord) -> Result<(), AgentError> {
        let mut line = serde_json::to_string(record).map_err(|e| AgentError::Fixture(e.to_string()))?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| AgentError::Fixture(format!("{}: {e}", self.path.display())))?;
        f.write_all(line.as_bytes()).map_err(|e| AgentError::Fixture(e.to_string()))
    }
}

/// Serves recorded responses in order. One instance per trial: the cursor
/// is not shared.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    records: Vec<FixtureRecord>,
    cursor: usize,
}

impl ReplayBackend {
    pub fn new(records: Vec<FixtureRecord>) -> Self {
        Self { records, cursor: 0 }
    }

    pub fn from_path(path: &Path) -> Result<Self, AgentError> {
        let f = File::open(path).map_err(|e| AgentError::Fixture(format!("{}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| AgentError::Fixture(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureRecord = serde_json::from_str(&line)
                .map_err(|e| AgentError::Fixture(format!("{}:{}: {e}", path.display(), i + 1)))?;
            records.push(rec);
        }
        Ok(Self::new(records))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }
}

impl AgentBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn generate(&mut self, request: &GenerationRequest) -> Result<Value, AgentError> {
        let index = self.cursor;
        let rec = self.records.get(index).ok_or(AgentError::FixtureExhausted(self.records.len()))?;
        self.cursor += 1;
        let expected = schema_hash(&request.output_schema);
        if rec.output_schema_hash != expected {
            return Err(AgentError::SchemaHashMismatch { index, expected, found: rec.output_schema_hash.clone() });
        }
        decode_response(&rec.response_json, &request.output_schema)
    }
}
