use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::kind::ProbeKind;

use super::EvalError;

/// A labelled statement; `label` is true for a hallucination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    #[serde(with = "label_int")]
    pub label: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ProbeKind>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub domain: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub dataset: String,
}

mod label_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(label: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*label))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            n => Err(serde::de::Error::custom(format!("label must be 0 or 1, got {n}"))),
        }
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> EvalError {
    EvalError::MalformedRecord { line, reason: reason.into() }
}

fn parse_record(line_no: usize, line: &str, dataset: &str) -> Result<LabeledExample, EvalError> {
    let value: Value = serde_json::from_str(line).map_err(|e| malformed(line_no, e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| malformed(line_no, "record is not an object"))?;
    let text = match obj.get("text") {
        Some(Value::String(t)) if !t.trim().is_empty() => t.trim().to_string(),
        Some(Value::String(_)) => return Err(malformed(line_no, "text is empty")),
        Some(_) => return Err(malformed(line_no, "text must be a string")),
        None => return Err(malformed(line_no, "missing text")),
    };
    let label = match obj.get("label") {
        Some(Value::Number(n)) if n.as_u64() == Some(0) => false,
        Some(Value::Number(n)) if n.as_u64() == Some(1) => true,
        Some(other) => return Err(malformed(line_no, format!("label must be the integer 0 or 1, got {other}"))),
        None => return Err(malformed(line_no, "missing label")),
    };
    let optional_str = |key: &str| -> Result<Option<String>, EvalError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(malformed(line_no, format!("{key} must be a string"))),
        }
    };
    let kind = optional_str("kind")?
        .map(|k| k.parse::<ProbeKind>().map_err(|e| malformed(line_no, e.to_string())))
        .transpose()?;
    Ok(LabeledExample {
        id: optional_str("id")?.unwrap_or_else(|| format!("line-{line_no}")),
        text,
        label,
        kind,
        domain: optional_str("domain")?.unwrap_or_default(),
        dataset: optional_str("dataset")?.unwrap_or_else(|| dataset.to_string()),
    })
}

/// Parses JSON-lines records. Blank lines are skipped; line numbers are 1-based.
pub fn parse_dataset(text: &str, dataset: &str) -> Result<Vec<LabeledExample>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| parse_record(i + 1, line, dataset))
        .collect()
}

/// Loads a dataset file; the dataset name defaults to the file stem.
pub fn load_dataset(path: &Path) -> Result<Vec<LabeledExample>, EvalError> {
    if !path.exists() {
        return Err(EvalError::MissingFile(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_dataset(&text, &name)
}

/// One JSON object per line, newline terminated.
pub fn dataset_to_jsonl(examples: &[LabeledExample]) -> String {
    examples
        .iter()
        .map(|e| serde_json::to_string(e).expect("example serializes") + "\n")
        .collect()
}
