//! Line-delimited JSON corpus files.
//!
//! One record per line. Three record kinds, distinguished by their fields:
//!
//! ```text
//! sentence:  {"tokens": [...], "lang_tags": [...]?}
//! parallel:  {"source": <sentence>, "source_lang": "..",
//!             "target": <sentence>, "target_lang": ".."}
//! cs:        {"input": <sentence>, "pair": {"matrix": "..", "embedded": ".."},
//!             "reference": <sentence>}
//! candidate: {"input": <sentence>, "pair": {...}, "candidate": <sentence>}
//! ```
//!
//! A file holds exactly one kind; loading reports the offending line number
//! for malformed or mismatched records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{CsExample, LanguagePair, ParallelExample, Sentence};
use crate::error::{Error, Result};

/// A model generation paired with the input it was produced from, before
/// filtering decides whether to keep it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Candidate {
    pub input: Sentence,
    pub pair: LanguagePair,
    pub candidate: Sentence,
}

fn kind_of(value: &Value) -> &'static str {
    let obj = match value.as_object() {
        Some(o) => o,
        None => return "non-object",
    };
    if obj.contains_key("candidate") {
        "candidate"
    } else if obj.contains_key("reference") {
        "cs"
    } else if obj.contains_key("source") {
        "parallel"
    } else if obj.contains_key("tokens") {
        "sentence"
    } else {
        "unknown (missing tokens field)"
    }
}

fn save_records<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn load_records<T: DeserializeOwned>(path: &Path, expected_kind: &'static str) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: lineno,
            msg,
        };
        let value: Value =
            serde_json::from_str(&line).map_err(|e| parse_err(format!("invalid JSON: {e}")))?;
        let kind = kind_of(&value);
        if kind != expected_kind {
            return Err(parse_err(format!(
                "expected a {expected_kind} record, found {kind}"
            )));
        }
        let record: T =
            serde_json::from_value(value).map_err(|e| parse_err(format!("bad record: {e}")))?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_sentences(sentences: &[Sentence], path: &Path) -> Result<()> {
    save_records(sentences, path)
}

pub fn load_sentences(path: &Path) -> Result<Vec<Sentence>> {
    let sentences: Vec<Sentence> = load_records(path, "sentence")?;
    for (i, s) in sentences.iter().enumerate() {
        s.validate().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(sentences)
}

pub fn save_parallel(examples: &[ParallelExample], path: &Path) -> Result<()> {
    save_records(examples, path)
}

pub fn load_parallel(path: &Path) -> Result<Vec<ParallelExample>> {
    load_records(path, "parallel")
}

pub fn save_cs(examples: &[CsExample], path: &Path) -> Result<()> {
    save_records(examples, path)
}

pub fn load_cs(path: &Path) -> Result<Vec<CsExample>> {
    load_records(path, "cs")
}

pub fn save_candidates(candidates: &[Candidate], path: &Path) -> Result<()> {
    save_records(candidates, path)
}

pub fn load_candidates(path: &Path) -> Result<Vec<Candidate>> {
    load_records(path, "candidate")
}
