use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::HarnessError;
use crate::engine::ReasoningRun;

/// Bumped on any incompatible change to [`ReasoningRun`].
pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Line<'a> {
    schema_version: u32,
    #[serde(flatten)]
    run: &'a ReasoningRun,
}

/// One JSON object per run, each tagged with the schema version.
pub fn write_transcripts<W: Write>(runs: &[ReasoningRun], mut out: W) -> std::io::Result<()> {
    for run in runs {
        let line = serde_json::to_string(&Line {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            run,
        })
        .map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    out.flush()
}

pub fn persist_transcripts(runs: &[ReasoningRun], path: &Path) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_transcripts(runs, BufWriter::new(f)).map_err(|e| HarnessError::io(path, e))
}

/// Parse transcript lines; `label` names the source in errors.
pub fn read_transcripts<R: Read>(input: R, label: &Path) -> Result<Vec<ReasoningRun>, HarnessError> {
    let schema = |line: usize, reason: String| HarnessError::Schema {
        path: PathBuf::from(label),
        line,
        reason,
    };
    let mut runs = Vec::new();
    for (k, line) in BufReader::new(input).lines().enumerate() {
        let n = k + 1;
        let line = line.map_err(|e| HarnessError::io(label, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut v: Value = serde_json::from_str(&line).map_err(|e| schema(n, e.to_string()))?;
        let version = v
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| schema(n, "missing schema_version".into()))?;
        if version > TRANSCRIPT_SCHEMA_VERSION as u64 {
            return Err(schema(
                n,
                format!("schema_version {version} is newer than supported {TRANSCRIPT_SCHEMA_VERSION}"),
            ));
        }
        if let Some(obj) = v.as_object_mut() {
            obj.remove("schema_version");
        }
        runs.push(serde_json::from_value(v).map_err(|e| schema(n, e.to_string()))?);
    }
    Ok(runs)
}

pub fn load_transcripts(path: &Path) -> Result<Vec<ReasoningRun>, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_transcripts(f, path)
}
