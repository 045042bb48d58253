use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{Game24Instance, Instance, McqInstance, SchemaError, TaskError, TaskKind, TripInstance};
use crate::game24::Quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Abort on the first malformed record.
    #[default]
    Strict,
    /// Skip malformed records and report them.
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Loaded {
    pub instances: Vec<Instance>,
    pub skipped: Vec<SchemaError>,
}

/// Game-of-24 lines may omit `id`; dataset lines carry extra fields.
#[derive(Deserialize)]
struct Game24Line {
    id: Option<String>,
    #[serde(alias = "quad")]
    numbers: Quad,
}

fn parse<T: DeserializeOwned>(line: &str) -> Result<T, SchemaError> {
    serde_json::from_str(line).map_err(|e| SchemaError::new(e.to_string()))
}

fn parse_line(kind: TaskKind, line: &str, n: usize) -> Result<Instance, SchemaError> {
    match kind {
        TaskKind::Game24 => {
            let g: Game24Line = parse(line)?;
            Ok(Instance::Game24(Game24Instance {
                id: g.id.unwrap_or_else(|| format!("game24-{n}")),
                numbers: g.numbers,
            }))
        }
        TaskKind::Mcq => {
            let m: McqInstance = parse(line)?;
            m.validate()?;
            Ok(Instance::Mcq(m))
        }
        TaskKind::Trip => {
            let t: TripInstance = parse(line)?;
            t.validate()?;
            Ok(Instance::Trip(t))
        }
    }
}

/// Read one JSON record per line. Blank lines are ignored; line numbers in
/// errors are 1-based.
pub fn load_instances(path: &Path, kind: TaskKind, mode: LoadMode) -> Result<Loaded, TaskError> {
    let text =
        fs::read_to_string(path).map_err(|e| TaskError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Loaded::default();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(kind, line, k + 1) {
            Ok(inst) => out.instances.push(inst),
            Err(e) => {
                let e = e.at(k + 1);
                match mode {
                    LoadMode::Strict => return Err(e.into()),
                    LoadMode::Lenient => {
                        tracing::warn!(path = %path.display(), error = %e, "skipping record");
                        out.skipped.push(e);
                    }
                }
            }
        }
    }
    if out.instances.is_empty() && out.skipped.is_empty() {
        tracing::warn!(path = %path.display(), "no records");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const MCQ: &str = r#"{"id":"q1","question":"?","choices":["a","b","c","d"],"answer":"A"}"#;

    #[test]
    fn mcq_lines() {
        let f = file(&format!("{MCQ}\n{MCQ}\n\n{MCQ}\n"));
        let l = load_instances(f.path(), TaskKind::Mcq, LoadMode::Strict).unwrap();
        assert_eq!(l.instances.len(), 3);
    }

    #[test]
    fn missing_gold_is_schema_error_at_line() {
        let bad = r#"{"id":"q2","question":"?","choices":["a","b","c","d"]}"#;
        let f = file(&format!("{MCQ}\n{bad}\n"));
        match load_instances(f.path(), TaskKind::Mcq, LoadMode::Strict) {
            Err(TaskError::Schema(e)) => assert_eq!(e.line, 2),
            other => panic!("{other:?}"),
        }
        let l = load_instances(f.path(), TaskKind::Mcq, LoadMode::Lenient).unwrap();
        assert_eq!((l.instances.len(), l.skipped.len()), (1, 1));
    }

    #[test]
    fn empty_file_is_empty_list() {
        let f = file("");
        let l = load_instances(f.path(), TaskKind::Trip, LoadMode::Strict).unwrap();
        assert!(l.instances.is_empty());
    }

    #[test]
    fn game24_lines_accept_dataset_records() {
        let f = file("{\"numbers\":[4,6,1,1]}\n{\"quad\":[1,14,16,25],\"steps\":[],\"expression\":\"\",\"canonical_key\":\"\"}\n");
        let l = load_instances(f.path(), TaskKind::Game24, LoadMode::Strict).unwrap();
        assert_eq!(l.instances[0].id(), "game24-1");
        assert_eq!(l.instances.len(), 2);
    }

    #[test]
    fn missing_file_is_io() {
        let r = load_instances(Path::new("/nonexistent/x.jsonl"), TaskKind::Mcq, LoadMode::Strict);
        assert!(matches!(r, Err(TaskError::Io(_))));
    }
}
