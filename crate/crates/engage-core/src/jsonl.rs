//! Line-delimited JSON files with a versioned header.
//!
//! Every artifact the pipeline writes starts with one header line naming the
//! record schema, the hash of the config that produced it, and the master
//! seed. Readers check the schema up front so a file from an incompatible
//! build fails loudly instead of deserializing garbage.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First line of every line-delimited artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FileHeader {
    pub schema: String,
    pub config_hash: String,
    pub master_seed: u64,
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("file is empty, expected a header line")]
    MissingHeader,
    #[error("malformed header: {0}")]
    BadHeader(#[source] serde_json::Error),
    #[error("file carries schema {found:?}, this build reads {expected:?}")]
    SchemaMismatch { found: String, expected: String },
    #[error("malformed record on line {line}: {source}")]
    BadRecord {
        /// 1-based, counting the header as line 1.
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Serializes a header plus records, one JSON document per line.
pub fn to_jsonl<T, I>(header: &FileHeader, records: I) -> String
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for record in records {
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parses a header and records from text, rejecting any schema other than
/// `expected_schema`.
pub fn from_jsonl<T: DeserializeOwned>(
    text: &str,
    expected_schema: &str,
) -> Result<(FileHeader, Vec<T>), JsonlError> {
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .filter(|l| !l.trim().is_empty())
        .ok_or(JsonlError::MissingHeader)?;
    let header: FileHeader = serde_json::from_str(header_line).map_err(JsonlError::BadHeader)?;
    if header.schema != expected_schema {
        return Err(JsonlError::SchemaMismatch {
            found: header.schema,
            expected: expected_schema.to_string(),
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| JsonlError::BadRecord {
            line: i + 2,
            source,
        })?;
        records.push(record);
    }
    Ok((header, records))
}

/// Writes records to `path`, header first.
pub fn write_jsonl<T, I>(
    path: impl AsRef<Path>,
    header: &FileHeader,
    records: I,
) -> Result<(), JsonlError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let path = path.as_ref();
    fs::write(path, to_jsonl(header, records)).map_err(|source| JsonlError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads records from `path`, checking the schema.
pub fn read_jsonl<T: DeserializeOwned>(
    path: impl AsRef<Path>,
    expected_schema: &str,
) -> Result<(FileHeader, Vec<T>), JsonlError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| JsonlError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_jsonl(&text, expected_schema)
}

/// Reads just the header of `path` without touching the records.
pub fn read_header(path: impl AsRef<Path>) -> Result<FileHeader, JsonlError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| JsonlError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut first = String::new();
    use io::BufRead;
    io::BufReader::new(file)
        .read_line(&mut first)
        .map_err(|source| JsonlError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    if first.trim().is_empty() {
        return Err(JsonlError::MissingHeader);
    }
    serde_json::from_str(first.trim_end()).map_err(JsonlError::BadHeader)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(rename_all = "camelCase", deny_unknown_fields)]
    struct Row {
        id: u32,
        value: f64,
    }

    fn header() -> FileHeader {
        FileHeader {
            schema: "engage.test.v1".to_string(),
            config_hash: "abc123".to_string(),
            master_seed: 42,
        }
    }

    #[test]
    fn round_trips_records_and_header() {
        let rows = vec![
            Row { id: 1, value: 0.5 },
            Row {
                id: 2,
                value: -3.25,
            },
        ];
        let text = to_jsonl(&header(), &rows);
        let (h, parsed): (_, Vec<Row>) = from_jsonl(&text, "engage.test.v1").unwrap();
        assert_eq!(h, header());
        assert_eq!(parsed, rows);
    }

    #[test]
    fn rejects_unknown_schema_version() {
        let text = to_jsonl::<&Row, _>(&header(), []);
        let err = from_jsonl::<Row>(&text, "engage.test.v2").unwrap_err();
        match err {
            JsonlError::SchemaMismatch { found, expected } => {
                assert_eq!(found, "engage.test.v1");
                assert_eq!(expected, "engage.test.v2");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_input() {
        assert!(matches!(
            from_jsonl::<Row>("", "s"),
            Err(JsonlError::MissingHeader)
        ));
        assert!(matches!(
            from_jsonl::<Row>("\n\n", "s"),
            Err(JsonlError::MissingHeader)
        ));
    }

    #[test]
    fn record_errors_carry_the_line_number() {
        let text = format!(
            "{}\n{{\"id\":1,\"value\":2.0}}\nnot json\n",
            serde_json::to_string(&header()).unwrap()
        );
        let err = from_jsonl::<Row>(&text, "engage.test.v1").unwrap_err();
        match err {
            JsonlError::BadRecord { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_record_fields_are_rejected() {
        let text = format!(
            "{}\n{{\"id\":1,\"value\":2.0,\"extra\":true}}\n",
            serde_json::to_string(&header()).unwrap()
        );
        assert!(matches!(
            from_jsonl::<Row>(&text, "engage.test.v1"),
            Err(JsonlError::BadRecord { line: 2, .. })
        ));
    }

    #[test]
    fn file_round_trip_and_header_peek() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = vec![Row { id: 7, value: 1.0 }];
        write_jsonl(&path, &header(), &rows).unwrap();
        let (h, parsed): (_, Vec<Row>) = read_jsonl(&path, "engage.test.v1").unwrap();
        assert_eq!(h, header());
        assert_eq!(parsed, rows);
        assert_eq!(read_header(&path).unwrap(), header());
    }

    #[test]
    fn floats_survive_a_round_trip_exactly() {
        // Artifact reloads must not perturb values or reruns diverge.
        let awkward = vec![
            Row {
                id: 1,
                value: 0.1 + 0.2,
            },
            Row {
                id: 2,
                value: 1e-300,
            },
        ];
        let text = to_jsonl(&header(), &awkward);
        let (_, parsed): (_, Vec<Row>) = from_jsonl(&text, "engage.test.v1").unwrap();
        assert_eq!(parsed[0].value.to_bits(), awkward[0].value.to_bits());
        assert_eq!(parsed[1].value.to_bits(), awkward[1].value.to_bits());
    }
}
