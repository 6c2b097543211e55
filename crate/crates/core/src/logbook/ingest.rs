//! File ingestion for the two supported logbook formats.

use super::{AscentRecord, LogbookError, TickClass, TickPolicy, UnknownTickAction};
use crate::grades::{parse_grade, GradeSystem};
use chrono::NaiveDate;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Input encodings: a delimited table (comma or tab, auto-detected from the
/// header line) or a JSON array of record objects. Both carry the same five
/// fields: climber_id, route_id, date, grade, tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Delimited,
    Json,
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputFormat::Delimited => f.write_str("delimited"),
            InputFormat::Json => f.write_str("json"),
        }
    }
}

impl FromStr for InputFormat {
    type Err = LogbookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "delimited" | "csv" | "tsv" => Ok(InputFormat::Delimited),
            "json" => Ok(InputFormat::Json),
            _ => Err(LogbookError::UnknownFormat(s.to_string())),
        }
    }
}

/// Ingestion result plus the row accounting the preparation report needs.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub records: Vec<AscentRecord>,
    pub rows_read: usize,
    /// Rows dropped because their tick is in the policy's ignored set.
    pub ignored_rows: usize,
    /// Unknown tick token -> occurrence count (rows dropped under
    /// [`UnknownTickAction::Ignore`]); callers should surface these.
    pub unknown_ticks: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    climber_id: String,
    route_id: String,
    date: String,
    grade: String,
    tick: String,
}

/// Read a logbook file into records, classifying ticks under `policy`.
///
/// `success` is set from the tick class; ignored rows are dropped and
/// counted. Unknown ticks either fail fast or are dropped and tallied,
/// per the policy.
pub fn ingest(
    path: &Path,
    format: InputFormat,
    system: GradeSystem,
    policy: &TickPolicy,
) -> Result<Ingested, LogbookError> {
    policy.validate()?;
    let text = std::fs::read_to_string(path).map_err(|source| LogbookError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = match format {
        InputFormat::Delimited => parse_delimited(&text)?,
        InputFormat::Json => parse_json(&text)?,
    };

    let mut out = Ingested {
        records: Vec::with_capacity(rows.len()),
        rows_read: rows.len(),
        ignored_rows: 0,
        unknown_ticks: BTreeMap::new(),
    };
    for (row_number, raw) in rows {
        let tick = raw.tick.trim().to_ascii_lowercase();
        let success = match policy.classify(&tick) {
            TickClass::Success => true,
            TickClass::Failure => false,
            TickClass::Ignored => {
                out.ignored_rows += 1;
                continue;
            }
            TickClass::Unknown => match policy.on_unknown {
                UnknownTickAction::Fail => {
                    return Err(LogbookError::UnknownTick {
                        row: row_number,
                        tick,
                    })
                }
                UnknownTickAction::Ignore => {
                    *out.unknown_ticks.entry(tick).or_insert(0) += 1;
                    continue;
                }
            },
        };
        let date = NaiveDate::parse_from_str(raw.date.trim(), "%Y-%m-%d").map_err(|e| {
            LogbookError::MalformedRow {
                row: row_number,
                message: format!("bad date {:?}: {e}", raw.date),
            }
        })?;
        let grade = parse_grade(&raw.grade, system).map_err(|e| LogbookError::MalformedRow {
            row: row_number,
            message: e.to_string(),
        })?;
        out.records.push(AscentRecord {
            climber_id: raw.climber_id.trim().to_string(),
            route_id: raw.route_id.trim().to_string(),
            date,
            grade,
            tick,
            success,
        });
    }
    Ok(out)
}

/// Rows keyed by their 1-based line number in the source file (header is
/// line 1, so the first data row reports as row 2).
fn parse_delimited(text: &str) -> Result<Vec<(usize, RawRow)>, LogbookError> {
    let header = text.lines().next().unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| LogbookError::MalformedRow {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    for required in ["climber_id", "route_id", "date", "grade", "tick"] {
        if !headers.iter().any(|h| h == required) {
            return Err(LogbookError::MalformedRow {
                row: 1,
                message: format!("missing required column {required:?}"),
            });
        }
    }

    let mut rows = Vec::new();
    for result in reader.deserialize::<RawRow>() {
        // Data rows start on line 2; csv reports the line a record starts on.
        let row_number = rows.len() + 2;
        let raw = result.map_err(|e| LogbookError::MalformedRow {
            row: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(row_number),
            message: e.to_string(),
        })?;
        rows.push((row_number, raw));
    }
    Ok(rows)
}

/// Rows keyed by their 1-based position in the JSON array.
fn parse_json(text: &str) -> Result<Vec<(usize, RawRow)>, LogbookError> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| LogbookError::MalformedRow {
            row: e.line(),
            message: e.to_string(),
        })?;
    values
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let raw: RawRow =
                serde_json::from_value(value).map_err(|e| LogbookError::MalformedRow {
                    row: i + 1,
                    message: e.to_string(),
                })?;
            Ok((i + 1, raw))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn policy() -> TickPolicy {
        TickPolicy::default_for(GradeSystem::Ewbank)
    }

    #[test]
    fn reads_comma_delimited() {
        let f = write_temp(
            "climber_id,route_id,date,grade,tick\n\
             alice,cave-route,2020-01-05,23,hangdog\n\
             alice,cave-route,2020-01-06,23,redpoint\n",
        );
        let got = ingest(f.path(), InputFormat::Delimited, GradeSystem::Ewbank, &policy()).unwrap();
        assert_eq!(got.rows_read, 2);
        assert_eq!(got.records.len(), 2);
        assert!(!got.records[0].success);
        assert!(got.records[1].success);
        assert_eq!(got.records[0].grade.value, 23.0);
    }

    #[test]
    fn reads_tab_delimited_with_reordered_columns() {
        let f = write_temp(
            "date\ttick\tclimber_id\tgrade\troute_id\n\
             2020-01-05\tonsight\tbob\t21\tarete\n",
        );
        let got = ingest(f.path(), InputFormat::Delimited, GradeSystem::Ewbank, &policy()).unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.records[0].climber_id, "bob");
        assert!(got.records[0].success);
    }

    #[test]
    fn reads_json_records() {
        let f = write_temp(
            r#"[{"climber_id":"cara","route_id":"slab","date":"2020-02-01","grade":"7a","tick":"flash"}]"#,
        );
        let got = ingest(f.path(), InputFormat::Json, GradeSystem::French, &policy()).unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.records[0].grade.value, 23.0);
    }

    #[test]
    fn ignored_ticks_are_dropped_and_counted() {
        let mut p = policy();
        p.ignored_ticks.insert("toprope".to_string());
        let f = write_temp(
            "climber_id,route_id,date,grade,tick\n\
             dan,wall,2020-01-05,20,topRope\n\
             dan,wall,2020-01-06,20,redpoint\n",
        );
        let got = ingest(f.path(), InputFormat::Delimited, GradeSystem::Ewbank, &p).unwrap();
        assert_eq!(got.ignored_rows, 1);
        assert_eq!(got.records.len(), 1);
    }

    #[test]
    fn unknown_ticks_ignore_or_fail_per_policy() {
        let contents = "climber_id,route_id,date,grade,tick\n\
                        eve,crack,2020-01-05,20,secondClean\n";
        let f = write_temp(contents);

        let got = ingest(f.path(), InputFormat::Delimited, GradeSystem::Ewbank, &policy()).unwrap();
        assert!(got.records.is_empty());
        assert_eq!(got.unknown_ticks.get("secondclean"), Some(&1));

        let mut strict = policy();
        strict.on_unknown = UnknownTickAction::Fail;
        let err = ingest(f.path(), InputFormat::Delimited, GradeSystem::Ewbank, &strict).unwrap_err();
        assert!(matches!(err, LogbookError::UnknownTick { row: 2, .. }));
    }

    #[test]
    fn malformed_rows_report_their_position() {
        let f = write_temp(
            "climber_id,route_id,date,grade,tick\n\
             fay,roof,2020-01-05,23,redpoint\n\
             fay,roof,not-a-date,23,redpoint\n",
        );
        let err = ingest(f.path(), InputFormat::Delimited, GradeSystem::Ewbank, &policy()).unwrap_err();
        match err {
            LogbookError::MalformedRow { row, message } => {
                assert_eq!(row, 3);
                assert!(message.contains("not-a-date"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let f = write_temp("climber_id,route_id,date,grade\nal,x,2020-01-05,20\n");
        let err = ingest(f.path(), InputFormat::Delimited, GradeSystem::Ewbank, &policy()).unwrap_err();
        match err {
            LogbookError::MalformedRow { row: 1, message } => assert!(message.contains("tick")),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
