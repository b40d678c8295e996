//! Input formats: a confusion matrix as CSV and a paired joint table as
//! JSON.
//!
//! CSV: `r` lines of `r` comma-separated non-negative integers, rows the
//! prediction and columns the truth, optionally preceded by a single
//! `# classes: a,b,c` line. JSON: `{"r": 3, "labels": [...], "counts":
//! [[i, j, k, n], ...]}` with 1-based indices (method-1 prediction,
//! method-2 prediction, truth); cells not listed are zero.

use std::collections::HashSet;

use serde_json::Value;
use thiserror::Error;

use crate::error::MccError;
use crate::paired::JointCounts3;
use crate::table::ConfusionCounts2;

/// Input errors. Locations are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("input is empty")]
    EmptyInput,

    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{rows} rows of {columns} cells do not form a square table")]
    NotSquare { rows: usize, columns: usize },

    #[error("line {line}, column {column}: negative count {text}")]
    NegativeCell {
        line: usize,
        column: usize,
        text: String,
    },

    #[error("line {line}, column {column}: {text:?} is not a non-negative integer")]
    NonInteger {
        line: usize,
        column: usize,
        text: String,
    },

    #[error("line {line}: {reason}")]
    BadHeader { line: usize, reason: String },

    #[error("entry {entry}: index {value} at position {position} is outside 1..={r}")]
    IndexOutOfRange {
        entry: usize,
        position: usize,
        value: i64,
        r: usize,
    },

    #[error("entry {entry}: cell ({i}, {j}, {k}) was already given")]
    DuplicateCell {
        entry: usize,
        i: usize,
        j: usize,
        k: usize,
    },

    #[error("entry {entry}: negative count {value}")]
    NegativeCount { entry: usize, value: i64 },

    #[error("malformed document: {reason}")]
    MalformedDocument { reason: String },

    #[error(transparent)]
    Table(#[from] MccError),
}

/// A confusion matrix with its class labels (`"1"`, `"2"`, ... when the
/// input has none).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCounts {
    pub counts: ConfusionCounts2,
    pub labels: Vec<String>,
}

/// A joint table with its class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledJoint {
    pub counts: JointCounts3,
    pub labels: Vec<String>,
}

fn default_labels(r: usize) -> Vec<String> {
    (1..=r).map(|i| i.to_string()).collect()
}

fn parse_cell(text: &str, line: usize, column: usize) -> Result<u64, ParseError> {
    let t = text.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    if t.starts_with('-') && t[1..].parse::<u64>().is_ok() {
        return Err(ParseError::NegativeCell {
            line,
            column,
            text: t.to_string(),
        });
    }
    Err(ParseError::NonInteger {
        line,
        column,
        text: t.to_string(),
    })
}

/// Parses a square matrix of counts. Blank lines are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<LabeledCounts, ParseError> {
    let mut labels: Option<(usize, Vec<String>)> = None;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('#') {
            if labels.is_some() || !rows.is_empty() {
                return Err(ParseError::BadHeader {
                    line,
                    reason: "only one header line is allowed, before the counts".into(),
                });
            }
            let Some(list) = rest.trim().strip_prefix("classes:") else {
                return Err(ParseError::BadHeader {
                    line,
                    reason: "expected `# classes: a,b,...`".into(),
                });
            };
            let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            if names.iter().any(String::is_empty) {
                return Err(ParseError::BadHeader {
                    line,
                    reason: "empty class label".into(),
                });
            }
            labels = Some((line, names));
            continue;
        }
        let cells = content
            .split(',')
            .enumerate()
            .map(|(c, t)| parse_cell(t, line, c + 1))
            .collect::<Result<Vec<u64>, _>>()?;
        if let Some(first) = rows.first() {
            if cells.len() != first.len() {
                return Err(ParseError::RaggedRows {
                    line,
                    expected: first.len(),
                    found: cells.len(),
                });
            }
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    if rows.len() != rows[0].len() {
        return Err(ParseError::NotSquare {
            rows: rows.len(),
            columns: rows[0].len(),
        });
    }
    let counts = ConfusionCounts2::from_rows(&rows)?;
    let labels = match labels {
        Some((line, names)) => {
            if names.len() != counts.r() {
                return Err(ParseError::BadHeader {
                    line,
                    reason: format!("{} labels for {} classes", names.len(), counts.r()),
                });
            }
            names
        }
        None => default_labels(counts.r()),
    };
    Ok(LabeledCounts { counts, labels })
}

/// Writes counts in the format read by [`parse_matrix_csv`].
pub fn write_matrix_csv(counts: &ConfusionCounts2, labels: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(l) = labels {
        out.push_str("# classes: ");
        out.push_str(&l.join(","));
        out.push('\n');
    }
    let r = counts.r();
    for i in 0..r {
        let row: Vec<String> = (0..r).map(|j| counts.get(i, j).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn malformed(reason: impl Into<String>) -> ParseError {
    ParseError::MalformedDocument {
        reason: reason.into(),
    }
}

/// Parses a sparse joint table.
pub fn parse_joint_json(text: &str) -> Result<LabeledJoint, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let doc: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| malformed("top level must be an object"))?;
    if let Some(key) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "r" | "labels" | "counts"))
    {
        return Err(malformed(format!("unknown key {key:?}")));
    }
    let r = obj
        .get("r")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("\"r\" must be a positive integer"))? as usize;
    let mut joint = JointCounts3::zeros(r)?;
    let labels = match obj.get("labels") {
        None | Some(Value::Null) => default_labels(r),
        Some(Value::Array(items)) => {
            let names = items
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<String>>>()
                .ok_or_else(|| malformed("\"labels\" must be an array of strings"))?;
            if names.len() != r {
                return Err(malformed(format!("{} labels for {r} classes", names.len())));
            }
            names
        }
        Some(_) => return Err(malformed("\"labels\" must be an array of strings")),
    };
    let entries = obj
        .get("counts")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("\"counts\" must be an array"))?;
    let mut seen = HashSet::new();
    for (e, item) in entries.iter().enumerate() {
        let entry = e + 1;
        let quad = item
            .as_array()
            .filter(|a| a.len() == 4)
            .ok_or_else(|| malformed(format!("entry {entry} must be [i, j, k, count]")))?;
        let mut vals = [0i64; 4];
        for (slot, v) in vals.iter_mut().zip(quad) {
            *slot = v
                .as_i64()
                .ok_or_else(|| malformed(format!("entry {entry} holds a non-integer {v}")))?;
        }
        for (position, &value) in vals[..3].iter().enumerate() {
            if value < 1 || value as usize > r {
                return Err(ParseError::IndexOutOfRange {
                    entry,
                    position: position + 1,
                    value,
                    r,
                });
            }
        }
        if vals[3] < 0 {
            return Err(ParseError::NegativeCount {
                entry,
                value: vals[3],
            });
        }
        let (i, j, k) = (vals[0] as usize, vals[1] as usize, vals[2] as usize);
        if !seen.insert((i, j, k)) {
            return Err(ParseError::DuplicateCell { entry, i, j, k });
        }
        joint.set(i - 1, j - 1, k - 1, vals[3] as u64);
    }
    Ok(LabeledJoint {
        counts: joint,
        labels,
    })
}

/// Writes the nonzero cells of a joint table in the format read by
/// [`parse_joint_json`].
pub fn write_joint_json(counts: &JointCounts3, labels: Option<&[String]>) -> String {
    let r = counts.r();
    let mut cells = Vec::new();
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let v = counts.get(i, j, k);
                if v > 0 {
                    cells.push(serde_json::json!([i + 1, j + 1, k + 1, v]));
                }
            }
        }
    }
    let mut doc = serde_json::json!({ "r": r, "counts": cells });
    if let Some(l) = labels {
        doc["labels"] = serde_json::json!(l);
    }
    serde_json::to_string(&doc).expect("plain JSON values")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matrix() {
        let m = parse_matrix_csv("1,0\n0,1").unwrap();
        assert_eq!(m.counts.cells(), &[1, 0, 0, 1]);
        assert_eq!(m.labels, ["1", "2"]);
    }

    #[test]
    fn header_labels_kept() {
        let m = parse_matrix_csv("# classes: cat, dog\n3,1\n2,4\n\n").unwrap();
        assert_eq!(m.labels, ["cat", "dog"]);
        assert_eq!(m.counts.get(1, 0), 2);
        let again = parse_matrix_csv(&write_matrix_csv(&m.counts, Some(&m.labels))).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn ragged_rows_report_line() {
        assert_eq!(
            parse_matrix_csv("1,2\n3").unwrap_err(),
            ParseError::RaggedRows {
                line: 2,
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn bad_cells_report_location() {
        assert_eq!(
            parse_matrix_csv("1,2\n3,-4").unwrap_err(),
            ParseError::NegativeCell {
                line: 2,
                column: 2,
                text: "-4".into()
            }
        );
        assert!(matches!(
            parse_matrix_csv("1,2.5\n3,4").unwrap_err(),
            ParseError::NonInteger { line: 1, column: 2, .. }
        ));
        assert!(matches!(
            parse_matrix_csv("1,\n3,4").unwrap_err(),
            ParseError::NonInteger { line: 1, column: 2, .. }
        ));
    }

    #[test]
    fn empty_and_non_square() {
        assert_eq!(parse_matrix_csv("").unwrap_err(), ParseError::EmptyInput);
        assert_eq!(parse_matrix_csv("\n  \n").unwrap_err(), ParseError::EmptyInput);
        assert_eq!(
            parse_matrix_csv("1,2\n3,4\n5,6").unwrap_err(),
            ParseError::NotSquare { rows: 3, columns: 2 }
        );
        assert!(matches!(
            parse_matrix_csv("5").unwrap_err(),
            ParseError::Table(MccError::TooFewClasses { r: 1 })
        ));
    }

    #[test]
    fn header_must_match_size() {
        assert!(matches!(
            parse_matrix_csv("# classes: a,b,c\n1,2\n3,4").unwrap_err(),
            ParseError::BadHeader { line: 1, .. }
        ));
        assert!(matches!(
            parse_matrix_csv("# note\n1,2\n3,4").unwrap_err(),
            ParseError::BadHeader { line: 1, .. }
        ));
    }

    #[test]
    fn joint_symmetric_document() {
        let j = parse_joint_json(r#"{"r":2, "counts":[[1,1,1,5],[2,2,2,5]]}"#).unwrap();
        assert_eq!(j.counts.total(), 10);
        assert_eq!(j.counts.get(1, 1, 1), 5);
        assert_eq!(j.labels, ["1", "2"]);
    }

    #[test]
    fn joint_errors() {
        assert!(matches!(
            parse_joint_json(r#"{"r":2,"counts":[[1,1,1,5],[1,1,1,2]]}"#).unwrap_err(),
            ParseError::DuplicateCell { entry: 2, i: 1, j: 1, k: 1 }
        ));
        assert!(matches!(
            parse_joint_json(r#"{"r":2,"counts":[[1,3,1,5]]}"#).unwrap_err(),
            ParseError::IndexOutOfRange { entry: 1, position: 2, value: 3, r: 2 }
        ));
        assert!(matches!(
            parse_joint_json(r#"{"r":2,"counts":[[0,1,1,5]]}"#).unwrap_err(),
            ParseError::IndexOutOfRange { position: 1, value: 0, .. }
        ));
        assert!(matches!(
            parse_joint_json(r#"{"r":2,"counts":[[1,1,1,-5]]}"#).unwrap_err(),
            ParseError::NegativeCount { entry: 1, value: -5 }
        ));
        for bad in [
            "[1,2]",
            "{\"r\":2}",
            "{\"r\":2,\"counts\":[[1,1,1]]}",
            "{\"r\":2,\"counts\":[[1,1,1,2.5]]}",
            "{\"r\":2,\"counts\":[],\"extra\":1}",
            "{\"r\":2,\"labels\":[\"a\"],\"counts\":[]}",
            "{not json",
        ] {
            assert!(
                matches!(parse_joint_json(bad).unwrap_err(), ParseError::MalformedDocument { .. }),
                "{bad}"
            );
        }
        assert_eq!(parse_joint_json(" ").unwrap_err(), ParseError::EmptyInput);
    }

    #[test]
    fn joint_round_trip() {
        let mut c = JointCounts3::zeros(3).unwrap();
        c.set(0, 2, 1, 4);
        c.set(2, 2, 2, 9);
        let labels = vec!["a".to_string(), "b".into(), "c".into()];
        let back = parse_joint_json(&write_joint_json(&c, Some(&labels))).unwrap();
        assert_eq!(back.counts, c);
        assert_eq!(back.labels, labels);
    }
}
