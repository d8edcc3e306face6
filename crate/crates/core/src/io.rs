//! Matrix text formats and JSON helpers shared by reports.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Parses a matrix written one row per line with whitespace-separated
/// entries, or an inline JSON array of rows (or a flat JSON array, read as a
/// single row). Blank lines and `#` comments are ignored.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        return parse_json_matrix(trimmed);
    }
    let rows: Vec<Vec<f64>> = trimmed
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    rows_to_matrix(rows)
}

fn parse_json_matrix(text: &str) -> Result<DMatrix<f64>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let arr = value
        .as_array()
        .ok_or_else(|| Error::Parse("expected a JSON array".into()))?;
    let to_f64 = |v: &serde_json::Value| {
        v.as_f64().ok_or_else(|| Error::Parse(format!("not a number: {v}")))
    };
    let rows: Vec<Vec<f64>> = if arr.iter().all(|v| v.is_array()) {
        arr.iter()
            .map(|r| r.as_array().unwrap().iter().map(to_f64).collect())
            .collect::<Result<_>>()?
    } else {
        vec![arr.iter().map(to_f64).collect::<Result<_>>()?]
    };
    rows_to_matrix(rows)
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Parse("non-finite matrix entry".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(flat.len() / ncols, ncols, &flat))
}

/// Text form: one row per line, entries separated by single spaces.
pub fn matrix_to_text(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub(crate) fn serialize_dvector<S: Serializer>(
    v: &DVector<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_text_and_json() {
        let a = parse_matrix("1 2\n3 4  # comment\n\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(parse_matrix("[[1,2],[3,4]]").unwrap(), a);
        assert_eq!(parse_matrix("[1, 0, -1]").unwrap().shape(), (1, 3));
        assert!(parse_matrix("1 2\n3").is_err());
        assert!(parse_matrix("1 x").is_err());
        assert!(parse_matrix("").is_err());
    }

    #[test]
    fn text_round_trip() {
        let a = DMatrix::from_row_slice(2, 3, &[0.1, -2.5, 3.0, 1e-17, 7.0, -0.0]);
        assert_eq!(parse_matrix(&matrix_to_text(&a)).unwrap(), a);
    }
}
