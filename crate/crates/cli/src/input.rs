use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ortho_core::io::parse_matrix;
use ortho_core::{Error, Result, Subspace};

/// Reads a flag value that is either a path to an existing file or inline text.
fn read_source(value: &str) -> Result<String> {
    let path = Path::new(value);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{value}: {e}")))
    } else {
        Ok(value.to_string())
    }
}

pub fn matrix(value: &str) -> Result<DMatrix<f64>> {
    parse_matrix(&read_source(value)?)
}

/// A vector given as one row or one column.
pub fn vector(value: &str) -> Result<DVector<f64>> {
    let m = matrix(value)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(Error::Parse(format!("expected a vector, got a {}x{} matrix", m.nrows(), m.ncols())));
    }
    Ok(DVector::from_iterator(m.len(), m.iter().copied()))
}

/// A subspace given as a JSON subspace object (`{"N", "k", "basis"}`) or as
/// a matrix whose rows span it.
pub fn subspace(value: &str) -> Result<Subspace> {
    let text = read_source(value)?;
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()));
    }
    let rows = parse_matrix(&text)?;
    Subspace::span_of_columns(&rows.transpose(), None)
}

pub fn require_dim(what: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::DimensionMismatch(format!("{what} has dimension {got}, expected {n}")));
    }
    Ok(())
}
