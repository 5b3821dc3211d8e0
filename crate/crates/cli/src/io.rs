//! CSV and JSON files.

use std::fmt::Write as _;
use std::path::Path;

use qgpart::model_json::ModelDoc;
use qgpart::{MixtureModel, WeightMatrix};

use crate::CliError;

fn parse_number(field: &str, row: usize, col: usize) -> Result<f64, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("row {row}, column {col}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::usage(format!("row {row}, column {col}: '{field}' is not finite")));
    }
    Ok(v)
}

/// Reads one observation per row. Lines starting with `#` are skipped and a
/// first row that is not entirely numeric is taken as a header.
pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if i == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, f)| parse_number(f, i + 1, col + 1))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.in_file(path))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::usage(format!(
                    "{}: row {} has {} columns, expected {w}",
                    path.display(),
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        points.push(row);
    }
    if points.is_empty() {
        return Err(CliError::usage(format!("{}: no observations", path.display())));
    }
    Ok(points)
}

/// Loads a model document, or the `model` member of a `fit` report.
pub fn read_model(path: &Path) -> Result<MixtureModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("model") {
        value = inner.take();
    }
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    doc.to_model().map_err(|e| CliError::from(e).in_file(path))
}

pub fn read_models(paths: &[impl AsRef<Path>]) -> Result<Vec<MixtureModel>, CliError> {
    if paths.is_empty() {
        return Err(CliError::usage("--model: at least one model is required"));
    }
    paths.iter().map(|p| read_model(p.as_ref())).collect()
}

pub fn read_weights(path: Option<&Path>, n: usize) -> Result<WeightMatrix, CliError> {
    match path {
        None => Ok(WeightMatrix::unit(n)?),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let w = WeightMatrix::from_json(&text).map_err(|e| CliError::from(e).in_file(p))?;
            if w.n_hypotheses() != n {
                return Err(CliError::usage(format!(
                    "{}: weight matrix is {k}x{k} but {n} models were given",
                    p.display(),
                    k = w.n_hypotheses()
                )));
            }
            Ok(w)
        }
    }
}

/// CSV text: a `#` comment per entry of `comments`, a header row, then rows.
pub fn csv_table(comments: &[String], header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn coordinate_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::usage(format!("stdout: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn header_and_comments_are_skipped() {
        let (_d, p) = write("# made by hand\nx,y\n1.5,2e-3\n-4,.5\n");
        assert_eq!(read_points(&p).unwrap(), vec![vec![1.5, 2e-3], vec![-4.0, 0.5]]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        for bad in ["1,NaN\n", "1,inf\n", "1,-Infinity\n"] {
            let (_d, p) = write(&format!("1,2\n{bad}"));
            let err = read_points(&p).unwrap_err();
            assert!(err.to_string().contains("row 2, column 2"), "{err}");
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let (_d, p) = write("1,2\n3\n");
        assert!(read_points(&p).is_err());
    }
}
