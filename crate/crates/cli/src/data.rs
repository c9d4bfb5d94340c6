use std::path::Path;

use mbqr_core::mbqr::Dataset;
use nalgebra::DMatrix;

use crate::error::{CliError, Result};

/// Which CSV columns play which role.
#[derive(Debug, Clone)]
pub struct ColumnRoles<'a> {
    pub response: &'a str,
    pub exposure: Option<&'a str>,
    pub id: Option<&'a str>,
    /// `None` means every column not claimed by another role.
    pub covariates: Option<&'a [String]>,
}

#[derive(Debug)]
pub struct Loaded {
    pub data: Dataset,
    pub covariate_names: Vec<String>,
}

pub fn load(path: &Path, roles: &ColumnRoles) -> Result<Loaded> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Data(format!(
            "{}: file is empty (no header row)",
            path.display()
        )));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: missing column '{name}'", path.display())))
    };
    let y_col = find(roles.response)?;
    let e_col = roles.exposure.map(find).transpose()?;
    let id_col = match roles.id {
        Some(name) if headers.iter().any(|h| h == name) => Some(find(name)?),
        _ => None,
    };
    let covariate_names: Vec<String> = match roles.covariates {
        Some(names) => names.to_vec(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != y_col && Some(*i) != e_col && Some(*i) != id_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let x_cols = covariate_names
        .iter()
        .map(|n| find(n))
        .collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut x: Vec<Vec<f64>> = Vec::new();
    let mut exposure = Vec::new();
    let mut ids = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| record.get(col).unwrap_or("");
        let raw_y = field(y_col);
        let count = raw_y.parse::<u64>().map_err(|_| {
            CliError::Data(format!(
                "{}: line {line}: count '{raw_y}' in column '{}' is not a nonnegative integer",
                path.display(),
                roles.response
            ))
        })?;
        y.push(count);
        let mut row = Vec::with_capacity(x_cols.len());
        for (&col, name) in x_cols.iter().zip(&covariate_names) {
            let raw = field(col);
            let v = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "{}: line {line}: covariate '{name}' value '{raw}' is not a finite number",
                        path.display()
                    ))
                })?;
            row.push(v);
        }
        x.push(row);
        if let Some(col) = e_col {
            let raw = field(col);
            let v = raw
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "{}: line {line}: exposure '{raw}' must be a positive number",
                        path.display()
                    ))
                })?;
            exposure.push(v);
        }
        if let Some(col) = id_col {
            ids.push(field(col).to_string());
        }
    }
    if y.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let n = y.len();
    let matrix = DMatrix::from_fn(n, x_cols.len(), |i, j| x[i][j]);
    let mut data = Dataset::new(matrix, y, e_col.map(|_| exposure))?;
    if id_col.is_some() {
        data = data.with_area_ids(ids)?;
    }
    Ok(Loaded {
        data,
        covariate_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn roles<'a>() -> ColumnRoles<'a> {
        ColumnRoles {
            response: "y",
            exposure: None,
            id: None,
            covariates: None,
        }
    }

    #[test]
    fn loads_all_other_columns_as_covariates() {
        let f = write("x,y,z\n1.5,3,0.2\n2.0,0,0.1\n");
        let l = load(f.path(), &roles()).unwrap();
        assert_eq!(l.covariate_names, vec!["x", "z"]);
        assert_eq!(l.data.y, vec![3, 0]);
        assert_eq!(l.data.x[(1, 1)], 0.1);
    }

    #[test]
    fn reports_line_of_bad_count() {
        let f = write("x,y\n1.0,2\n2.0,2.5\n");
        let err = load(f.path(), &roles()).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("2.5"), "{err}");
    }

    #[test]
    fn missing_column_and_empty_file() {
        let f = write("x,count\n1,2\n");
        assert!(load(f.path(), &roles())
            .unwrap_err()
            .to_string()
            .contains("missing column 'y'"));
        let f = write("");
        assert!(matches!(load(f.path(), &roles()), Err(CliError::Data(_))));
        let f = write("x,y\n");
        assert!(load(f.path(), &roles())
            .unwrap_err()
            .to_string()
            .contains("no data rows"));
    }

    #[test]
    fn rejects_nonpositive_exposure() {
        let f = write("y,E\n1,0\n");
        let r = ColumnRoles {
            exposure: Some("E"),
            ..roles()
        };
        assert!(load(f.path(), &r)
            .unwrap_err()
            .to_string()
            .contains("exposure"));
    }
}
