//! Headered CSV loading with per-column min-max scaling.

use std::path::Path;

use nn_core::Matrix;

use crate::{DataError, Dataset};

/// Loads a headered CSV file, treating `label_column` as the integer class
/// label and every other column as a numeric feature.
///
/// Feature columns are min-max scaled to `[0, 1]`; a constant column maps to
/// all zeros. The class count is the highest label plus one.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset, DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::Format {
            path: path.display().to_string(),
            detail: format!("label column '{label_column}' not found in header"),
        })?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len().saturating_sub(1));
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                let label: usize = cell.trim().parse().map_err(|_| DataError::Format {
                    path: path.display().to_string(),
                    detail: format!(
                        "row {}, column '{}': label '{cell}' is not a non-negative integer",
                        row_no + 2,
                        headers.get(col).unwrap_or("?")
                    ),
                })?;
                labels.push(label);
            } else {
                let value: f64 = cell.trim().parse().map_err(|_| DataError::Format {
                    path: path.display().to_string(),
                    detail: format!(
                        "row {}, column '{}': cell '{cell}' is not numeric",
                        row_no + 2,
                        headers.get(col).unwrap_or("?")
                    ),
                })?;
                if !value.is_finite() {
                    return Err(DataError::Format {
                        path: path.display().to_string(),
                        detail: format!("row {}, column {col}: non-finite value", row_no + 2),
                    });
                }
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }

    let cols = rows[0].len();
    let mut mins = vec![f64::INFINITY; cols];
    let mut maxs = vec![f64::NEG_INFINITY; cols];
    for row in &rows {
        for (c, &v) in row.iter().enumerate() {
            mins[c] = mins[c].min(v);
            maxs[c] = maxs[c].max(v);
        }
    }
    for row in &mut rows {
        for (c, v) in row.iter_mut().enumerate() {
            let range = maxs[c] - mins[c];
            *v = if range > 0.0 { (*v - mins[c]) / range } else { 0.0 };
        }
    }

    let class_count = labels.iter().max().copied().unwrap_or(0) + 1;
    let features = Matrix::from_rows(&rows)?;
    Dataset::new(features, labels, class_count)
}
