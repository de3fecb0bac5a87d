//! Dataset file formats: JSON with explicit column lists and CSV with a
//! class-label column.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ClusteredDataset;

/// On-disk JSON form: inputs as a list of N columns, outputs as Q columns.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetFile {
    q: usize,
    class_sizes: Vec<usize>,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (i, col) in cols.iter().enumerate() {
        if col.len() != rows {
            return Err(Error::InvalidInput(format!(
                "column {i} has length {}, expected {rows}",
                col.len()
            )));
        }
        for (r, &v) in col.iter().enumerate() {
            m[(r, i)] = v;
        }
    }
    Ok(m)
}

fn matrix_to_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().cloned().collect()).collect()
}

/// Serializes a dataset to the JSON format.
pub fn dataset_to_json(d: &ClusteredDataset) -> Result<String> {
    let file = DatasetFile {
        q: d.dim_q(),
        class_sizes: d.class_sizes().to_vec(),
        inputs: matrix_to_columns(d.inputs()),
        outputs: matrix_to_columns(d.outputs()),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses a dataset from the JSON format.
pub fn dataset_from_json(text: &str) -> Result<ClusteredDataset> {
    let file: DatasetFile = serde_json::from_str(text)?;
    if file.class_sizes.len() != file.q {
        return Err(Error::InvalidInput(format!(
            "q = {} but {} class sizes given",
            file.q,
            file.class_sizes.len()
        )));
    }
    let inputs = columns_to_matrix(&file.inputs, file.q)?;
    let outputs = columns_to_matrix(&file.outputs, file.q)?;
    ClusteredDataset::new(file.class_sizes, inputs, outputs)
}

pub fn save_dataset(d: &ClusteredDataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_json(d)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<ClusteredDataset> {
    dataset_from_json(&std::fs::read_to_string(path)?)
}

/// Imports inputs from CSV rows `label,x_1,...,x_Q`. Rows are grouped into
/// contiguous class blocks by ascending label (appearance order within a
/// label is kept). Outputs default to the identity when not supplied.
pub fn load_dataset_csv(path: &Path, outputs: Option<DMatrix<f64>>) -> Result<ClusteredDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.is_empty() {
            continue;
        }
        let label: i64 = record[0]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad class label {:?}", &record[0])))?;
        let coords: std::result::Result<Vec<f64>, _> =
            record.iter().skip(1).map(|v| v.parse::<f64>()).collect();
        let coords =
            coords.map_err(|_| Error::InvalidInput("non-numeric coordinate in CSV".into()))?;
        rows.push((label, coords));
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("empty CSV dataset".into()));
    }
    let mut labels: Vec<i64> = rows.iter().map(|(l, _)| *l).collect();
    labels.sort_unstable();
    labels.dedup();
    let q = labels.len();
    let dim = rows[0].1.len();
    if dim != q {
        return Err(Error::InvalidInput(format!(
            "CSV has {q} classes but {dim}-dimensional inputs; the model needs equal dimensions"
        )));
    }
    let mut class_sizes = Vec::with_capacity(q);
    let mut inputs = DMatrix::zeros(q, rows.len());
    let mut col = 0;
    for &label in &labels {
        let mut count = 0;
        for (l, coords) in &rows {
            if *l != label {
                continue;
            }
            if coords.len() != dim {
                return Err(Error::InvalidInput("ragged CSV rows".into()));
            }
            for (r, &v) in coords.iter().enumerate() {
                inputs[(r, col)] = v;
            }
            col += 1;
            count += 1;
        }
        class_sizes.push(count);
    }
    let outputs = outputs.unwrap_or_else(|| DMatrix::identity(q, q));
    ClusteredDataset::new(class_sizes, inputs, outputs)
}
