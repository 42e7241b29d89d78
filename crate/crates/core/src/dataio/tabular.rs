//! Generic JSON tabular ingestion.
//!
//! ```json
//! { "field_names": ["bytes", "duration"],
//!   "rows": [ { "label": "streaming", "values": [1200.0, 3.5] } ] }
//! ```
//!
//! Labels are mapped to dense ids in order of first appearance and every
//! feature is min-max scaled into `[0, 1]`.

use std::path::Path;

use serde::Deserialize;

use super::{Dataset, Modality};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct TabularFile {
    field_names: Vec<String>,
    rows: Vec<TabularRow>,
}

#[derive(Deserialize)]
struct TabularRow {
    label: String,
    values: Vec<f64>,
}

pub fn parse_tabular_json(text: &str) -> Result<Dataset> {
    let file: TabularFile = serde_json::from_str(text)?;
    let dim = file.field_names.len();
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(file.rows.len());
    let mut samples = Vec::with_capacity(file.rows.len() * dim);
    for (i, row) in file.rows.iter().enumerate() {
        if row.values.len() != dim {
            return Err(Error::invalid(format!(
                "row {i} has {} values, expected {dim}",
                row.values.len()
            )));
        }
        let id = match names.iter().position(|n| n == &row.label) {
            Some(id) => id,
            None => {
                names.push(row.label.clone());
                names.len() - 1
            }
        };
        labels.push(id);
        samples.extend(row.values.iter().map(|&v| v as f32));
    }
    let ds = Dataset::new(
        samples,
        dim,
        labels,
        names,
        Modality::Tabular {
            field_names: file.field_names,
        },
    )?;
    Ok(ds.rescaled_unit())
}

pub fn load_tabular_json(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_tabular_json(&std::fs::read_to_string(path)?)
}
