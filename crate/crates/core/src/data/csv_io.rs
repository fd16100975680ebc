use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::Scalar;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_label(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => match s.parse::<f64>() {
            Ok(v) if v == 1.0 => Some(true),
            Ok(v) if v == 0.0 => Some(false),
            _ => None,
        },
    }
}

/// Reads a comma-separated numeric table.
///
/// The first row is taken as a header when any of its cells is not a number.
/// With `label_column`, that column is parsed as 0/1 and removed from `x`.
pub fn load_csv<T: Scalar>(path: &Path, label_column: Option<&str>) -> Result<LabeledDataset<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Ok(LabeledDataset::new(Array2::zeros((0, 0)))),
    };
    let is_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let width = first.len();
    let names: Vec<String> = if is_header {
        first.iter().map(str::to_owned).collect()
    } else {
        (0..width).map(|j| format!("f{j}")).collect()
    };
    let label_idx = match label_column {
        Some(name) => Some(
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.to_owned()))?,
        ),
        None => None,
    };

    let mut values: Vec<T> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    let mut rows = 0usize;
    let pending = if is_header { None } else { Some(Ok(first)) };
    for rec in pending.into_iter().chain(records) {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(rows + 1);
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_idx {
                let lab = parse_label(cell).ok_or_else(|| {
                    Error::Labels(format!("row {line}: label {cell:?} is not 0/1"))
                })?;
                labels.push(lab);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: line,
                    column: names[j].clone(),
                    value: cell.to_owned(),
                })?;
                values.push(T::of(v));
            }
        }
        rows += 1;
    }

    let cols = width - usize::from(label_idx.is_some());
    let x = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::shape(format!("ragged CSV: {e}")))?;
    let mut data = LabeledDataset::new(x);
    if label_idx.is_some() {
        data = data.with_labels(labels)?;
    }
    Ok(data)
}

/// Writes `f0..f{D-1}` plus a `label` column when labels are present.
pub fn save_csv<T: Scalar>(data: &LabeledDataset<T>, path: &Path) -> Result<()> {
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for (i, row) in data.x.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = &data.labels {
            rec.push(if l[i] { "1" } else { "0" }.into());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes a bare matrix with an `f0..` header.
pub fn save_matrix_csv<T: Scalar>(m: ArrayView2<T>, path: &Path) -> Result<()> {
    let mut out = File::create(path).map_err(io_err(path))?;
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("f{j}")).collect();
    let mut buf = header.join(",");
    buf.push('\n');
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        buf.push_str(&cells.join(","));
        buf.push('\n');
    }
    out.write_all(buf.as_bytes()).map_err(io_err(path))?;
    Ok(())
}
