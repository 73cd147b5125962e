//! Row-oriented datasets and their CSV interchange format.
//!
//! CSV layout: optional `row_id` column, then `x1,...,xd`, then optional
//! `y` and `w` columns. Floats are written in shortest round-trip form so
//! a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Observations for one domain: features, labels and positive weights.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    /// Labels in {0,1} for classification; arbitrary reals on the
    /// Gaussian path.
    pub y: Array1<f64>,
    pub w: Array1<f64>,
    /// Row identifiers; used to join externally supplied probabilities.
    pub ids: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let n = x.nrows();
        Self::with_weights(x, y, Array1::ones(n))
    }

    pub fn with_weights(x: Array2<f64>, y: Array1<f64>, w: Array1<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                context: "labels vs rows".into(),
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if w.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                context: "weights vs rows".into(),
                expected: x.nrows(),
                got: w.len(),
            });
        }
        if let Some(bad) = w.iter().find(|&&wi| !(wi > 0.0) || !wi.is_finite()) {
            return Err(Error::Data(format!("weights must be positive, got {bad}")));
        }
        Ok(Dataset { x, y, w, ids: None })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Errors unless every label is exactly 0 or 1.
    pub fn require_binary_labels(&self) -> Result<()> {
        match self.y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            Some(bad) => Err(Error::Data(format!(
                "labels must be in {{0,1}} for classification fits, got {bad}"
            ))),
            None => Ok(()),
        }
    }

    /// Id of row i: the stored id, or the 0-based index as text.
    pub fn row_id(&self, i: usize) -> String {
        match &self.ids {
            Some(ids) => ids[i].clone(),
            None => i.to_string(),
        }
    }

    /// Subset by row indices, keeping weights and ids aligned.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let d = self.dim();
        let mut x = Array2::zeros((rows.len(), d));
        let mut y = Array1::zeros(rows.len());
        let mut w = Array1::zeros(rows.len());
        for (k, &i) in rows.iter().enumerate() {
            x.row_mut(k).assign(&self.x.row(i));
            y[k] = self.y[i];
            w[k] = self.w[i];
        }
        let ids = self
            .ids
            .as_ref()
            .map(|ids| rows.iter().map(|&i| ids[i].clone()).collect());
        Dataset { x, y, w, ids }
    }
}

/// Shortest f64 text that parses back to the identical bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes `x1,...,xd,y[,w]` with an optional leading `row_id` column.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = Vec::new();
    let d = data.dim();
    let weighted = data.w.iter().any(|&wi| wi != 1.0);
    let mut header: Vec<String> = Vec::new();
    if data.ids.is_some() {
        header.push("row_id".into());
    }
    header.extend((1..=d).map(|j| format!("x{j}")));
    header.push("y".into());
    if weighted {
        header.push("w".into());
    }
    writeln!(out, "{}", header.join(",")).expect("vec write");
    for i in 0..data.n() {
        let mut fields: Vec<String> = Vec::with_capacity(d + 3);
        if let Some(ids) = &data.ids {
            fields.push(ids[i].clone());
        }
        fields.extend(data.x.row(i).iter().map(|&v| fmt_f64(v)));
        fields.push(fmt_f64(data.y[i]));
        if weighted {
            fields.push(fmt_f64(data.w[i]));
        }
        writeln!(out, "{}", fields.join(",")).expect("vec write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads the dataset CSV layout. `y` and `w` columns are optional; rows
/// without labels get y = 0 (prediction-only use).
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path.display().to_string(), e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let id_col = headers.iter().position(|h| h == "row_id");
    let y_col = headers.iter().position(|h| h == "y");
    let w_col = headers.iter().position(|h| h == "w");
    let x_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| {
            Some(*i) != id_col && Some(*i) != y_col && Some(*i) != w_col && h.starts_with('x')
        })
        .map(|(i, _)| i)
        .collect();
    if x_cols.is_empty() {
        return Err(Error::Data(format!(
            "{}: no feature columns (expected x1..xd)",
            path.display()
        )));
    }

    let parse = |field: &str, row: usize, col: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| {
            Error::Data(format!(
                "{}: row {}: column {col}: not a number: {field:?}",
                path.display(),
                row + 1
            ))
        })
    };

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    let mut n = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path.display().to_string(), e))?;
        for &c in &x_cols {
            xs.push(parse(&record[c], row_idx, &headers[c])?);
        }
        ys.push(match y_col {
            Some(c) => parse(&record[c], row_idx, "y")?,
            None => 0.0,
        });
        ws.push(match w_col {
            Some(c) => parse(&record[c], row_idx, "w")?,
            None => 1.0,
        });
        if let Some(c) = id_col {
            ids.push(record[c].trim().to_string());
        }
        n += 1;
    }

    let x = Array2::from_shape_vec((n, x_cols.len()), xs)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut data = Dataset::with_weights(x, Array1::from(ys), Array1::from(ws))?;
    if id_col.is_some() {
        data.ids = Some(ids);
    }
    Ok(data)
}

/// Reads `row_id,probability` into an ordered map; probabilities must lie
/// in [0,1].
pub fn read_probability_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::csv(path.display().to_string(), e))?
        .clone();
    let id_col = headers.iter().position(|h| h.trim() == "row_id");
    let p_col = headers.iter().position(|h| h.trim() == "probability");
    let (id_col, p_col) = match (id_col, p_col) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Data(format!(
                "{}: expected header columns row_id,probability",
                path.display()
            )))
        }
    };
    let mut map = BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path.display().to_string(), e))?;
        let id = record[id_col].trim().to_string();
        let p: f64 = record[p_col].trim().parse().map_err(|_| {
            Error::Data(format!(
                "{}: row {}: probability not a number: {:?}",
                path.display(),
                row_idx + 1,
                &record[p_col]
            ))
        })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Data(format!(
                "{}: row {}: probability {p} outside [0,1]",
                path.display(),
                row_idx + 1
            )));
        }
        map.insert(id, p);
    }
    Ok(map)
}
