//! Deterministic machine-readable outputs: JSON documents with floats at 17
//! significant digits, CSV matrices, and readers for the files `predict`
//! consumes.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use penreg::{Error, GridResult, ParameterValues, Result};

/// JSON value with insertion-ordered object keys, so a document's byte layout
/// is a pure function of the data that went into it.
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(&'static str, Json)>),
}

/// 17 significant digits round-trip any f64 exactly.
pub fn float_repr(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn escape_str(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

impl Json {
    pub fn floats<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> Json {
        Json::Array(values.into_iter().map(|v| Json::Float(*v)).collect())
    }

    pub fn opt_float(v: Option<f64>) -> Json {
        match v {
            Some(v) => Json::Float(v),
            None => Json::Null,
        }
    }

    pub fn opt_int(v: Option<usize>) -> Json {
        match v {
            Some(v) => Json::Int(v as i64),
            None => Json::Null,
        }
    }

    pub fn strs<I: IntoIterator<Item = S>, S: AsRef<str>>(values: I) -> Json {
        Json::Array(
            values
                .into_iter()
                .map(|s| Json::Str(s.as_ref().to_string()))
                .collect(),
        )
    }

    fn render(&self, out: &mut String, level: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::UInt(u) => out.push_str(&u.to_string()),
            Json::Float(v) => out.push_str(&float_repr(*v)),
            Json::Str(s) => escape_str(s, out),
            Json::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.render(out, level);
                }
                out.push(']');
            }
            Json::Object(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{\n");
                let pad = "  ".repeat(level + 1);
                for (i, (key, value)) in fields.iter().enumerate() {
                    out.push_str(&pad);
                    escape_str(key, out);
                    out.push_str(": ");
                    value.render(out, level + 1);
                    if i + 1 < fields.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&"  ".repeat(level));
                out.push('}');
            }
        }
    }

    pub fn to_string_pretty(&self) -> String {
        let mut out = String::new();
        self.render(&mut out, 0);
        out.push('\n');
        out
    }
}

pub fn write_json(path: &Path, doc: &Json) -> Result<()> {
    fs::write(path, doc.to_string_pretty()).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// One row per grid model, one column per fold, header `fold_1..fold_k`.
pub fn write_error_matrix_csv(path: &Path, values: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (1..=values.ncols()).map(|j| format!("fold_{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in values.rows() {
        let cells: Vec<String> = row.iter().map(|v| float_repr(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// One column per coefficient set, one row per observation.
pub fn write_predictions_csv(path: &Path, predictions: &[Array1<f64>]) -> Result<()> {
    let header: Vec<String> = (0..predictions.len())
        .map(|j| format!("model_{j}"))
        .collect();
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    let nrows = predictions.first().map_or(0, |p| p.len());
    for i in 0..nrows {
        let cells: Vec<String> = predictions.iter().map(|p| float_repr(p[i])).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn parameters_json(values: &ParameterValues) -> Json {
    Json::Object(vec![
        ("lambda1", Json::Float(values.lambda1)),
        ("alpha", Json::opt_float(values.alpha)),
        (
            "lasso_weights",
            match &values.lasso_weights {
                Some(w) => Json::floats(w.iter()),
                None => Json::Null,
            },
        ),
        (
            "gl_weights",
            match &values.gl_weights {
                Some(w) => Json::floats(w.iter()),
                None => Json::Null,
            },
        ),
    ])
}

pub fn grid_json(grid: &penreg::ParameterGrid) -> Json {
    let weight_axis = |axis: &Option<Vec<Array1<f64>>>| match axis {
        Some(vectors) => Json::Array(vectors.iter().map(|w| Json::floats(w.iter())).collect()),
        None => Json::Null,
    };
    Json::Object(vec![
        ("lambda1", Json::floats(grid.lambda1.iter())),
        (
            "alpha",
            match &grid.alpha {
                Some(a) => Json::floats(a.iter()),
                None => Json::Null,
            },
        ),
        ("lasso_weights", weight_axis(&grid.lasso_weights)),
        ("gl_weights", weight_axis(&grid.gl_weights)),
    ])
}

/// Per-model entries of a solved grid: parameters, coefficients, diagnostics.
pub fn coefficients_json(result: &GridResult) -> Result<Json> {
    let mut entries = Vec::with_capacity(result.len());
    for (index, coefs) in result.coefficients.iter().enumerate() {
        let params = result.parameters_at(index)?;
        entries.push(Json::Object(vec![
            ("index", Json::Int(index as i64)),
            ("parameters", parameters_json(&params)),
            ("intercept", Json::opt_float(coefs.intercept)),
            ("beta", Json::floats(coefs.beta.iter())),
            ("objective", Json::Float(coefs.objective)),
            ("iterations", Json::Int(coefs.iterations as i64)),
            ("converged", Json::Bool(coefs.converged)),
        ]));
    }
    Ok(Json::Array(entries))
}

/// Coefficient sets recovered from a `fit` or `tvt` output document.
pub struct SavedCoefficients {
    pub predictors: Vec<String>,
    pub sets: Vec<(Option<f64>, Array1<f64>)>,
}

fn json_read_error(path: &Path, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row: 0,
        column: "json".to_string(),
        value: detail.into(),
    }
}

fn number_field(value: &serde_json::Value) -> Option<f64> {
    value.as_f64()
}

fn float_array(value: &serde_json::Value) -> Option<Array1<f64>> {
    let items = value.as_array()?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        out.push(item.as_f64()?);
    }
    Some(Array1::from_vec(out))
}

/// Reads coefficients back from a `fit` document (a `coefficients` array) or
/// a `tvt` document (a single intercept-first `optimal_betas` vector).
pub fn read_coefficients(path: &Path) -> Result<SavedCoefficients> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| json_read_error(path, format!("invalid JSON: {e}")))?;
    let predictors = doc
        .get("predictors")
        .and_then(|v| v.as_array())
        .ok_or_else(|| json_read_error(path, "missing predictors array"))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| json_read_error(path, "predictors must be strings"))
        })
        .collect::<Result<Vec<String>>>()?;

    let mut sets = Vec::new();
    if let Some(entries) = doc.get("coefficients").and_then(|v| v.as_array()) {
        for entry in entries {
            let intercept = entry.get("intercept").and_then(number_field);
            let beta = entry
                .get("beta")
                .and_then(float_array)
                .ok_or_else(|| json_read_error(path, "coefficient entry without beta array"))?;
            sets.push((intercept, beta));
        }
    } else if let Some(betas) = doc.get("optimal_betas").and_then(float_array) {
        let with_intercept = doc
            .pointer("/config/intercept")
            .and_then(|v| v.as_bool())
            .unwrap_or(true);
        if with_intercept {
            if betas.is_empty() {
                return Err(json_read_error(path, "optimal_betas is empty"));
            }
            sets.push((Some(betas[0]), betas.slice(ndarray::s![1..]).to_owned()));
        } else {
            sets.push((None, betas));
        }
    } else {
        return Err(json_read_error(
            path,
            "no coefficients array or optimal_betas vector found",
        ));
    }
    if sets.iter().any(|(_, beta)| beta.len() != predictors.len()) {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vectors in {} do not match the {} recorded predictors",
            path.display(),
            predictors.len()
        )));
    }
    Ok(SavedCoefficients { predictors, sets })
}

pub fn read_headers(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: Box::new(e),
    })?;
    let headers = reader.headers().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: Box::new(e),
    })?;
    Ok(headers.iter().map(str::to_string).collect())
}

/// Reads the named columns of a CSV file into a matrix, in the given order.
pub fn read_matrix_by_columns(path: &Path, columns: &[String]) -> Result<Array2<f64>> {
    let headers = read_headers(path)?;
    let mut positions = Vec::with_capacity(columns.len());
    for name in columns {
        let pos = headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "column {:?} required by the coefficient file is missing from {}",
                name,
                path.display()
            ))
        })?;
        positions.push(pos);
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: Box::new(e),
    })?;
    let mut rows: Vec<f64> = Vec::new();
    let mut nrows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        for (&pos, name) in positions.iter().zip(columns) {
            let cell = record.get(pos).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            rows.push(value);
        }
        nrows += 1;
    }
    Array2::from_shape_vec((nrows, columns.len()), rows)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}
