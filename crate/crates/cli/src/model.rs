//! Model files: `{"domain", "A", "B", "C", "D", "name"?, "metadata"?}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use socpos::lti::StateSpace;
use socpos::{Domain, Matrix};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub domain: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Value>,
}

/// A parsed model and its optional label.
#[derive(Debug, Clone)]
pub struct Model {
    pub system: StateSpace,
    pub name: Option<String>,
    pub metadata: Option<Value>,
}

fn parse_error(path: &str, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_string(),
        msg: msg.into(),
    }
}

/// Row-major rows into a matrix; `cols` fills in the width of an empty one.
fn to_matrix(path: &str, name: &str, rows: &[Vec<f64>], cols: Option<usize>) -> Result<Matrix, CliError> {
    let width = match rows.first() {
        Some(r) => r.len(),
        None => cols.unwrap_or(0),
    };
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(parse_error(
                path,
                format!("{name} row {i} has {} entries, expected {width}", row.len()),
            ));
        }
    }
    Ok(Matrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

fn shape_check(path: &str, name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<(), CliError> {
    if m.shape() != (rows, cols) {
        return Err(parse_error(
            path,
            format!("{name} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub fn parse_model(path: &str, text: &str) -> Result<Model, CliError> {
    let doc: ModelFile = serde_json::from_str(text)
        .map_err(|e| parse_error(path, e.to_string()))?;
    let domain = match doc.domain.as_str() {
        "continuous" => Domain::Continuous,
        "discrete" => Domain::Discrete,
        other => return Err(parse_error(path, format!("domain must be \"continuous\" or \"discrete\", got {other:?}"))),
    };
    let d = to_matrix(path, "D", &doc.d, None)?;
    let a = to_matrix(path, "A", &doc.a, Some(0))?;
    let n = a.nrows();
    shape_check(path, "A", &a, n, n)?;
    let b = to_matrix(path, "B", &doc.b, Some(d.ncols()))?;
    let m = b.ncols();
    shape_check(path, "B", &b, n, m)?;
    let c = to_matrix(path, "C", &doc.c, Some(n))?;
    let p = c.nrows();
    shape_check(path, "C", &c, p, n)?;
    shape_check(path, "D", &d, p, m)?;
    let system = StateSpace::new(a, b, c, d, domain).map_err(|e| parse_error(path, e.to_string()))?;
    Ok(Model {
        system,
        name: doc.name,
        metadata: doc.metadata,
    })
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn domain_str(d: Domain) -> &'static str {
    match d {
        Domain::Continuous => "continuous",
        Domain::Discrete => "discrete",
    }
}

pub fn to_file(sys: &StateSpace, name: Option<String>, metadata: Option<Value>) -> ModelFile {
    ModelFile {
        domain: domain_str(sys.domain()).to_string(),
        a: rows(sys.a()),
        b: rows(sys.b()),
        c: rows(sys.c()),
        d: rows(sys.d()),
        name,
        metadata,
    }
}

pub fn model_json(sys: &StateSpace, name: Option<String>, metadata: Option<Value>) -> Value {
    serde_json::to_value(to_file(sys, name, metadata)).expect("model files serialize")
}
