//! Input resolution: tolerance precedence, arrow expressions, base points,
//! name=value bindings and 2-arrow block files.

use crate::report::{validation, CliError, CliResult};
use fibrecat::dsl::{run_expression, DslError, SolutionTable};
use fibrecat::homcalc::TwoArrow;
use fibrecat::model::{Arrow, CategoryPresentation, FibreKey, ObjectId};
use fibrecat::numerics::{CMatrix, Cx};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

type Cat = CategoryPresentation<f64>;
type Op = TwoArrow<f64>;
type Arr = Arrow<f64>;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Flag wins over the FIBRECAT_TOL environment variable, which wins over
/// the built-in default.
pub fn resolve_tolerance(flag: Option<f64>) -> CliResult<f64> {
    let t = match flag {
        Some(t) => t,
        None => match std::env::var("FIBRECAT_TOL") {
            Ok(text) => text.parse::<f64>().map_err(|_| {
                CliError::Validation(format!("FIBRECAT_TOL is not a number: '{text}'"))
            })?,
            Err(_) => DEFAULT_TOL,
        },
    };
    if !(t.is_finite() && t > 0.0) {
        return Err(CliError::Validation(format!(
            "tolerance must be a positive finite number, got {t}"
        )));
    }
    Ok(t)
}

/// An arrow expression is parsed as the argument of id(...); shift reported
/// positions back so columns refer to the expression as typed.
fn shift_positions(e: DslError, offset: usize) -> DslError {
    let fix = |mut p: fibrecat::dsl::Position| {
        if p.line == 1 {
            p.column = p.column.saturating_sub(offset);
        }
        p
    };
    match e {
        DslError::Parse {
            position,
            found,
            expected,
        } => DslError::Parse {
            position: fix(position),
            found,
            expected,
        },
        DslError::UnboundName { name, position } => DslError::UnboundName {
            name,
            position: fix(position),
        },
        DslError::TypeMismatch {
            context,
            position,
            left,
            right,
        } => DslError::TypeMismatch {
            context,
            position: fix(position),
            left,
            right,
        },
        other => other,
    }
}

pub fn arrow_from_text(cat: &Cat, text: &str) -> CliResult<Arr> {
    let wrapped = format!("id({text})");
    let mut table = SolutionTable::new();
    let id = run_expression(cat, &wrapped, &BTreeMap::new(), &mut table)
        .map_err(|e| validation(format!("arrow expression '{text}': {}", shift_positions(e, 3))))?;
    Ok(id.source().clone())
}

/// A base point given either by its label or by its index.
pub fn point_index(cat: &Cat, object: ObjectId, token: &str) -> CliResult<usize> {
    let decl = cat.object(object);
    if let Some(idx) = decl.base.iter().position(|l| l == token) {
        return Ok(idx);
    }
    if let Ok(idx) = token.parse::<usize>() {
        if idx < decl.base.len() {
            return Ok(idx);
        }
    }
    Err(CliError::Validation(format!(
        "object '{}' has no base point '{token}'",
        decl.name
    )))
}

pub fn point_label(cat: &Cat, object: ObjectId, idx: usize) -> String {
    cat.object(object).base[idx].clone()
}

/// Split repeated `--bind NAME=VALUE` flags into a map.
pub fn parse_bindings(binds: &[String]) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for raw in binds {
        let (name, value) = raw.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("binding '{raw}' is not of the form NAME=VALUE"))
        })?;
        if out.insert(name.trim().to_string(), value.to_string()).is_some() {
            return Err(CliError::Validation(format!("binding '{name}' given twice")));
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RawTwoArrow {
    source: String,
    target: String,
    blocks: Vec<RawBlock>,
}

#[derive(Deserialize)]
struct RawBlock {
    target_point: usize,
    source_point: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

/// Load a 2-arrow from a JSON block file. `source` and `target` are arrow
/// expressions; each block carries the matrix at one (target point, source
/// point) pair as rows of [re, im] entries. Shapes and equivariance are
/// validated against the presentation.
pub fn two_arrow_from_file(cat: &Cat, path: &Path) -> CliResult<Op> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(format!("cannot read '{}': {e}", path.display())))?;
    let raw: RawTwoArrow = serde_json::from_str(&text)
        .map_err(|e| validation(format!("'{}': {e}", path.display())))?;
    let source = arrow_from_text(cat, &raw.source)?;
    let target = arrow_from_text(cat, &raw.target)?;
    let mut blocks = BTreeMap::new();
    for b in &raw.blocks {
        let rows = b.matrix.len();
        let cols = b.matrix.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || b.matrix.iter().any(|r| r.len() != cols) {
            return Err(CliError::Validation(format!(
                "'{}': block ({}, {}) is empty or ragged",
                path.display(),
                b.target_point,
                b.source_point
            )));
        }
        let m = CMatrix::from_fn(rows, cols, |i, j| {
            Cx::new(b.matrix[i][j][0], b.matrix[i][j][1])
        });
        let key = FibreKey::new(b.target_point, b.source_point);
        if blocks.insert(key, m).is_some() {
            return Err(CliError::Validation(format!(
                "'{}': duplicate block ({}, {})",
                path.display(),
                b.target_point,
                b.source_point
            )));
        }
    }
    TwoArrow::from_blocks(cat, source, target, blocks)
        .map_err(|e| validation(format!("'{}': {e}", path.display())))
}

/// Script files hold one expression per line; blank lines and lines whose
/// first non-space character is '#' are skipped.
pub fn read_script(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(format!("cannot read '{}': {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}
