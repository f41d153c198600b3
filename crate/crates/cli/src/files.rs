//! JSON model, initial-set, unsafe-set and direction files.
//!
//! Matrices are either dense nested arrays (`[[1, 0], [0, 1]]`) or sparse
//! objects `{"sparse": [[row, col, value], ...]}` with 0-based indices. A
//! sparse matrix whose shape is not implied by the surrounding fields needs
//! an explicit `"shape": [rows, cols]`.

use std::fs;
use std::path::Path;

use daereach::model::{
    build_rotating_masses, build_stokes, rotating_masses_initial_star, rotating_masses_unsafe_m2,
    rotating_masses_unsafe_x4, stokes_input_model,
};
use daereach::{AutonomousDae, DaeSystem, InputModel, RealMatrix, RealVector, StarSet, UnsafeSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Dense(Vec<Vec<f64>>),
    Sparse {
        sparse: Vec<(usize, usize, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape: Option<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorData {
    Flat(Vec<f64>),
    Column(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(rename = "E")]
    pub e: MatrixData,
    #[serde(rename = "A")]
    pub a: MatrixData,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixData>,
    /// Input generator `u' = A_u u`; absent means `u = 0`.
    #[serde(rename = "A_u", default, skip_serializing_if = "Option::is_none")]
    pub a_u: Option<MatrixData>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitFile {
    #[serde(rename = "V")]
    v: MatrixData,
    #[serde(rename = "C")]
    c: MatrixData,
    d: VectorData,
    #[serde(rename = "U0", default)]
    u0: Option<MatrixData>,
    #[serde(default)]
    center: Option<VectorData>,
    #[serde(default)]
    center_u: Option<VectorData>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnsafeFile {
    #[serde(rename = "G")]
    g: MatrixData,
    f: VectorData,
    #[serde(default)]
    on_original_state: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum DirectionsFile {
    Wrapped {
        directions: MatrixData,
        #[serde(default)]
        on_original_state: Option<bool>,
    },
    Bare(MatrixData),
}

fn read(path: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &str, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::parse(path, e.to_string()))
}

impl MatrixData {
    pub fn from_matrix(m: &RealMatrix) -> Self {
        MatrixData::Dense((0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect())
    }

    /// Converts with an optional expected shape; `field` names the matrix in diagnostics.
    pub fn to_matrix(&self, source: &str, field: &str, expected: Option<(usize, usize)>) -> CliResult<RealMatrix> {
        let err = |msg: String| CliError::parse(source, format!("field {field}: {msg}"));
        match self {
            MatrixData::Dense(rows) => {
                let nrows = rows.len();
                let ncols = rows.first().map_or(0, |r| r.len());
                if let Some((er, ec)) = expected {
                    // An empty array stands for any matrix without entries.
                    if nrows == 0 && (er == 0 || ec == 0) {
                        return Ok(RealMatrix::zeros(er, ec));
                    }
                    if nrows != er {
                        return Err(err(format!("expected {er}x{ec} matrix, found {nrows} rows")));
                    }
                    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ec) {
                        return Err(err(format!("expected {er}x{ec} matrix, row {i} has {} entries", r.len())));
                    }
                } else if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
                    return Err(err(format!("row {i} has {} entries, row 0 has {ncols}", r.len())));
                }
                Ok(RealMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
            }
            MatrixData::Sparse { sparse, shape } => {
                let (nr, nc) = match (shape, expected) {
                    (Some(s), Some(e)) if *s != e => {
                        return Err(err(format!("declared shape {}x{} but expected {}x{}", s.0, s.1, e.0, e.1)));
                    }
                    (Some(s), _) => *s,
                    (None, Some(e)) => e,
                    (None, None) => return Err(err("sparse matrix needs a \"shape\" entry".into())),
                };
                let mut m = RealMatrix::zeros(nr, nc);
                let mut seen = std::collections::HashSet::new();
                for (i, &(r, c, v)) in sparse.iter().enumerate() {
                    if r >= nr || c >= nc {
                        return Err(err(format!("entry {i} at ({r}, {c}) is outside {nr}x{nc}")));
                    }
                    if !seen.insert((r, c)) {
                        return Err(err(format!("entry {i} repeats position ({r}, {c})")));
                    }
                    m[(r, c)] = v;
                }
                Ok(m)
            }
        }
    }
}

impl VectorData {
    pub fn to_vector(&self, source: &str, field: &str, expected: Option<usize>) -> CliResult<RealVector> {
        let values: Vec<f64> = match self {
            VectorData::Flat(v) => v.clone(),
            VectorData::Column(rows) => {
                if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != 1) {
                    return Err(CliError::parse(source, format!("field {field}: row {i} of a column vector must have one entry")));
                }
                rows.iter().map(|r| r[0]).collect()
            }
        };
        if let Some(n) = expected {
            if values.len() != n {
                return Err(CliError::parse(source, format!("field {field}: expected {n} entries, found {}", values.len())));
            }
        }
        Ok(RealVector::from_vec(values))
    }
}

/// Loads a model file or a builtin alias (`builtin:rotating-masses`,
/// `builtin:stokes:<k>`).
pub fn load_model(spec: &str) -> CliResult<(DaeSystem, InputModel)> {
    if let Some(name) = spec.strip_prefix(BUILTIN_PREFIX) {
        return builtin_model(name);
    }
    let text = read(spec)?;
    parse_model(spec, &text)
}

fn builtin_model(name: &str) -> CliResult<(DaeSystem, InputModel)> {
    if name == "rotating-masses" {
        return Ok(build_rotating_masses());
    }
    if let Some(k) = name.strip_prefix("stokes:") {
        let k: usize = k
            .parse()
            .map_err(|_| CliError::parse(format!("{BUILTIN_PREFIX}{name}"), "grid size must be a positive integer"))?;
        return Ok((build_stokes(k)?, stokes_input_model()));
    }
    Err(CliError::parse(
        format!("{BUILTIN_PREFIX}{name}"),
        "unknown builtin model; expected rotating-masses or stokes:<k>",
    ))
}

pub fn parse_model(source: &str, text: &str) -> CliResult<(DaeSystem, InputModel)> {
    let file: ModelFile = parse_json(source, text)?;
    let (n, m) = (file.n, file.m);
    if n == 0 {
        return Err(CliError::parse(source, "field n: must be positive"));
    }
    let e = file.e.to_matrix(source, "E", Some((n, n)))?;
    let a = file.a.to_matrix(source, "A", Some((n, n)))?;
    let b = match &file.b {
        Some(b) => b.to_matrix(source, "B", Some((n, m)))?,
        None if m == 0 => RealMatrix::zeros(n, 0),
        None => return Err(CliError::parse(source, format!("field B: required when m = {m}"))),
    };
    let inputs = match &file.a_u {
        Some(a_u) => InputModel::smooth(a_u.to_matrix(source, "A_u", Some((m, m)))?),
        None => InputModel::Zero,
    };
    Ok((DaeSystem::new(e, a, b)?, inputs))
}

/// Dense serialization of a model; [`parse_model`] reproduces the matrices bit for bit.
pub fn model_to_json(sys: &DaeSystem, inputs: &InputModel) -> String {
    let file = ModelFile {
        n: sys.n(),
        m: sys.m(),
        e: MatrixData::from_matrix(sys.e()),
        a: MatrixData::from_matrix(sys.a()),
        b: (sys.m() > 0).then(|| MatrixData::from_matrix(sys.b())),
        a_u: match inputs {
            InputModel::Smooth { a_u } => Some(MatrixData::from_matrix(a_u)),
            InputModel::Zero => None,
        },
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn save_model(path: &Path, sys: &DaeSystem, inputs: &InputModel) -> CliResult<()> {
    fs::write(path, model_to_json(sys, inputs)).map_err(|e| CliError::io(path, e))
}

/// Loads an initial star over the lifted state of `auto`.
///
/// `V` may have `n + m` rows, or `n` rows with the input block taken from
/// `U0` (zeros when absent). With `center` the set is `center + V beta`.
pub fn load_init(spec: &str, auto: &AutonomousDae) -> CliResult<StarSet> {
    if spec == "builtin:rotating-masses" {
        let star = rotating_masses_initial_star();
        if star.dim() != auto.dim() {
            return Err(CliError::parse(spec, format!("builtin initial set has {} rows, model needs {}", star.dim(), auto.dim())));
        }
        return Ok(star);
    }
    let text = read(spec)?;
    parse_init(spec, &text, auto)
}

pub fn parse_init(source: &str, text: &str, auto: &AutonomousDae) -> CliResult<StarSet> {
    let file: InitFile = parse_json(source, text)?;
    let (n, m, dim) = (auto.n_orig(), auto.m_orig(), auto.dim());
    let v = file.v.to_matrix(source, "V", None)?;
    let k = v.ncols();
    let lift = |v: RealMatrix, u0: Option<RealMatrix>, field: &str| -> CliResult<RealMatrix> {
        if v.nrows() == dim {
            if u0.is_some() && m > 0 {
                return Err(CliError::parse(source, format!("field {field}: already has n + m = {dim} rows, input block given twice")));
            }
            return Ok(v);
        }
        if v.nrows() != n {
            return Err(CliError::parse(source, format!("field {field}: expected {n} or {dim} rows, found {}", v.nrows())));
        }
        let mut out = RealMatrix::zeros(dim, v.ncols());
        out.view_mut((0, 0), (n, v.ncols())).copy_from(&v);
        if let Some(u0) = u0 {
            out.view_mut((n, 0), (m, v.ncols())).copy_from(&u0);
        }
        Ok(out)
    };
    let u0 = file.u0.as_ref().map(|u| u.to_matrix(source, "U0", Some((m, k)))).transpose()?;
    let basis = lift(v.clone(), u0, "V")?;
    let c = file.c.to_matrix(source, "C", None)?;
    if c.ncols() != k {
        return Err(CliError::parse(source, format!("field C: expected {k} columns, found {}", c.ncols())));
    }
    let d = file.d.to_vector(source, "d", Some(c.nrows()))?;
    match &file.center {
        None => {
            if file.center_u.is_some() {
                return Err(CliError::parse(source, "field center_u: requires center"));
            }
            Ok(StarSet::new(basis, c, d)?)
        }
        Some(center) => {
            let center = center.to_vector(source, "center", Some(v.nrows()))?;
            let cu = file.center_u.as_ref().map(|u| u.to_vector(source, "center_u", Some(m))).transpose()?;
            let cu = cu.map(|u| RealMatrix::from_column_slice(m, 1, u.as_slice()));
            let lifted = lift(RealMatrix::from_column_slice(center.len(), 1, center.as_slice()), cu, "center")?;
            Ok(StarSet::from_center_form(&lifted.column(0).into_owned(), &basis, &c, &d)?)
        }
    }
}

/// Loads an unsafe set; builtins `builtin:rotating-masses:m2` and `builtin:rotating-masses:x4`.
pub fn load_unsafe(spec: &str, auto: &AutonomousDae) -> CliResult<UnsafeSpec> {
    let parsed = match spec {
        "builtin:rotating-masses:m2" => rotating_masses_unsafe_m2(),
        "builtin:rotating-masses:x4" => rotating_masses_unsafe_x4(),
        _ if spec.starts_with(BUILTIN_PREFIX) => {
            return Err(CliError::parse(spec, "unknown builtin unsafe set; expected builtin:rotating-masses:m2 or :x4"));
        }
        _ => parse_unsafe(spec, &read(spec)?, auto)?,
    };
    parsed.lifted_matrix(auto.n_orig(), auto.dim())?;
    Ok(parsed)
}

pub fn parse_unsafe(source: &str, text: &str, auto: &AutonomousDae) -> CliResult<UnsafeSpec> {
    let file: UnsafeFile = parse_json(source, text)?;
    let g = file.g.to_matrix(source, "G", None)?;
    let f = file.f.to_vector(source, "f", Some(g.nrows()))?;
    let original = resolve_columns(source, "G", g.ncols(), file.on_original_state, auto)?;
    Ok(if original { UnsafeSpec::on_original_state(g, f)? } else { UnsafeSpec::on_full_state(g, f)? })
}

/// Direction rows over the lifted state.
pub fn load_directions(path: &str, auto: &AutonomousDae) -> CliResult<RealMatrix> {
    let text = read(path)?;
    let (data, flag) = match parse_json::<DirectionsFile>(path, &text)? {
        DirectionsFile::Wrapped { directions, on_original_state } => (directions, on_original_state),
        DirectionsFile::Bare(m) => (m, None),
    };
    let dirs = data.to_matrix(path, "directions", None)?;
    if resolve_columns(path, "directions", dirs.ncols(), flag, auto)? {
        Ok(auto.lift_columns(&dirs)?)
    } else {
        Ok(dirs)
    }
}

/// Whether a row matrix acts on the original coordinates. An explicit flag
/// wins; otherwise the column count decides.
fn resolve_columns(source: &str, field: &str, cols: usize, flag: Option<bool>, auto: &AutonomousDae) -> CliResult<bool> {
    let (n, dim) = (auto.n_orig(), auto.dim());
    let original = flag.unwrap_or(cols == n);
    let expected = if original { n } else { dim };
    if cols != expected {
        return Err(CliError::parse(source, format!("field {field}: expected {expected} columns, found {cols}")));
    }
    Ok(original)
}
