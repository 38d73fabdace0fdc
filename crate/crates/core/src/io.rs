//! File formats: system, control and wave-model definitions (JSON in),
//! reports (JSON out) and traces (CSV out).
//!
//! Input documents are strict: unknown fields are rejected and the optional
//! top-level `"schema"` must be 1. Parse errors carry the path of the
//! offending field, e.g. `stages[0].C`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::control::{ControlLaw, ControlPair, PiecewiseConstant};
use crate::gramian::GramianSet;
use crate::linalg::symmetric_eigenvalues;
use crate::propagation::Trajectory;
use crate::synthesis::SynthesisResult;
use crate::system::{GeneratorSpec, ImpulseStage, ImpulsiveSystem, SystemDefinition};
use crate::wave::{WaveImpulse, WaveModel};
use crate::{Error, Matrix, Result, StateVector};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse { path: if path == "." { "document".into() } else { path }, message: e.into_inner().to_string() }
    })
}

fn check_schema(schema: u32) -> Result<()> {
    if schema != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: "schema".into(),
            message: format!("unsupported schema version {schema}, expected {SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

fn matrix_from_rows(path: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Parse {
            path: format!("{path}[{i}]"),
            message: format!("ragged matrix: row has {} entries, expected {ncols}", rows[i].len()),
        });
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn vector_values(v: &StateVector) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorFile {
    Dense(Vec<Vec<f64>>),
    SpectralBlocks(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageFile {
    pub t: f64,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

/// `{"schema": 1, "generator": {...}, "B": [[...]], "horizon_b": b, "stages": [{"t", "C", "D"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default = "schema_version")]
    pub schema: u32,
    pub generator: GeneratorFile,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub horizon_b: f64,
    #[serde(default)]
    pub stages: Vec<StageFile>,
}

impl SystemFile {
    pub fn to_definition(&self) -> Result<SystemDefinition> {
        check_schema(self.schema)?;
        let generator = match &self.generator {
            GeneratorFile::Dense(rows) => GeneratorSpec::Dense(matrix_from_rows("generator.dense", rows)?),
            GeneratorFile::SpectralBlocks(freqs) => GeneratorSpec::SpectralBlocks(freqs.clone()),
        };
        let stages = self
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(ImpulseStage {
                    t: s.t,
                    c: matrix_from_rows(&format!("stages[{i}].C"), &s.c)?,
                    d: matrix_from_rows(&format!("stages[{i}].D"), &s.d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SystemDefinition { generator, b: matrix_from_rows("B", &self.b)?, horizon: self.horizon_b, stages })
    }

    pub fn from_definition(def: &SystemDefinition) -> Self {
        SystemFile {
            schema: SCHEMA_VERSION,
            generator: match &def.generator {
                GeneratorSpec::Dense(a) => GeneratorFile::Dense(matrix_rows(a)),
                GeneratorSpec::SpectralBlocks(f) => GeneratorFile::SpectralBlocks(f.clone()),
            },
            b: matrix_rows(&def.b),
            horizon_b: def.horizon,
            stages: def
                .stages
                .iter()
                .map(|s| StageFile { t: s.t, c: matrix_rows(&s.c), d: matrix_rows(&s.d) })
                .collect(),
        }
    }
}

/// Parses a system document without validating it.
pub fn parse_system(text: &str) -> Result<SystemDefinition> {
    parse::<SystemFile>(text)?.to_definition()
}

pub fn system_json(def: &SystemDefinition) -> String {
    serde_json::to_string_pretty(&SystemFile::from_definition(def)).expect("system serializes")
}

/// Distributed part of a control document: either a piecewise-constant
/// law (`grids` = cell count per impulse subinterval, `values` = one
/// vector per cell in time order) or `adjoint_feedback` = `φ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributedFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjoint_feedback: Option<Vec<f64>>,
}

/// `{"schema": 1, "u": {...}, "v": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlFile {
    #[serde(default = "schema_version")]
    pub schema: u32,
    pub u: DistributedFile,
    #[serde(default)]
    pub v: Vec<Vec<f64>>,
}

impl ControlFile {
    pub fn to_control(&self, sys: &ImpulsiveSystem) -> Result<ControlPair> {
        check_schema(self.schema)?;
        let law = match (&self.u.grids, &self.u.values, &self.u.adjoint_feedback) {
            (Some(grids), Some(values), None) => {
                if grids.len() != sys.p() + 1 {
                    return Err(Error::Parse {
                        path: "u.grids".into(),
                        message: format!("expected {} subinterval cell counts, got {}", sys.p() + 1, grids.len()),
                    });
                }
                let total: usize = grids.iter().sum();
                if values.len() != total {
                    return Err(Error::Parse {
                        path: "u.values".into(),
                        message: format!("expected {total} cell values, got {}", values.len()),
                    });
                }
                let mut cells = Vec::with_capacity(grids.len());
                let mut it = values.iter();
                for &count in grids {
                    cells.push(it.by_ref().take(count).map(|v| StateVector::from_column_slice(v)).collect());
                }
                ControlLaw::PiecewiseConstant(PiecewiseConstant::new(sys, cells)?)
            }
            (None, None, Some(phi)) => ControlLaw::AdjointFeedback { phi: StateVector::from_column_slice(phi) },
            _ => {
                return Err(Error::Parse {
                    path: "u".into(),
                    message: "expected either {\"grids\", \"values\"} or {\"adjoint_feedback\"}".into(),
                })
            }
        };
        let impulses = self.v.iter().map(|v| StateVector::from_column_slice(v)).collect();
        ControlPair::new(sys, law, impulses)
    }

    pub fn from_control(w: &ControlPair) -> Self {
        let u = match &w.law {
            ControlLaw::PiecewiseConstant(law) => DistributedFile {
                grids: Some(law.cells().iter().map(Vec::len).collect()),
                values: Some(law.cells().iter().flatten().map(vector_values).collect()),
                adjoint_feedback: None,
            },
            ControlLaw::AdjointFeedback { phi } => {
                DistributedFile { adjoint_feedback: Some(vector_values(phi)), ..Default::default() }
            }
        };
        ControlFile { schema: SCHEMA_VERSION, u, v: w.impulses.iter().map(vector_values).collect() }
    }
}

pub fn parse_control(text: &str, sys: &ImpulsiveSystem) -> Result<ControlPair> {
    parse::<ControlFile>(text)?.to_control(sys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveImpulseFile {
    pub t: f64,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

/// `{"schema": 1, "gamma": [...], "alpha": [...], "beta": [...],
/// "impulses": [{"t", "a", "b"}], "horizon_b": b}`. Missing coefficient
/// lists are zero; short ones are zero-padded to `len(gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveModelFile {
    #[serde(default = "schema_version")]
    pub schema: u32,
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub impulses: Vec<WaveImpulseFile>,
    pub horizon_b: f64,
}

fn padded(path: &str, v: &[f64], modes: usize) -> Result<Vec<f64>> {
    if v.len() > modes {
        return Err(Error::Parse {
            path: path.into(),
            message: format!("{} coefficients exceed the {modes} modes of gamma", v.len()),
        });
    }
    let mut out = v.to_vec();
    out.resize(modes, 0.0);
    Ok(out)
}

impl WaveModelFile {
    pub fn to_model(&self) -> Result<WaveModel> {
        check_schema(self.schema)?;
        let modes = self.gamma.len();
        let model = WaveModel {
            gamma: self.gamma.clone(),
            alpha: padded("alpha", &self.alpha, modes)?,
            beta: padded("beta", &self.beta, modes)?,
            impulses: self
                .impulses
                .iter()
                .enumerate()
                .map(|(i, imp)| {
                    Ok(WaveImpulse {
                        t: imp.t,
                        a: padded(&format!("impulses[{i}].a"), &imp.a, modes)?,
                        b: padded(&format!("impulses[{i}].b"), &imp.b, modes)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            horizon: self.horizon_b,
        };
        Ok(model)
    }
}

pub fn parse_wave_model(text: &str) -> Result<WaveModel> {
    parse::<WaveModelFile>(text)?.to_model()
}

/// Target wave coefficients `{"alpha": [...], "beta": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveTargetFile {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
}

pub fn parse_wave_target(text: &str, modes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let t: WaveTargetFile = parse(text)?;
    Ok((padded("alpha", &t.alpha, modes)?, padded("beta", &t.beta, modes)?))
}

/// A bare JSON array of numbers, or a comma-separated list with optional
/// brackets.
pub fn parse_vector_literal(text: &str) -> Result<StateVector> {
    let trimmed = text.trim();
    let inner = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(trimmed);
    if inner.trim().is_empty() {
        return Ok(StateVector::zeros(0));
    }
    let values = inner
        .split(',')
        .enumerate()
        .map(|(i, s)| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: format!("[{i}]"),
                message: format!("{e}: {:?}", s.trim()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StateVector::from_vec(values))
}

pub fn gramian_report(g: &GramianSet) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("schema".into(), json!(SCHEMA_VERSION));
    for (name, m) in g.named().into_iter().chain([("total", &g.total)]) {
        out.insert(
            name.into(),
            json!({ "matrix": matrix_rows(m), "eigenvalues": symmetric_eigenvalues(m) }),
        );
    }
    Value::Object(out)
}

pub fn synthesis_report(r: &SynthesisResult) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "epsilon": r.epsilon,
        "phi_hat": vector_values(&r.phi_hat),
        "control": ControlFile::from_control(&r.control),
        "predicted_error": vector_values(&r.predicted_error),
        "achieved_error": vector_values(&r.achieved_error),
        "identity_residual": r.identity_residual(),
        "terminal_state": vector_values(&r.terminal_state),
        "j_value": r.j_value,
    })
}

/// Fixed 17-significant-digit formatting used in every CSV.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `t, side, x_1..x_n`; side is `L`, `R` or `-`.
pub fn trajectory_csv(traj: &Trajectory, prefix: &str) -> String {
    let n = traj.samples.first().map(|s| s.x.len()).unwrap_or(0);
    let mut out = String::from("t,side");
    for i in 1..=n {
        out.push_str(&format!(",{prefix}_{i}"));
    }
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&fmt_num(s.t));
        out.push(',');
        out.push_str(s.side.code());
        for v in s.x.iter() {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

/// Columns `t, u_1..u_m`.
pub fn control_samples_csv(samples: &[(f64, StateVector)]) -> String {
    let m = samples.first().map(|(_, u)| u.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 1..=m {
        out.push_str(&format!(",u_{i}"));
    }
    out.push('\n');
    for (t, u) in samples {
        out.push_str(&fmt_num(*t));
        for v in u.iter() {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

/// Columns `k, t, v_1..v_m`.
pub fn impulse_table_csv(sys: &ImpulsiveSystem, impulses: &[StateVector]) -> String {
    let mut out = String::from("k,t");
    for i in 1..=sys.m_u() {
        out.push_str(&format!(",v_{i}"));
    }
    out.push('\n');
    for (k, v) in impulses.iter().enumerate() {
        out.push_str(&format!("{},{}", k + 1, fmt_num(sys.knot(k + 1))));
        for x in v.iter() {
            out.push(',');
            out.push_str(&fmt_num(*x));
        }
        out.push('\n');
    }
    out
}
