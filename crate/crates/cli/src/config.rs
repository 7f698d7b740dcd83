//! TOML formats for models, scenarios and gain certificates.
//!
//! Every file carries a `schema` field naming its kind and version.
//! Matrices are lists of rows.

use std::fs;
use std::path::{Path, PathBuf};

use lpv_observer::harness::{Scenario, Signal};
use lpv_observer::linalg::{Mat, Vector};
use lpv_observer::{DecoupledModel, ErrorConstants, LpvModel, SynthesisCertificate, SynthesisMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MODEL_SCHEMA: &str = "lpv-observer/model/1";
pub const SCENARIO_SCHEMA: &str = "lpv-observer/scenario/1";
pub const GAINS_SCHEMA: &str = "lpv-observer/gains/1";

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: String,
    #[serde(rename = "N")]
    pub vertices: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub l: usize,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "D")]
    pub d: Vec<Rows>,
    #[serde(rename = "G")]
    pub g: Rows,
    #[serde(rename = "H")]
    pub h: Rows,
    pub eta_w: f64,
    pub eta_v: f64,
    pub x0_hat: Vec<f64>,
    pub delta0_x: f64,
}

/// Builds a dense matrix from rows, checking the declared shape.
pub fn matrix(field: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<Mat, CliError> {
    if rows.len() != nrows {
        return Err(CliError::Config(format!(
            "field `{field}`: expected {nrows} rows, found {}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(CliError::Config(format!(
                "field `{field}`: row {} has {} entries, expected {ncols}",
                i + 1,
                row.len()
            )));
        }
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vertex_matrices(
    field: &str,
    mats: &[Rows],
    vertices: usize,
    nrows: usize,
    ncols: usize,
) -> Result<Vec<Mat>, CliError> {
    if mats.len() != vertices {
        return Err(CliError::Config(format!(
            "field `{field}`: expected N = {vertices} matrices, found {}",
            mats.len()
        )));
    }
    mats.iter()
        .enumerate()
        .map(|(i, m)| matrix(&format!("{field}[{}]", i + 1), m, nrows, ncols))
        .collect()
}

pub fn rows_of(m: &Mat) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelFile {
    pub fn into_model(self) -> Result<LpvModel, CliError> {
        check_schema(&self.schema, MODEL_SCHEMA)?;
        let (nv, n, m, p, l) = (self.vertices, self.n, self.m, self.p, self.l);
        if nv == 0 || n == 0 || l == 0 {
            return Err(CliError::Config("N, n and l must be positive".into()));
        }
        let a = vertex_matrices("A", &self.a, nv, n, n)?;
        let b = vertex_matrices("B", &self.b, nv, n, m)?;
        let c = matrix("C", &self.c, l, n)?;
        let d = vertex_matrices("D", &self.d, nv, l, m)?;
        let g = matrix("G", &self.g, n, p)?;
        let h = matrix("H", &self.h, l, p)?;
        if self.x0_hat.len() != n {
            return Err(CliError::Config(format!(
                "field `x0_hat`: expected {n} entries, found {}",
                self.x0_hat.len()
            )));
        }
        let model = LpvModel::new(
            a,
            b,
            c,
            d,
            g,
            h,
            self.eta_w,
            self.eta_v,
            Vector::from_vec(self.x0_hat),
            self.delta0_x,
        );
        model.check_structure()?;
        Ok(model)
    }

    pub fn from_model(model: &LpvModel) -> Self {
        let dims = model.dims;
        Self {
            schema: MODEL_SCHEMA.into(),
            vertices: dims.vertices,
            n: dims.n,
            m: dims.m,
            p: dims.p,
            l: dims.l,
            a: model.a.iter().map(rows_of).collect(),
            b: model.b.iter().map(rows_of).collect(),
            c: rows_of(&model.c),
            d: model.d.iter().map(rows_of).collect(),
            g: rows_of(&model.g),
            h: rows_of(&model.h),
            eta_w: model.eta_w,
            eta_v: model.eta_v,
            x0_hat: model.x0_hat.iter().copied().collect(),
            delta0_x: model.delta0_x,
        }
    }
}

fn check_schema(found: &str, expected: &str) -> Result<(), CliError> {
    if found != expected {
        return Err(CliError::Config(format!(
            "field `schema`: expected \"{expected}\", found \"{found}\""
        )));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<LpvModel, CliError> {
    let file: ModelFile = parse(path, &read(path)?)?;
    file.into_model()
        .map_err(|e| e.context(&path.display().to_string()))
}

/// Samples read from a text file, one row per step.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSignal {
    #[allow(dead_code)]
    kind: String,
    path: PathBuf,
    /// Zero-based column for multi-column files.
    #[serde(default)]
    column: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: String,
    horizon: usize,
    seed: u64,
    weights: lpv_observer::harness::WeightMode,
    #[serde(default)]
    unknown_input: Vec<toml::Value>,
    #[serde(default)]
    known_input: Vec<toml::Value>,
    noise: lpv_observer::harness::NoiseMode,
    #[serde(default)]
    x0_true: Option<Vec<f64>>,
}

/// Reads one column of a whitespace- or comma-separated numeric file.
/// Blank lines and lines starting with `#` are skipped.
fn read_samples(path: &Path, column: usize) -> Result<Vec<f64>, CliError> {
    let text = read(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .nth(column)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: no column {column}",
                    path.display(),
                    lineno + 1
                ))
            })?;
        let v: f64 = field.parse().map_err(|_| {
            CliError::Config(format!(
                "{}:{}: `{field}` is not a number",
                path.display(),
                lineno + 1
            ))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Config(format!("{}: no samples", path.display())));
    }
    Ok(values)
}

/// A config signal is any built-in signal or `kind = "file"`.
fn resolve_signal(field: &str, value: toml::Value, base: &Path) -> Result<Signal, CliError> {
    let bad = |e: toml::de::Error| CliError::Config(format!("field `{field}`: {e}"));
    if value.get("kind").and_then(|k| k.as_str()) != Some("file") {
        return value.try_into().map_err(bad);
    }
    let f: FileSignal = value.try_into().map_err(bad)?;
    let path = if f.path.is_absolute() {
        f.path
    } else {
        base.join(f.path)
    };
    Ok(Signal::Samples {
        values: read_samples(&path, f.column)?,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let file: ScenarioFile = parse(path, &read(path)?)?;
    check_schema(&file.schema, SCENARIO_SCHEMA)
        .map_err(|e| e.context(&path.display().to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let signals = |name: &str, specs: Vec<toml::Value>| -> Result<Vec<Signal>, CliError> {
        specs
            .into_iter()
            .enumerate()
            .map(|(i, s)| resolve_signal(&format!("{name}[{}]", i + 1), s, base))
            .collect()
    };
    let err = |e: CliError| e.context(&path.display().to_string());
    Ok(Scenario {
        horizon: file.horizon,
        seed: file.seed,
        weights: file.weights,
        unknown_input: signals("unknown_input", file.unknown_input).map_err(err)?,
        known_input: signals("known_input", file.known_input).map_err(err)?,
        noise: file.noise,
        x0_true: file.x0_true,
    })
}

/// Serialized synthesis result. `S`, `Y` and `eta` are the certificate;
/// the remaining numbers are derived and checked on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    pub schema: String,
    pub mode: SynthesisMode,
    pub eta: f64,
    pub margin: f64,
    pub solver_status: String,
    pub min_block_eig: f64,
    pub cond_s: f64,
    pub theta: f64,
    pub beta: f64,
    pub eta_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_x_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_d_inf: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(rename = "S")]
    pub s: Rows,
    #[serde(rename = "Y")]
    pub y: Rows,
    #[serde(rename = "L_tilde")]
    pub l_tilde: Rows,
}

impl GainsFile {
    pub fn new(cert: &SynthesisCertificate, constants: &ErrorConstants) -> Self {
        let steady = lpv_observer::steady_state_radii(constants).ok();
        Self {
            schema: GAINS_SCHEMA.into(),
            mode: cert.mode,
            eta: cert.eta,
            margin: cert.margin,
            solver_status: cert.solver_status.clone(),
            min_block_eig: cert.min_block_eig,
            cond_s: cert.cond_s,
            theta: constants.theta,
            beta: constants.beta,
            eta_bar: constants.eta_bar,
            delta_x_inf: steady.map(|s| s.0),
            delta_d_inf: steady.map(|s| s.1),
            warnings: cert.warnings.clone(),
            s: rows_of(&cert.s),
            y: rows_of(&cert.y),
            l_tilde: rows_of(&cert.l_tilde),
        }
    }

    /// Rebuilds the certificate for `dm`, re-running the LMI check at the
    /// stored margin (or `margin` when given) and the gain recovery.
    pub fn certificate(
        &self,
        dm: &DecoupledModel,
        margin: Option<f64>,
    ) -> Result<SynthesisCertificate, CliError> {
        check_schema(&self.schema, GAINS_SCHEMA)?;
        let n = dm.n();
        let s = matrix("S", &self.s, n, n)?;
        let y = matrix("Y", &self.y, n, dm.q())?;
        let stored = matrix("L_tilde", &self.l_tilde, n, dm.q())?;
        let margin = margin.unwrap_or(self.margin);
        let mut cert = SynthesisCertificate::from_parts(
            dm,
            self.mode,
            self.eta,
            s,
            y,
            margin,
            self.solver_status.clone(),
        )?;
        cert.warnings = self.warnings.clone();
        if !cert.verify(dm)? {
            return Err(CliError::Certificate(format!(
                "gains do not satisfy the LMI at eta = {} (min eigenvalue {:e}, margin {:e})",
                self.eta, cert.min_block_eig, margin
            )));
        }
        let scale = stored.amax().max(1.0);
        if (&cert.l_tilde - &stored).amax() > 1e-9 * scale {
            return Err(CliError::Certificate(
                "stored L_tilde does not match S^-1 Y".into(),
            ));
        }
        Ok(cert)
    }

    /// Checks the stored derived constants against freshly computed ones.
    pub fn check_constants(&self, constants: &ErrorConstants) -> Result<(), CliError> {
        for (name, stored, fresh) in [
            ("theta", self.theta, constants.theta),
            ("beta", self.beta, constants.beta),
            ("eta_bar", self.eta_bar, constants.eta_bar),
        ] {
            if (stored - fresh).abs() > 1e-9 * fresh.abs().max(1.0) {
                return Err(CliError::Certificate(format!(
                    "stored {name} = {stored} disagrees with recomputed {fresh}"
                )));
            }
        }
        Ok(())
    }
}

pub fn load_gains(path: &Path) -> Result<GainsFile, CliError> {
    parse(path, &read(path)?)
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String, CliError> {
    toml::to_string(value).map_err(|e| CliError::Io(format!("serialization failed: {e}")))
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
