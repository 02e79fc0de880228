//! On-disk formats.
//!
//! Parameter, bounds and inventory files are TOML. Time series are
//! comma-separated text with a header row and `#` comment lines; numbers are
//! written with 17 significant digits so every `f64` survives a round trip.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::TorqueInventory;
use crate::params::{ActuatorParams, MotorFamily};
use crate::sysid::{ParamBounds, FITTED_COUNT, FITTED_NAMES};
use crate::trace::{Trace, TraceRow};

pub const PARAM_SCHEMA_VERSION: i64 = 1;

/// Environment variable naming a directory of preset parameter files that
/// replaces the bundled ones.
pub const PRESET_DIR_ENV: &str = "SERVO_SYSID_PRESETS";

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn toml_error(e: toml::de::Error) -> Error {
    Error::Parse {
        line: 0,
        reason: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamFile {
    pub schema_version: i64,
    pub family: Option<String>,
    pub params: ActuatorParams,
}

impl ParamFile {
    pub fn new(family: Option<&str>, params: ActuatorParams) -> Self {
        ParamFile {
            schema_version: PARAM_SCHEMA_VERSION,
            family: family.map(str::to_string),
            params,
        }
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

pub fn parse_param_file(text: &str) -> Result<ParamFile> {
    let doc: toml::Table = text.parse().map_err(toml_error)?;
    let version = doc
        .get("schema_version")
        .ok_or_else(|| Error::MissingField("schema_version".into()))?
        .as_integer()
        .ok_or_else(|| Error::invariant("schema_version", "must be an integer"))?;
    if version != PARAM_SCHEMA_VERSION {
        return Err(Error::Schema(version));
    }
    let family = doc.get("family").and_then(|v| v.as_str()).map(str::to_string);
    let table = doc
        .get("params")
        .and_then(|v| v.as_table())
        .ok_or_else(|| Error::MissingField("params".into()))?;

    let mut values = [0.0; 11];
    for (i, (name, unit)) in ActuatorParams::FIELD_NAMES
        .iter()
        .zip(ActuatorParams::FIELD_UNITS)
        .enumerate()
    {
        let entry = table
            .get(*name)
            .ok_or_else(|| Error::MissingField((*name).into()))?;
        let (value, file_unit) = match entry {
            toml::Value::Table(t) => (
                t.get("value").and_then(as_f64),
                t.get("unit").and_then(|u| u.as_str()),
            ),
            other => (as_f64(other), None),
        };
        let value = value.ok_or_else(|| Error::invariant(name, "expected a number"))?;
        if let Some(u) = file_unit {
            if u != unit {
                return Err(Error::invariant(
                    name,
                    format!("unit `{u}` does not match `{unit}`"),
                ));
            }
        }
        values[i] = value;
    }
    let params = ActuatorParams::from_values(values);
    params.validate()?;
    Ok(ParamFile {
        schema_version: version,
        family,
        params,
    })
}

pub fn render_param_file(file: &ParamFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema_version = {}", file.schema_version);
    if let Some(f) = &file.family {
        let _ = writeln!(out, "family = {}", toml::Value::String(f.clone()));
    }
    out.push_str("\n[params]\n");
    for ((name, unit), v) in ActuatorParams::FIELD_NAMES
        .iter()
        .zip(ActuatorParams::FIELD_UNITS)
        .zip(file.params.values())
    {
        let _ = writeln!(out, "{name} = {{ value = {v:?}, unit = \"{unit}\" }}");
    }
    out
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ParamFile> {
    parse_param_file(&read_to_string(path.as_ref())?)
}

pub fn write_params(file: &ParamFile, path: impl AsRef<Path>) -> Result<()> {
    file.params.validate()?;
    write_string(path.as_ref(), &render_param_file(file))
}

/// Preset for `family`, from [`PRESET_DIR_ENV`] when set, else bundled.
pub fn load_preset(family: MotorFamily) -> Result<ParamFile> {
    match std::env::var_os(PRESET_DIR_ENV) {
        Some(dir) => read_params(PathBuf::from(dir).join(family.preset_file_name())),
        None => parse_param_file(family.preset_source()),
    }
}

/// Write all bundled presets into `dir`.
pub fn export_presets(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    MotorFamily::ALL
        .iter()
        .map(|f| {
            let path = dir.join(f.preset_file_name());
            write_string(&path, f.preset_source())?;
            Ok(path)
        })
        .collect()
}

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Comment lines without the leading `#`.
    pub comments: Vec<String>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render_table(table: &Table) -> String {
    let mut out = String::new();
    for c in &table.comments {
        out.push('#');
        if !c.is_empty() {
            out.push(' ');
            out.push_str(c);
        }
        out.push('\n');
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut table = Table::default();
    let mut have_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            table.comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if !have_header {
            table.columns = cells.iter().map(|s| s.to_string()).collect();
            have_header = true;
            continue;
        }
        if cells.len() != table.columns.len() {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("ragged row: {} of {} columns", cells.len(), table.columns.len()),
            });
        }
        let row = cells
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    reason: format!("not a number: `{c}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        table.rows.push(row);
    }
    if !have_header {
        return Err(Error::Parse {
            line: 0,
            reason: "missing header row".into(),
        });
    }
    Ok(table)
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    parse_table(&read_to_string(path.as_ref())?)
}

pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &render_table(table))
}

const TRACE_COLUMNS: [&str; 4] = ["t", "setpoint", "q", "qdot"];

pub fn trace_to_table(trace: &Trace) -> Table {
    let with_tau = trace.rows.iter().any(|r| r.tau.is_some());
    let mut columns: Vec<String> = TRACE_COLUMNS.iter().map(|s| s.to_string()).collect();
    if with_tau {
        columns.push("tau".into());
    }
    let mut comments = vec![format!("dt = {}", format_number(trace.dt))];
    comments.extend(trace.metadata.iter().cloned());
    let rows = trace
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.t, r.setpoint, r.q, r.qdot];
            if with_tau {
                v.push(r.tau.unwrap_or(f64::NAN));
            }
            v
        })
        .collect();
    Table {
        columns,
        rows,
        comments,
    }
}

pub fn table_to_trace(table: &Table) -> Result<Trace> {
    let idx = TRACE_COLUMNS
        .iter()
        .map(|name| {
            table
                .column(name)
                .ok_or_else(|| Error::MissingField((*name).into()))
        })
        .collect::<Result<Vec<usize>>>()?;
    let tau = table.column("tau");

    let mut declared_dt = None;
    let mut metadata = Vec::new();
    for c in &table.comments {
        match c.split_once('=') {
            Some((k, v)) if k.trim() == "dt" => {
                declared_dt = Some(v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: 0,
                    reason: format!("bad dt comment `{c}`"),
                })?);
            }
            _ => metadata.push(c.clone()),
        }
    }
    let dt = match (declared_dt, table.rows.len()) {
        (Some(dt), _) => dt,
        (None, n) if n >= 2 => table.rows[1][idx[0]] - table.rows[0][idx[0]],
        _ => {
            return Err(Error::InsufficientData(
                "cannot infer dt from fewer than 2 rows".into(),
            ))
        }
    };
    let rows = table
        .rows
        .iter()
        .map(|r| TraceRow {
            t: r[idx[0]],
            setpoint: r[idx[1]],
            q: r[idx[2]],
            qdot: r[idx[3]],
            tau: tau.map(|i| r[i]).filter(|v| !v.is_nan()),
        })
        .collect();
    let trace = Trace { dt, rows, metadata };
    trace.validate()?;
    Ok(trace)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    table_to_trace(&read_table(path)?)
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    trace.validate()?;
    write_table(&trace_to_table(trace), path)
}

pub fn parse_inventory(text: &str) -> Result<TorqueInventory> {
    let inv: TorqueInventory = toml::from_str(text).map_err(toml_error)?;
    inv.validate()?;
    Ok(inv)
}

pub fn read_inventory(path: impl AsRef<Path>) -> Result<TorqueInventory> {
    parse_inventory(&read_to_string(path.as_ref())?)
}

/// Bounds files hold one `name = [lower, upper]` pair per fitted parameter
/// under a `[bounds]` table.
pub fn parse_bounds(text: &str) -> Result<ParamBounds> {
    let doc: toml::Table = text.parse().map_err(toml_error)?;
    let table = doc
        .get("bounds")
        .and_then(|v| v.as_table())
        .ok_or_else(|| Error::MissingField("bounds".into()))?;
    let mut lower = [0.0; FITTED_COUNT];
    let mut upper = [0.0; FITTED_COUNT];
    for (i, name) in FITTED_NAMES.iter().enumerate() {
        let pair = table
            .get(*name)
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::MissingField((*name).into()))?;
        match pair.as_slice() {
            [lo, hi] => {
                lower[i] = as_f64(lo).ok_or_else(|| Error::invariant(name, "expected a number"))?;
                upper[i] = as_f64(hi).ok_or_else(|| Error::invariant(name, "expected a number"))?;
            }
            _ => return Err(Error::invariant(name, "expected [lower, upper]")),
        }
    }
    let bounds = ParamBounds { lower, upper };
    bounds.validate()?;
    Ok(bounds)
}

pub fn render_bounds(bounds: &ParamBounds) -> String {
    let mut out = String::from("[bounds]\n");
    for (i, name) in FITTED_NAMES.iter().enumerate() {
        let _ = writeln!(out, "{name} = [{:?}, {:?}]", bounds.lower[i], bounds.upper[i]);
    }
    out
}

pub fn read_bounds(path: impl AsRef<Path>) -> Result<ParamBounds> {
    parse_bounds(&read_to_string(path.as_ref())?)
}
