//! Scenario files, runs and diagnostic reports.
//!
//! A scenario is flat `key = value` text. Top-level keys come first, then
//! sections in brackets. `#` starts a comment. Matrices are nine
//! comma-separated numbers in row-major order.
//!
//! ```text
//! mode = dynamic            # dynamic | kinematic | reconstruct | compare_srj | verify
//! seed = 42                 # compare_srj and verify
//! trials = 10000            # compare_srj and verify
//!
//! [params]
//! jx = 0.4
//! jz = 1.2
//! it = 0.3
//! ig = 0.5
//! is_g = 0.2
//! spacecraft_inertia = 12, 0, 0, 0, 9, 0, 0, 0, 15
//!
//! [initial]                 # every key optional, defaults are rest at identity
//! attitude = 1, 0, 0, 0, 1, 0, 0, 0, 1
//! beta = 0
//! gamma = 0
//! omega = 0.1, -0.2, 0.3
//! beta_dot = 0
//! gamma_dot = 0
//! mu = 0, 0, 0              # kinematic and reconstruct only
//!
//! [integrator]              # defaults shown
//! dt = 0.001
//! steps = 10000
//! scheme = lie_rk4
//! reproject_every = 100
//!
//! [schedule]
//! columns = t, tau_g, tau_w
//! 0.0, 0.0, 0.0
//! 10.0, 0.0, 0.0
//!
//! [thresholds]              # override the mode defaults
//! mu_drift_rel = 1e-8
//! ```
//!
//! Schedule columns by mode: `dynamic` takes optional `t, tau_g, tau_w`
//! (zero torque when absent); `kinematic` needs `t, u_beta, u_gamma`;
//! `reconstruct` needs `t, beta, gamma, beta_dot, gamma_dot`, uniformly
//! spaced at a whole multiple of `dt`. Schedules must cover `[0, dt·steps]`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::connection::{reconstruct_path, reconstruction_velocity};
use crate::error::{Error, Result};
use crate::integrators::{
    simulate, Driver, IntegratorConfig, SampledShapePath, Schedule, Scheme, ShapePath, TrackingTorques, Trajectory,
    ZeroTorque,
};
use crate::liegroup::{log_so3, project_to_so3, Rotation};
use crate::model::{momentum_map, InertiaParams, ShapeState, SpatialMomentum, SystemState};
use crate::verify::{compare_srj, verify_suite, VerifyRow};

/// Initial attitudes with an orthonormality error up to this are reprojected;
/// larger errors are rejected.
pub const ATTITUDE_REPAIR_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dynamic,
    Kinematic,
    Reconstruct,
    CompareSrj,
    Verify,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Dynamic => "dynamic",
            Mode::Kinematic => "kinematic",
            Mode::Reconstruct => "reconstruct",
            Mode::CompareSrj => "compare_srj",
            Mode::Verify => "verify",
        }
    }

    fn schedule_columns(&self) -> Option<&'static [&'static str]> {
        match self {
            Mode::Dynamic => Some(&["t", "tau_g", "tau_w"]),
            Mode::Kinematic => Some(&["t", "u_beta", "u_gamma"]),
            Mode::Reconstruct => Some(&["t", "beta", "gamma", "beta_dot", "gamma_dot"]),
            Mode::CompareSrj | Mode::Verify => None,
        }
    }

    fn default_trials(&self) -> usize {
        match self {
            Mode::CompareSrj => 10_000,
            _ => 1000,
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "dynamic" => Mode::Dynamic,
            "kinematic" => Mode::Kinematic,
            "reconstruct" => Mode::Reconstruct,
            "compare_srj" => Mode::CompareSrj,
            "verify" => Mode::Verify,
            other => return Err(format!("unknown mode `{other}`")),
        })
    }
}

/// Sampled input columns; the first column is time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ScheduleTable {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self.times(), (1..self.columns.len()).map(|j| self.column(j)).collect())
    }

    fn shape_path(&self) -> Result<SampledShapePath> {
        let samples = self
            .rows
            .iter()
            .map(|r| ShapeState { beta: r[1], gamma: r[2], beta_dot: r[3], gamma_dot: r[4] })
            .collect();
        SampledShapePath::new(&self.times(), samples)
    }
}

/// Pass limits; unset entries fall back to the mode defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Thresholds {
    pub mu_drift_rel: Option<f64>,
    pub ke_drift_rel: Option<f64>,
    pub ortho_err_max: Option<f64>,
    pub srj_residual_max: Option<f64>,
    pub term_residual_max: Option<f64>,
    pub holonomy_min: Option<f64>,
    pub reconstruction_mismatch: Option<f64>,
}

impl Thresholds {
    const KEYS: [&'static str; 7] = [
        "mu_drift_rel",
        "ke_drift_rel",
        "ortho_err_max",
        "srj_residual_max",
        "term_residual_max",
        "holonomy_min",
        "reconstruction_mismatch",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut Option<f64>> {
        Some(match key {
            "mu_drift_rel" => &mut self.mu_drift_rel,
            "ke_drift_rel" => &mut self.ke_drift_rel,
            "ortho_err_max" => &mut self.ortho_err_max,
            "srj_residual_max" => &mut self.srj_residual_max,
            "term_residual_max" => &mut self.term_residual_max,
            "holonomy_min" => &mut self.holonomy_min,
            "reconstruction_mismatch" => &mut self.reconstruction_mismatch,
            _ => return None,
        })
    }

    fn get(&self, key: &str) -> Option<f64> {
        let mut copy = *self;
        copy.slot(key).and_then(|v| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub params: InertiaParams,
    pub initial: SystemState,
    /// Spatial momentum for kinematic and reconstruction runs. Kinematic runs
    /// default to the momentum of `initial`, reconstruction to zero.
    pub mu: Option<SpatialMomentum>,
    pub integrator: IntegratorConfig,
    pub schedule: Option<ScheduleTable>,
    pub seed: u64,
    pub trials: usize,
    pub thresholds: Thresholds,
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Default)]
struct Raw {
    sections: HashMap<String, (usize, Vec<Entry>)>,
    schedule_rows: Vec<(usize, String)>,
    last_line: usize,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

const SECTIONS: [&str; 6] = ["", "params", "initial", "integrator", "schedule", "thresholds"];

fn tokenize(text: &str) -> Result<Raw> {
    let mut raw = Raw::default();
    raw.sections.insert(String::new(), (1, Vec::new()));
    let mut current = String::new();
    for (i, full) in text.lines().enumerate() {
        let line = i + 1;
        raw.last_line = line;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| perr(line, format!("malformed section header `{content}`")))?
                .trim();
            if !SECTIONS.contains(&name) || name.is_empty() {
                return Err(perr(line, format!("unknown section [{name}]")));
            }
            if raw.sections.contains_key(name) {
                return Err(perr(line, format!("duplicate section [{name}]")));
            }
            raw.sections.insert(name.to_string(), (line, Vec::new()));
            current = name.to_string();
            continue;
        }
        let is_row = current == "schedule"
            && raw.sections["schedule"].1.iter().any(|e| e.key == "columns")
            && !content.contains('=');
        if is_row {
            raw.schedule_rows.push((line, content.to_string()));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| perr(line, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim().to_string();
        let section = raw.sections.get_mut(&current).expect("current section exists");
        if section.1.iter().any(|e| e.key == key) {
            return Err(perr(line, format!("duplicate key `{key}`")));
        }
        section.1.push(Entry { key, value: value.trim().to_string(), line });
    }
    Ok(raw)
}

struct Section<'a> {
    name: &'a str,
    header: usize,
    entries: Vec<&'a Entry>,
    used: Vec<&'a str>,
}

impl<'a> Section<'a> {
    fn new(raw: &'a Raw, name: &'a str) -> Self {
        match raw.sections.get(name) {
            Some((header, entries)) => Self { name, header: *header, entries: entries.iter().collect(), used: Vec::new() },
            None => Self { name, header: raw.last_line, entries: Vec::new(), used: Vec::new() },
        }
    }

    fn find(&mut self, key: &'a str) -> Option<&'a Entry> {
        self.used.push(key);
        self.entries.iter().copied().find(|e| e.key == key)
    }

    fn required(&mut self, key: &'a str) -> Result<&'a Entry> {
        let header = self.header;
        let name = self.name;
        self.find(key).ok_or_else(|| {
            let place = if name.is_empty() { "top level".to_string() } else { format!("[{name}]") };
            perr(header, format!("missing `{key}` in {place}"))
        })
    }

    fn f64_or(&mut self, key: &'a str, default: f64) -> Result<f64> {
        self.find(key).map(parse_number).unwrap_or(Ok(default))
    }

    fn finish(&self) -> Result<()> {
        for e in &self.entries {
            if !self.used.contains(&e.key.as_str()) {
                return Err(perr(e.line, format!("unknown key `{}`", e.key)));
            }
        }
        Ok(())
    }
}

fn parse_number(e: &Entry) -> Result<f64> {
    let x: f64 = e.value.parse().map_err(|_| perr(e.line, format!("`{}` is not a number", e.value)))?;
    if !x.is_finite() {
        return Err(perr(e.line, format!("`{}` must be finite", e.key)));
    }
    Ok(x)
}

fn parse_list(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| perr(line, format!("`{t}` is not a finite number")))
        })
        .collect()
}

fn parse_vector3(e: &Entry) -> Result<Vector3<f64>> {
    let v = parse_list(e.line, &e.value)?;
    if v.len() != 3 {
        return Err(perr(e.line, format!("`{}` needs 3 numbers, found {}", e.key, v.len())));
    }
    Ok(Vector3::from_column_slice(&v))
}

fn parse_matrix3(e: &Entry) -> Result<Matrix3<f64>> {
    let v = parse_list(e.line, &e.value)?;
    if v.len() != 9 {
        return Err(perr(e.line, format!("`{}` needs 9 numbers (row-major), found {}", e.key, v.len())));
    }
    Ok(Matrix3::from_row_slice(&v))
}

fn parse_count(e: &Entry) -> Result<usize> {
    e.value.parse().map_err(|_| perr(e.line, format!("`{}` must be a non-negative integer", e.key)))
}

/// Accepts rotations within the library tolerance unchanged, reprojects
/// small errors and rejects the rest.
fn parse_attitude(e: &Entry) -> Result<Rotation> {
    let m = parse_matrix3(e)?;
    if let Ok(r) = Rotation::from_matrix(m) {
        return Ok(r);
    }
    let err = (m.transpose() * m - Matrix3::identity()).norm();
    if err <= ATTITUDE_REPAIR_LIMIT && m.determinant() > 0.0 {
        return project_to_so3(&m).map_err(|x| perr(e.line, x.to_string()));
    }
    Err(perr(
        e.line,
        format!("initial attitude is not a rotation (orthonormality error {err:e}, repair limit {ATTITUDE_REPAIR_LIMIT:e})"),
    ))
}

fn parse_params(raw: &Raw) -> Result<InertiaParams> {
    let mut sec = Section::new(raw, "params");
    let mut scalar = |k| sec.required(k).and_then(parse_number);
    let (jx, jz, it, ig, is_g) = (scalar("jx")?, scalar("jz")?, scalar("it")?, scalar("ig")?, scalar("is_g")?);
    let inertia = sec.required("spacecraft_inertia")?;
    let sc = parse_matrix3(inertia)?;
    sec.finish()?;
    InertiaParams::new(jx, jz, it, ig, is_g, sc).map_err(|err| match err {
        Error::NotPositiveDefinite(_) | Error::InvalidParams(_) => perr(inertia.line, err.to_string()),
        other => perr(sec.header, other.to_string()),
    })
}

fn parse_initial(raw: &Raw) -> Result<(SystemState, Option<SpatialMomentum>)> {
    let mut sec = Section::new(raw, "initial");
    let attitude = match sec.find("attitude") {
        Some(e) => parse_attitude(e)?,
        None => Rotation::identity(),
    };
    let shape = ShapeState {
        beta: sec.f64_or("beta", 0.0)?,
        gamma: sec.f64_or("gamma", 0.0)?,
        beta_dot: sec.f64_or("beta_dot", 0.0)?,
        gamma_dot: sec.f64_or("gamma_dot", 0.0)?,
    };
    let omega = sec.find("omega").map(parse_vector3).transpose()?.unwrap_or_else(Vector3::zeros);
    let mu = sec.find("mu").map(parse_vector3).transpose()?.map(SpatialMomentum);
    sec.finish()?;
    Ok((SystemState { attitude, shape, omega }, mu))
}

fn parse_integrator(raw: &Raw) -> Result<IntegratorConfig> {
    let mut sec = Section::new(raw, "integrator");
    let defaults = IntegratorConfig::default();
    let dt = sec.f64_or("dt", defaults.dt)?;
    let steps = sec.find("steps").map(parse_count).transpose()?.unwrap_or(defaults.steps);
    let scheme = match sec.find("scheme") {
        Some(e) => e.value.parse::<Scheme>().map_err(|m| perr(e.line, m))?,
        None => defaults.scheme,
    };
    let reproject_every = sec.find("reproject_every").map(parse_count).transpose()?.unwrap_or(defaults.reproject_every);
    sec.finish()?;
    let cfg = IntegratorConfig { dt, steps, scheme, reproject_every };
    cfg.validate().map_err(|e| perr(sec.header, e.to_string()))?;
    Ok(cfg)
}

fn parse_thresholds(raw: &Raw) -> Result<Thresholds> {
    let mut out = Thresholds::default();
    let mut sec = Section::new(raw, "thresholds");
    for key in Thresholds::KEYS {
        if let Some(e) = sec.find(key) {
            let x = parse_number(e)?;
            if x < 0.0 {
                return Err(perr(e.line, format!("threshold `{key}` must be non-negative")));
            }
            *out.slot(key).expect("known key") = Some(x);
        }
    }
    sec.finish()?;
    Ok(out)
}

fn parse_schedule(raw: &Raw, mode: Mode, cfg: &IntegratorConfig) -> Result<Option<ScheduleTable>> {
    let Some((header, _)) = raw.sections.get("schedule") else {
        return match mode {
            Mode::Kinematic | Mode::Reconstruct => Err(perr(raw.last_line, format!("mode {} needs a [schedule]", mode.as_str()))),
            _ => Ok(None),
        };
    };
    let Some(expected) = mode.schedule_columns() else {
        return Err(perr(*header, format!("mode {} takes no [schedule]", mode.as_str())));
    };
    let mut sec = Section::new(raw, "schedule");
    let columns_entry = sec.required("columns")?;
    sec.finish()?;
    let columns: Vec<String> = columns_entry.value.split(',').map(|c| c.trim().to_string()).collect();
    if columns != expected {
        return Err(perr(
            columns_entry.line,
            format!("mode {} expects columns `{}`", mode.as_str(), expected.join(", ")),
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(raw.schedule_rows.len());
    for (line, text) in &raw.schedule_rows {
        let row = parse_list(*line, text)?;
        if row.len() != columns.len() {
            return Err(perr(*line, format!("row has {} values, expected {}", row.len(), columns.len())));
        }
        if let Some(prev) = rows.last() {
            if !(row[0] > prev[0]) {
                return Err(perr(*line, "schedule times must be strictly increasing"));
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(perr(columns_entry.line, "schedule needs at least two rows"));
    }

    let end = cfg.duration();
    let (first, last) = (rows[0][0], rows[rows.len() - 1][0]);
    let tol = 1e-9 * end.max(1.0);
    if first > tol || last < end - tol {
        return Err(perr(
            columns_entry.line,
            format!("schedule spans [{first}, {last}] but the run needs [0, {end}] (dt * steps)"),
        ));
    }

    if mode == Mode::Reconstruct {
        let step = rows[1][0] - rows[0][0];
        for (k, ((line, _), row)) in raw.schedule_rows.iter().zip(&rows).enumerate() {
            let expected_t = first + step * k as f64;
            if (row[0] - expected_t).abs() > 1e-9 * step {
                return Err(perr(*line, format!("reconstruct schedule must be uniform: t = {} expected {expected_t}", row[0])));
            }
        }
        let ratio = step / cfg.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(perr(
                columns_entry.line,
                format!("sample spacing {step} must be a whole multiple of dt = {}", cfg.dt),
            ));
        }
        if first.abs() > tol {
            return Err(perr(raw.schedule_rows[0].0, "reconstruct schedule must start at t = 0"));
        }
    }
    Ok(Some(ScheduleTable { columns, rows }))
}

/// Parses scenario text; errors carry the offending line.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let raw = tokenize(text)?;
    let mut top = Section::new(&raw, "");
    let mode_entry = top.required("mode")?;
    let mode: Mode = mode_entry.value.parse().map_err(|m| perr(mode_entry.line, m))?;
    let seed = match top.find("seed") {
        Some(e) => e.value.parse::<u64>().map_err(|_| perr(e.line, "seed must be a non-negative integer"))?,
        None => 42,
    };
    let trials = top.find("trials").map(parse_count).transpose()?.unwrap_or(mode.default_trials());
    if trials == 0 {
        return Err(perr(top.find("trials").map(|e| e.line).unwrap_or(0), "trials must be positive"));
    }
    top.finish()?;

    let params = parse_params(&raw)?;
    let (initial, mu) = parse_initial(&raw)?;
    if mu.is_some() && !matches!(mode, Mode::Kinematic | Mode::Reconstruct) {
        let line = raw.sections["initial"].1.iter().find(|e| e.key == "mu").map(|e| e.line).unwrap_or(0);
        return Err(perr(line, format!("`mu` is only used in kinematic and reconstruct modes, not {}", mode.as_str())));
    }
    let integrator = parse_integrator(&raw)?;
    let schedule = parse_schedule(&raw, mode, &integrator)?;
    let thresholds = parse_thresholds(&raw)?;
    Ok(Scenario { mode, params, initial, mu, integrator, schedule, seed, trials, thresholds })
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario_str(&std::fs::read_to_string(path)?)
}

fn list(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn row_major(m: &Matrix3<f64>) -> String {
    list((0..3).flat_map(|i| (0..3).map(move |j| m[(i, j)])))
}

/// Writes `s` in the scenario format; parsing the result gives back `s`.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let p = &s.params;
    let i = &s.initial;
    let _ = writeln!(out, "mode = {}\nseed = {}\ntrials = {}\n", s.mode.as_str(), s.seed, s.trials);
    let _ = writeln!(
        out,
        "[params]\njx = {:?}\njz = {:?}\nit = {:?}\nig = {:?}\nis_g = {:?}\nspacecraft_inertia = {}\n",
        p.jx(),
        p.jz(),
        p.it(),
        p.ig(),
        p.is_g(),
        row_major(p.spacecraft())
    );
    let _ = writeln!(
        out,
        "[initial]\nattitude = {}\nbeta = {:?}\ngamma = {:?}\nomega = {}\nbeta_dot = {:?}\ngamma_dot = {:?}",
        row_major(i.attitude.matrix()),
        i.shape.beta,
        i.shape.gamma,
        list(i.omega.iter().copied()),
        i.shape.beta_dot,
        i.shape.gamma_dot
    );
    if let Some(mu) = &s.mu {
        let _ = writeln!(out, "mu = {}", list(mu.0.iter().copied()));
    }
    let c = &s.integrator;
    let _ = writeln!(
        out,
        "\n[integrator]\ndt = {:?}\nsteps = {}\nscheme = {}\nreproject_every = {}",
        c.dt,
        c.steps,
        c.scheme.as_str(),
        c.reproject_every
    );
    if let Some(table) = &s.schedule {
        let _ = writeln!(out, "\n[schedule]\ncolumns = {}", table.columns.join(", "));
        for row in &table.rows {
            let _ = writeln!(out, "{}", list(row.iter().copied()));
        }
    }
    let set: Vec<_> = Thresholds::KEYS.iter().filter_map(|k| s.thresholds.get(k).map(|v| (k, v))).collect();
    if !set.is_empty() {
        let _ = writeln!(out, "\n[thresholds]");
        for (k, v) in set {
            let _ = writeln!(out, "{k} = {v:?}");
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Below,
    Above,
}

/// One pass/fail comparison of a measured value against a limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.to_string(), value, bound: Bound::Below, limit }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::Below => self.value < self.limit,
            Bound::Above => self.value > self.limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub mode: Mode,
    pub mu_drift_rel: Option<f64>,
    pub ke_drift_rel: Option<f64>,
    pub ortho_err_max: Option<f64>,
    pub srj_residual_max: Option<f64>,
    pub term_residuals: Vec<(String, f64)>,
    pub connection_axiom_residuals: Vec<VerifyRow>,
    pub holonomy_vector: Option<Vector3<f64>>,
    pub reconstruction_mismatch: Option<f64>,
    pub checks: Vec<Check>,
}

impl DiagnosticReport {
    fn new(mode: Mode) -> Self {
        Self {
            mode,
            mu_drift_rel: None,
            ke_drift_rel: None,
            ortho_err_max: None,
            srj_residual_max: None,
            term_residuals: Vec::new(),
            connection_axiom_residuals: Vec::new(),
            holonomy_vector: None,
            reconstruction_mismatch: None,
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// `key = value` lines, ending with `status = pass|fail`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode = {}", self.mode.as_str());
        let mut opt = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                let _ = writeln!(out, "{k} = {v:e}");
            }
        };
        opt("mu_drift_rel", self.mu_drift_rel);
        opt("ke_drift_rel", self.ke_drift_rel);
        opt("ortho_err_max", self.ortho_err_max);
        opt("srj_residual_max", self.srj_residual_max);
        opt("reconstruction_mismatch", self.reconstruction_mismatch);
        if let Some(h) = self.holonomy_vector {
            let _ = writeln!(out, "holonomy_vector = {:e}, {:e}, {:e}", h.x, h.y, h.z);
            let _ = writeln!(out, "holonomy_angle = {:e}", h.norm());
        }
        for (k, (label, v)) in self.term_residuals.iter().enumerate() {
            let _ = writeln!(out, "term_{} = {v:e}  # {label}", k + 1);
        }
        for row in &self.connection_axiom_residuals {
            let _ = writeln!(
                out,
                "verify.{} = {:e}  # tolerance {:e}",
                row.name.replace(' ', "_"),
                row.residual,
                row.tolerance
            );
        }
        for c in &self.checks {
            let op = match c.bound {
                Bound::Below => "<",
                Bound::Above => ">",
            };
            let verdict = if c.passed() { "pass" } else { "fail" };
            let _ = writeln!(out, "check.{} = {verdict}  # {:e} {op} {:e}", c.name, c.value, c.limit);
        }
        let _ = writeln!(out, "status = {}", if self.passed() { "pass" } else { "fail" });
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Option<Trajectory>,
    pub report: DiagnosticReport,
}

fn record_trajectory(report: &mut DiagnosticReport, t: &Trajectory, th: &Thresholds, check_energy: bool) {
    let mu = t.mu_drift_rel();
    let ke = t.ke_drift_rel();
    let ortho = t.ortho_err_max();
    report.mu_drift_rel = Some(mu);
    report.ke_drift_rel = Some(ke);
    report.ortho_err_max = Some(ortho);
    report.checks.push(Check::below("mu_drift_rel", mu, th.mu_drift_rel.unwrap_or(1e-8)));
    if let Some(limit) = th.ke_drift_rel.or(check_energy.then_some(1e-8)) {
        report.checks.push(Check::below("ke_drift_rel", ke, limit));
    }
    report.checks.push(Check::below("ortho_err_max", ortho, th.ortho_err_max.unwrap_or(1e-10)));
}

/// Runs a scenario. Errors are input problems or numerical aborts; threshold
/// violations are reported through [`DiagnosticReport::passed`].
pub fn run(s: &Scenario) -> Result<RunOutput> {
    let mut report = DiagnosticReport::new(s.mode);
    let th = &s.thresholds;
    let p = &s.params;
    let cfg = &s.integrator;
    let trajectory = match s.mode {
        Mode::Dynamic => {
            let schedule = s.schedule.as_ref().map(ScheduleTable::schedule).transpose()?;
            let traj = match &schedule {
                Some(law) => simulate(&s.initial, &Driver::Dynamic(law), cfg, p)?,
                None => simulate(&s.initial, &Driver::Dynamic(&ZeroTorque), cfg, p)?,
            };
            record_trajectory(&mut report, &traj, th, schedule.is_none());
            Some(traj)
        }
        Mode::Kinematic => {
            let table = s.schedule.as_ref().ok_or_else(|| Error::InvalidConfig("kinematic mode needs a schedule".into()))?;
            let rates = table.schedule()?;
            let mu = s.mu.unwrap_or_else(|| momentum_map(&s.initial, p));
            let traj = simulate(&s.initial, &Driver::Kinematic { rates: &rates, mu }, cfg, p)?;
            record_trajectory(&mut report, &traj, th, false);
            Some(traj)
        }
        Mode::Reconstruct => {
            let table = s.schedule.as_ref().ok_or_else(|| Error::InvalidConfig("reconstruct mode needs a schedule".into()))?;
            let path = table.shape_path()?;
            let mu = s.mu.unwrap_or_default();
            let traj = reconstruct_path(&path, &mu, &s.initial.attitude, cfg, p)?;
            record_trajectory(&mut report, &traj, th, false);

            // the same shape motion through the full dynamics
            let mut start = SystemState { attitude: s.initial.attitude, shape: path.sample(0.0).state(), omega: Vector3::zeros() };
            start.omega = reconstruction_velocity(&start, &mu, p);
            let tracking = TrackingTorques { reference: &path };
            let full = simulate(&start, &Driver::Dynamic(&tracking), cfg, p)?;
            let mismatch = traj
                .states
                .iter()
                .zip(&full.states)
                .map(|(a, b)| a.attitude.geodesic_distance(&b.attitude))
                .fold(0.0, f64::max);
            report.reconstruction_mismatch = Some(mismatch);
            report.checks.push(Check::below("reconstruction_mismatch", mismatch, th.reconstruction_mismatch.unwrap_or(1e-6)));

            let closed = path.closure_gap() <= crate::connection::LOOP_CLOSURE_TOLERANCE
                && (path.end() - cfg.duration()).abs() <= 1e-9 * cfg.duration().max(1.0);
            if closed {
                let net = s.initial.attitude.transpose() * traj.final_state().attitude;
                let h = log_so3(&net);
                report.holonomy_vector = Some(h);
                if let Some(limit) = th.holonomy_min {
                    report.checks.push(Check { name: "holonomy_min".into(), value: h.norm(), bound: Bound::Above, limit });
                }
            } else if th.holonomy_min.is_some() {
                return Err(Error::OpenLoop { gap: path.closure_gap() });
            }
            Some(traj)
        }
        Mode::CompareSrj => {
            let c = compare_srj(Some(p), s.seed, s.trials);
            report.srj_residual_max = Some(c.rhs_residual_max);
            report.term_residuals = c.terms.iter().map(|(l, v)| (l.to_string(), *v)).collect();
            report.checks.push(Check::below("srj_residual_max", c.rhs_residual_max, th.srj_residual_max.unwrap_or(1e-10)));
            report.checks.push(Check::below("term_residual_max", c.term_residual_max(), th.term_residual_max.unwrap_or(1e-13)));
            None
        }
        Mode::Verify => {
            let rows = verify_suite(s.seed, s.trials);
            for row in &rows {
                report.checks.push(Check::below(&row.name.replace(' ', "_"), row.residual, row.tolerance));
            }
            report.connection_axiom_residuals = rows;
            None
        }
    };
    Ok(RunOutput { trajectory, report })
}

pub const CSV_HEADER: [&str; 22] = [
    "t", "R11", "R12", "R13", "R21", "R22", "R23", "R31", "R32", "R33", "beta", "gamma", "Omega1", "Omega2", "Omega3",
    "beta_dot", "gamma_dot", "mu1", "mu2", "mu3", "ke", "ortho_err",
];

/// Writes one row per sample with 17 significant digits.
pub fn write_trajectory_csv<W: Write>(t: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for ((time, s), d) in t.times.iter().zip(&t.states).zip(&t.diagnostics) {
        let r = s.attitude.matrix();
        let mut row: Vec<f64> = Vec::with_capacity(22);
        row.push(*time);
        row.extend((0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])));
        row.extend([s.shape.beta, s.shape.gamma]);
        row.extend(s.omega.iter().copied());
        row.extend([s.shape.beta_dot, s.shape.gamma_dot]);
        row.extend(d.mu.iter().copied());
        row.extend([d.kinetic_energy, d.orthonormality_error]);
        w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
mode = dynamic

[params]
jx = 0.4
jz = 1.2
it = 0.3
ig = 0.5
is_g = 0.2
spacecraft_inertia = 12, 0, 0, 0, 9, 0, 0, 0, 15
";

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(s.mode, Mode::Dynamic);
        assert_eq!(s.integrator, IntegratorConfig { dt: 1e-3, steps: 10_000, scheme: Scheme::LieRk4, reproject_every: 100 });
        assert_eq!(s.initial, SystemState::default());
        assert!(s.schedule.is_none());
    }

    #[test]
    fn negative_inertia_is_rejected_at_its_line() {
        let text = MINIMAL.replace("12, 0, 0", "-12, 0, 0");
        let err = parse_scenario_str(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("spacecraft inertia not positive definite"), "{msg}");
        assert!(matches!(err, Error::Parse { line: 9, .. }), "{msg}");
    }

    #[test]
    fn slightly_skewed_attitude_is_repaired() {
        let c = 1e-8;
        let text = format!("{MINIMAL}\n[initial]\nattitude = 1, {c}, 0, 0, 1, 0, 0, 0, 1\n");
        let s = parse_scenario_str(&text).unwrap();
        assert!(s.initial.attitude.orthonormality_error() < 1e-14);
        assert!((s.initial.attitude.matrix() - Matrix3::identity()).amax() < 1e-8);

        let text = format!("{MINIMAL}\n[initial]\nattitude = 1, 0.01, 0, 0, 1, 0, 0, 0, 1\n");
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 12, .. }), "{err}");
    }

    #[test]
    fn errors_point_at_lines() {
        let missing = MINIMAL.replace("ig = 0.5\n", "");
        assert!(matches!(parse_scenario_str(&missing), Err(Error::Parse { line: 3, .. })));
        let unknown = format!("{MINIMAL}wobble = 3\n");
        assert!(matches!(parse_scenario_str(&unknown), Err(Error::Parse { line: 10, .. })));
        let bad = MINIMAL.replace("jz = 1.2", "jz = one");
        assert!(matches!(parse_scenario_str(&bad), Err(Error::Parse { line: 5, .. })));
        assert!(matches!(parse_scenario_str("mode = flying\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn schedule_must_cover_the_run_and_match_columns() {
        let base = format!("{MINIMAL}\n[integrator]\ndt = 0.01\nsteps = 100\n\n[schedule]\n");
        let short = format!("{base}columns = t, tau_g, tau_w\n0, 0, 0\n0.5, 0, 0\n");
        let err = parse_scenario_str(&short).unwrap_err();
        assert!(err.to_string().contains("dt * steps"), "{err}");
        let wrong = format!("{base}columns = t, u_beta, u_gamma\n0, 0, 0\n1, 0, 0\n");
        assert!(parse_scenario_str(&wrong).is_err());
        let ragged = format!("{base}columns = t, tau_g, tau_w\n0, 0, 0\n1, 0\n");
        assert!(matches!(parse_scenario_str(&ragged), Err(Error::Parse { line: 18, .. })));
        let ok = format!("{base}columns = t, tau_g, tau_w\n0, 0, 0\n1, 0, 0\n");
        assert_eq!(parse_scenario_str(&ok).unwrap().schedule.unwrap().rows.len(), 2);
    }

    #[test]
    fn reconstruct_spacing_must_align_with_dt() {
        let text = "mode = reconstruct\n[params]\njx = 0.4\njz = 1.2\nit = 0.3\nig = 0.5\nis_g = 0.2\nspacecraft_inertia = 12, 0, 0, 0, 9, 0, 0, 0, 15\n\
[integrator]\ndt = 0.003\nsteps = 2\n[schedule]\ncolumns = t, beta, gamma, beta_dot, gamma_dot\n0, 0, 0, 0, 0\n0.005, 0, 0, 0, 0\n0.01, 0, 0, 0, 0\n";
        let err = parse_scenario_str(text).unwrap_err();
        assert!(err.to_string().contains("whole multiple"), "{err}");
    }

    #[test]
    fn serialization_round_trips() {
        let text = format!(
            "{MINIMAL}\n[initial]\nomega = 0.1, -0.25, 1e-7\nbeta = 0.3\n\n[integrator]\ndt = 0.01\nsteps = 100\n\n[schedule]\ncolumns = t, tau_g, tau_w\n0, 0.1, 0\n0.5, 0.2, 0.3\n1, 0, 0\n\n[thresholds]\nke_drift_rel = 0.5\n"
        );
        let s = parse_scenario_str(&text).unwrap();
        let again = parse_scenario_str(&serialize_scenario(&s)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn torque_free_run_conserves_momentum() {
        let text = format!("{MINIMAL}\n[initial]\nomega = 0.3, -0.5, 0.4\ngamma_dot = 20\n\n[integrator]\nsteps = 2000\n");
        let s = parse_scenario_str(&text).unwrap();
        let out = run(&s).unwrap();
        assert!(out.report.passed(), "{}", out.report.to_text());
        assert!(out.report.mu_drift_rel.unwrap() < 1e-8);
        assert_eq!(out.trajectory.unwrap().states.len(), 2001);
    }

    #[test]
    fn csv_has_fixed_columns_and_is_deterministic() {
        let text = format!("{MINIMAL}\n[initial]\nomega = 0.3, -0.5, 0.4\n\n[integrator]\nsteps = 50\n");
        let s = parse_scenario_str(&text).unwrap();
        let write = || {
            let mut buf = Vec::new();
            write_trajectory_csv(run(&s).unwrap().trajectory.as_ref().unwrap(), &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = write();
        assert_eq!(a, write());
        let mut lines = a.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 22);
        assert_eq!(lines.count(), 51);
    }

    #[test]
    fn threshold_violation_fails_the_report() {
        let text = format!("{MINIMAL}\n[initial]\nomega = 0.3, -0.5, 0.4\n\n[integrator]\nsteps = 50\n\n[thresholds]\nmu_drift_rel = 0\n");
        let out = run(&parse_scenario_str(&text).unwrap()).unwrap();
        assert!(!out.report.passed());
        assert!(out.report.to_text().contains("status = fail"));
    }
}
