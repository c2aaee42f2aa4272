//! Scenario configuration files: TOML with sections grid, kernel,
//! quadrature, time, init, diagnostics, output and a top-level seed.
//! Unknown keys are rejected with the offending key named; every omitted
//! key falls back to the SimConfig default.

use crate::solver::{InitKind, Scheme, SimConfig};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    seed: Option<u64>,
    grid: Option<GridSection>,
    kernel: Option<KernelSection>,
    quadrature: Option<QuadratureSection>,
    time: Option<TimeSection>,
    init: Option<InitSection>,
    diagnostics: Option<DiagnosticsSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_per_axis: Option<usize>,
    p_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    c_sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureSection {
    n_polar: Option<usize>,
    n_azimuth: Option<usize>,
    q_box_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    dt: Option<f64>,
    t_end: Option<f64>,
    scheme: Option<String>,
    conserve_projection: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnosticsSection {
    rho: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    every: Option<usize>,
}

/// Flat init table: `kind` selects the initial condition, the remaining
/// keys are the per-kind parameters. Kept flat so unknown keys are always
/// rejected by name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitSection {
    kind: Option<String>,
    n: Option<f64>,
    theta: Option<f64>,
    u: Option<[f64; 3]>,
    n1: Option<f64>,
    theta1: Option<f64>,
    u1: Option<[f64; 3]>,
    n2: Option<f64>,
    theta2: Option<f64>,
    u2: Option<[f64; 3]>,
    value: Option<f64>,
    lo: Option<[f64; 3]>,
    hi: Option<[f64; 3]>,
    eps: Option<f64>,
    base: Option<Box<InitSection>>,
    path: Option<String>,
}

fn need<T>(v: Option<T>, key: &str) -> Result<T, ScenarioError> {
    v.ok_or_else(|| ScenarioError::Invalid(format!("init.{key}: missing required key")))
}

impl InitSection {
    fn to_init(&self) -> Result<InitKind, ScenarioError> {
        let kind = self
            .kind
            .as_deref()
            .ok_or_else(|| ScenarioError::Invalid("init.kind: missing required key".into()))?;
        match kind {
            "juttner" => Ok(InitKind::Juttner {
                n: need(self.n, "n")?,
                theta: need(self.theta, "theta")?,
                u: self.u.unwrap_or([0.0; 3]),
            }),
            "two_bump" => Ok(InitKind::TwoBump {
                n1: need(self.n1, "n1")?,
                theta1: need(self.theta1, "theta1")?,
                u1: need(self.u1, "u1")?,
                n2: need(self.n2, "n2")?,
                theta2: need(self.theta2, "theta2")?,
                u2: need(self.u2, "u2")?,
            }),
            "box" => Ok(InitKind::Box {
                value: need(self.value, "value")?,
                lo: need(self.lo, "lo")?,
                hi: need(self.hi, "hi")?,
            }),
            "truncated" => {
                let base = self
                    .base
                    .as_ref()
                    .ok_or_else(|| ScenarioError::Invalid("init.base: missing required key".into()))?;
                Ok(InitKind::Truncated {
                    eps: need(self.eps, "eps")?,
                    base: std::boxed::Box::new(base.to_init()?),
                })
            }
            "file" => Ok(InitKind::File {
                path: need(self.path.clone(), "path")?,
            }),
            other => Err(ScenarioError::Invalid(format!(
                "init.kind: unknown kind \"{other}\" (expected juttner, two_bump, box, truncated, or file)"
            ))),
        }
    }
}

impl ScenarioFile {
    fn to_config(&self) -> Result<SimConfig, ScenarioError> {
        let mut cfg = SimConfig::default();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(g) = &self.grid {
            if let Some(n) = g.n_per_axis {
                cfg.n_per_axis = n;
            }
            if let Some(p) = g.p_max {
                cfg.p_max = p;
            }
        }
        if let Some(k) = &self.kernel {
            if let Some(c) = k.c_sigma {
                cfg.c_sigma = c;
            }
        }
        if let Some(q) = &self.quadrature {
            if let Some(v) = q.n_polar {
                cfg.n_polar = v;
            }
            if let Some(v) = q.n_azimuth {
                cfg.n_azimuth = v;
            }
            if let Some(v) = q.q_box_factor {
                cfg.q_box_factor = v;
            }
        }
        if let Some(t) = &self.time {
            cfg.dt = t.dt.or(cfg.dt);
            if let Some(v) = t.t_end {
                cfg.t_end = v;
            }
            if let Some(s) = &t.scheme {
                cfg.scheme = match s.as_str() {
                    "rk4" => Scheme::Rk4,
                    "exp_euler" => Scheme::ExpEuler,
                    other => {
                        return Err(ScenarioError::Invalid(format!(
                            "time.scheme: unknown scheme \"{other}\" (expected rk4 or exp_euler)"
                        )))
                    }
                };
            }
            if let Some(v) = t.conserve_projection {
                cfg.conserve_projection = v;
            }
        }
        if let Some(i) = &self.init {
            cfg.init = i.to_init()?;
        }
        if let Some(d) = &self.diagnostics {
            if let Some(v) = d.rho {
                cfg.rho = v;
            }
        }
        if let Some(o) = &self.output {
            if let Some(v) = o.every {
                cfg.output_every = v;
            }
        }
        cfg.validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string().replace("invalid configuration: ", "")))?;
        Ok(cfg)
    }
}

/// Parse a scenario file.
pub fn parse_scenario_str(text: &str) -> Result<SimConfig, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.message().to_string()))?;
    file.to_config()
}

/// Parse a scenario file with `section.key=value` command-line overrides
/// applied before validation.
pub fn parse_scenario_with_overrides(
    text: &str,
    sets: &[String],
) -> Result<SimConfig, ScenarioError> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.message().to_string()))?;
    for set in sets {
        let (path, raw) = set
            .split_once('=')
            .ok_or_else(|| ScenarioError::Invalid(format!("override \"{set}\": expected key=value")))?;
        let value = parse_value(raw.trim());
        insert_path(&mut table, path.trim(), value)?;
    }
    let file = ScenarioFile::deserialize(toml::Value::Table(table))
        .map_err(|e| ScenarioError::Parse(e.to_string()))?;
    file.to_config()
}

fn parse_value(raw: &str) -> toml::Value {
    // Reuse the TOML value grammar; fall back to a plain string.
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn insert_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ScenarioError> {
    let mut parts = path.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                ScenarioError::Invalid(format!("override path \"{path}\": \"{part}\" is not a table"))
            })?;
    }
    Err(ScenarioError::Invalid(format!("override path \"{path}\" is empty")))
}
