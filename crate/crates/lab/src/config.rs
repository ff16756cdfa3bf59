//! Run configuration.
//!
//! A config is a TOML document with exactly one mode section and an optional
//! `[sweep]` table:
//!
//! ```toml
//! output = "out"            # optional
//! [classical]               # or adiabatic, floquet, propagate, duffing
//! r = 0.51
//! [sweep]
//! r = { start = 0.40, stop = 0.60, step = 0.01 }
//! delta = [0.0, 0.01]
//! ```
//!
//! Keys not listed in the section structs below are rejected. Every sweep
//! axis must name a numeric key of the mode section.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use phase_pump::ModelParams;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    Classical,
    Adiabatic,
    Floquet,
    Propagate,
    Duffing,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Classical, Mode::Adiabatic, Mode::Floquet, Mode::Propagate, Mode::Duffing];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Adiabatic => "adiabatic",
            Mode::Floquet => "floquet",
            Mode::Propagate => "propagate",
            Mode::Duffing => "duffing",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalSection {
    pub r: f64,
    pub delta: f64,
    pub omega: f64,
    pub mu: f64,
    pub settle_cycles: u32,
    pub measure_cycles: u32,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection {
            r: 0.5,
            delta: 0.0,
            omega: TAU * 2e-4,
            mu: 1.0,
            settle_cycles: 1,
            measure_cycles: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdiabaticSection {
    pub r: f64,
    pub m_e: f64,
    pub mu: f64,
    pub omega: f64,
    pub k_max: u32,
    pub theta_grid: u32,
    pub n_excited: u32,
    /// "finite-difference" or "perturbative".
    pub derivative: String,
}

impl Default for AdiabaticSection {
    fn default() -> Self {
        AdiabaticSection {
            r: 0.55,
            m_e: 1.0,
            mu: 1.0,
            omega: TAU * 2e-4,
            k_max: 40,
            theta_grid: 2048,
            n_excited: 12,
            derivative: "finite-difference".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetSection {
    pub r: f64,
    pub m_e: f64,
    pub mu: f64,
    pub omega: f64,
    pub k_max: u32,
    pub q_max_start: u32,
    pub q_max_limit: u32,
    pub edge_tol: f64,
}

impl Default for FloquetSection {
    fn default() -> Self {
        FloquetSection {
            r: 0.4,
            m_e: 10.0,
            mu: 1.0,
            omega: 0.0016,
            k_max: 12,
            q_max_start: 64,
            q_max_limit: 4096,
            edge_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateSection {
    pub r: f64,
    pub m_e: f64,
    pub mu: f64,
    pub omega: f64,
    pub k_max: u32,
    pub dt: f64,
    pub cycles: u32,
}

impl Default for PropagateSection {
    fn default() -> Self {
        PropagateSection {
            r: 0.4,
            m_e: 10.0,
            mu: 1.0,
            omega: 0.0016,
            k_max: 12,
            dt: 0.012,
            cycles: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuffingSection {
    /// "static", "parametric" or "nonlinear-parametric".
    pub kind: String,
    pub omega1: f64,
    pub omega2: f64,
    pub gamma: f64,
    pub a: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Initial φ₂ − φ₁.
    pub phi0: f64,
    /// Record length; 0 picks one from the predicted coupling.
    pub t_end: f64,
    /// Excluded transient; 0 means 3/γ.
    pub transient: f64,
    pub samples_per_period: u32,
}

impl Default for DuffingSection {
    fn default() -> Self {
        DuffingSection {
            kind: "static".into(),
            omega1: 1.0,
            omega2: 1.0,
            gamma: 0.01,
            a: 0.005,
            kappa1: 0.002,
            kappa2: 0.002,
            delta1: 0.0,
            delta2: 0.0,
            theta1: 0.0,
            theta2: 0.0,
            phi0: PI - 0.2,
            t_end: 0.0,
            transient: 0.0,
            samples_per_period: 16,
        }
    }
}

/// Values of one sweep axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    List(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AxisSpec {
    /// Explicit values; ranges include `stop` when it is hit to within 1e−9 steps.
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            AxisSpec::List(v) => {
                if v.is_empty() {
                    return Err("empty value list".into());
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err("non-finite value".into());
                }
                Ok(v.clone())
            }
            AxisSpec::Range(r) => {
                if !(r.step > 0.0) || !(r.stop >= r.start) || !r.start.is_finite() || !r.stop.is_finite() {
                    return Err("range needs finite start <= stop and step > 0".into());
                }
                let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize + 1;
                if n > 1_000_000 {
                    return Err("range has more than 10^6 points".into());
                }
                Ok((0..n).map(|i| round_sig(r.start + i as f64 * r.step, 12)).collect())
            }
        }
    }
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classical: Option<ClassicalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adiabatic: Option<AdiabaticSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    floquet: Option<FloquetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    propagate: Option<PropagateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duffing: Option<DuffingSection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    sweep: BTreeMap<String, AxisSpec>,
}

/// The parameter block of the selected mode.
#[derive(Clone, Debug, PartialEq)]
pub enum Section {
    Classical(ClassicalSection),
    Adiabatic(AdiabaticSection),
    Floquet(FloquetSection),
    Propagate(PropagateSection),
    Duffing(DuffingSection),
}

impl Section {
    pub fn default_for(mode: Mode) -> Section {
        match mode {
            Mode::Classical => Section::Classical(Default::default()),
            Mode::Adiabatic => Section::Adiabatic(Default::default()),
            Mode::Floquet => Section::Floquet(Default::default()),
            Mode::Propagate => Section::Propagate(Default::default()),
            Mode::Duffing => Section::Duffing(Default::default()),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Section::Classical(_) => Mode::Classical,
            Section::Adiabatic(_) => Mode::Adiabatic,
            Section::Floquet(_) => Mode::Floquet,
            Section::Propagate(_) => Mode::Propagate,
            Section::Duffing(_) => Mode::Duffing,
        }
    }

    pub fn to_table(&self) -> toml::Table {
        let v = match self {
            Section::Classical(s) => toml::Table::try_from(s),
            Section::Adiabatic(s) => toml::Table::try_from(s),
            Section::Floquet(s) => toml::Table::try_from(s),
            Section::Propagate(s) => toml::Table::try_from(s),
            Section::Duffing(s) => toml::Table::try_from(s),
        };
        v.expect("sections serialize to tables")
    }

    fn from_table(mode: Mode, t: toml::Table) -> Result<Section, String> {
        let v = toml::Value::Table(t);
        let r = match mode {
            Mode::Classical => v.try_into().map(Section::Classical),
            Mode::Adiabatic => v.try_into().map(Section::Adiabatic),
            Mode::Floquet => v.try_into().map(Section::Floquet),
            Mode::Propagate => v.try_into().map(Section::Propagate),
            Mode::Duffing => v.try_into().map(Section::Duffing),
        };
        r.map_err(|e| e.to_string())
    }

    /// Copy with numeric key `name` set to `value`.
    pub fn with_value(&self, name: &str, value: f64) -> Result<Section, String> {
        let mut t = self.to_table();
        let slot = t.get_mut(name).ok_or_else(|| format!("no parameter `{name}`"))?;
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(format!("`{name}` takes non-negative integers"));
                }
                toml::Value::Integer(value as i64)
            }
            _ => return Err(format!("`{name}` is not numeric")),
        };
        Section::from_table(self.mode(), t)
    }

    /// Numeric value of `name`, if any.
    pub fn value(&self, name: &str) -> Option<f64> {
        match self.to_table().get(name)? {
            toml::Value::Float(x) => Some(*x),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = self.mode().as_str();
        let f = |k: &str| format!("{m}.{k}");
        let positive = |k: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(invalid(f(k), "must be positive")) };
        let r_ok = |r: f64| {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(invalid(f("r"), "r out of [0,1]"))
            }
        };
        let finite = |k: &str, v: f64| if v.is_finite() { Ok(()) } else { Err(invalid(f(k), "must be finite")) };
        match self {
            Section::Classical(s) => {
                r_ok(s.r)?;
                finite("delta", s.delta)?;
                positive("mu", s.mu)?;
                if s.omega == 0.0 || !s.omega.is_finite() {
                    return Err(invalid(f("omega"), "must be finite and nonzero"));
                }
                if s.measure_cycles == 0 {
                    return Err(invalid(f("measure_cycles"), "must be at least 1"));
                }
            }
            Section::Adiabatic(s) => {
                r_ok(s.r)?;
                positive("m_e", s.m_e)?;
                positive("mu", s.mu)?;
                if s.omega == 0.0 || !s.omega.is_finite() {
                    return Err(invalid(f("omega"), "must be finite and nonzero"));
                }
                if s.k_max < 2 {
                    return Err(invalid(f("k_max"), "must be at least 2"));
                }
                if s.theta_grid < 256 {
                    return Err(invalid(f("theta_grid"), "must be at least 256"));
                }
                if s.n_excited < 1 || s.n_excited + 1 > 2 * s.k_max + 1 {
                    return Err(invalid(f("n_excited"), "must be in 1..=2*k_max"));
                }
                if !matches!(s.derivative.as_str(), "finite-difference" | "perturbative") {
                    return Err(invalid(f("derivative"), "expected finite-difference or perturbative"));
                }
            }
            Section::Floquet(s) => {
                r_ok(s.r)?;
                positive("m_e", s.m_e)?;
                positive("mu", s.mu)?;
                if s.omega == 0.0 || !s.omega.is_finite() {
                    return Err(invalid(f("omega"), "must be finite and nonzero"));
                }
                if s.k_max < 2 {
                    return Err(invalid(f("k_max"), "must be at least 2"));
                }
                if s.q_max_start < 1 || s.q_max_limit < s.q_max_start {
                    return Err(invalid(f("q_max_limit"), "need 1 <= q_max_start <= q_max_limit"));
                }
                positive("edge_tol", s.edge_tol)?;
            }
            Section::Propagate(s) => {
                r_ok(s.r)?;
                positive("m_e", s.m_e)?;
                positive("mu", s.mu)?;
                if s.omega == 0.0 || !s.omega.is_finite() {
                    return Err(invalid(f("omega"), "must be finite and nonzero"));
                }
                if s.k_max < 2 {
                    return Err(invalid(f("k_max"), "must be at least 2"));
                }
                positive("dt", s.dt)?;
                if s.cycles == 0 {
                    return Err(invalid(f("cycles"), "must be at least 1"));
                }
            }
            Section::Duffing(s) => {
                if !matches!(s.kind.as_str(), "static" | "parametric" | "nonlinear-parametric") {
                    return Err(invalid(f("kind"), "expected static, parametric or nonlinear-parametric"));
                }
                positive("omega1", s.omega1)?;
                positive("omega2", s.omega2)?;
                positive("gamma", s.gamma)?;
                for (k, v) in [
                    ("a", s.a),
                    ("kappa1", s.kappa1),
                    ("kappa2", s.kappa2),
                    ("delta1", s.delta1),
                    ("delta2", s.delta2),
                    ("theta1", s.theta1),
                    ("theta2", s.theta2),
                    ("phi0", s.phi0),
                ] {
                    finite(k, v)?;
                }
                if !(s.t_end >= 0.0) || !(s.transient >= 0.0) {
                    return Err(invalid(f("t_end"), "t_end and transient must be >= 0"));
                }
                if s.t_end > 0.0 && s.transient >= s.t_end {
                    return Err(invalid(f("transient"), "must be shorter than t_end"));
                }
                if s.samples_per_period < 8 {
                    return Err(invalid(f("samples_per_period"), "must be at least 8"));
                }
            }
        }
        Ok(())
    }

    /// Model parameters for the quantum and classical modes.
    pub fn model_params(&self) -> Option<ModelParams> {
        match self {
            Section::Classical(s) => Some(ModelParams {
                r: s.r,
                mu: s.mu,
                delta: s.delta,
                omega: s.omega,
                m_e: 1.0,
            }),
            Section::Adiabatic(s) => Some(ModelParams::quantum(s.r, s.m_e, s.omega).with_mu(s.mu)),
            Section::Floquet(s) => Some(ModelParams::quantum(s.r, s.m_e, s.omega).with_mu(s.mu)),
            Section::Propagate(s) => Some(ModelParams::quantum(s.r, s.m_e, s.omega).with_mu(s.mu)),
            Section::Duffing(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub spec: AxisSpec,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub section: Section,
    /// Ordered by name; the first axis varies slowest.
    pub sweep: Vec<SweepAxis>,
    pub output: Option<String>,
}

impl RunConfig {
    pub fn new(section: Section) -> Self {
        RunConfig {
            section,
            sweep: Vec::new(),
            output: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.section.mode()
    }

    /// Canonical TOML: every section key written out, mode stated.
    pub fn to_toml_string(&self) -> String {
        let mut raw = RawConfig {
            mode: Some(self.mode().as_str().into()),
            output: self.output.clone(),
            ..Default::default()
        };
        match &self.section {
            Section::Classical(s) => raw.classical = Some(s.clone()),
            Section::Adiabatic(s) => raw.adiabatic = Some(s.clone()),
            Section::Floquet(s) => raw.floquet = Some(s.clone()),
            Section::Propagate(s) => raw.propagate = Some(s.clone()),
            Section::Duffing(s) => raw.duffing = Some(s.clone()),
        }
        raw.sweep = self.sweep.iter().map(|a| (a.name.clone(), a.spec.clone())).collect();
        toml::to_string(&raw).expect("config serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_toml_string().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Sections for every point of the Cartesian product, in row order.
    pub fn points(&self) -> Vec<(Vec<(String, f64)>, Section)> {
        let mut out = vec![(Vec::new(), self.section.clone())];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(out.len() * axis.values.len());
            for (coords, sec) in &out {
                for &v in &axis.values {
                    let mut c = coords.clone();
                    c.push((axis.name.clone(), v));
                    let s = sec.with_value(&axis.name, v).expect("axes are checked at parse time");
                    next.push((c, s));
                }
            }
            out = next;
        }
        out
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let mut present = Vec::new();
    if let Some(s) = &raw.classical {
        present.push(Section::Classical(s.clone()));
    }
    if let Some(s) = &raw.adiabatic {
        present.push(Section::Adiabatic(s.clone()));
    }
    if let Some(s) = &raw.floquet {
        present.push(Section::Floquet(s.clone()));
    }
    if let Some(s) = &raw.propagate {
        present.push(Section::Propagate(s.clone()));
    }
    if let Some(s) = &raw.duffing {
        present.push(Section::Duffing(s.clone()));
    }
    let named = match &raw.mode {
        Some(m) => Some(Mode::parse(m).ok_or_else(|| invalid("mode", format!("unknown mode `{m}`")))?),
        None => None,
    };
    if present.len() > 1 {
        let names: Vec<&str> = present.iter().map(|s| s.mode().as_str()).collect();
        return Err(invalid("mode", format!("exactly one mode section allowed, found {}", names.join(", "))));
    }
    let section = match (present.pop(), named) {
        (Some(s), Some(m)) if s.mode() != m => {
            return Err(invalid("mode", format!("mode `{m}` does not match section [{}]", s.mode())));
        }
        (Some(s), _) => s,
        (None, Some(m)) => Section::default_for(m),
        (None, None) => return Err(invalid("mode", "exactly one mode section is required")),
    };
    section.validate()?;
    let mut sweep = Vec::new();
    for (name, spec) in raw.sweep {
        let field = format!("sweep.{name}");
        if section.value(&name).is_none() {
            return Err(invalid(field, format!("not a numeric parameter of [{}]", section.mode())));
        }
        let values = spec.values().map_err(|m| invalid(&field, m))?;
        for &v in &values {
            let s = section.with_value(&name, v).map_err(|m| invalid(&field, m))?;
            s.validate().map_err(|e| match e {
                ConfigError::Validation { message, .. } => invalid(&field, format!("value {v}: {message}")),
                other => other,
            })?;
        }
        sweep.push(SweepAxis { name, spec, values });
    }
    Ok(RunConfig {
        section,
        sweep,
        output: raw.output,
    })
}
