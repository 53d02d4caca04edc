//! Run configuration: JSON file, `key=value` overrides and flags.

use std::fmt;
use std::path::Path;

use entbench_core::protocol::StateSpec;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::CliError;

/// One value or a list of values; a list spans a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T>(pub Vec<T>);

impl<T> Grid<T> {
    pub fn one(x: T) -> Self {
        Grid(vec![x])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }
}

impl<T: Copy + fmt::Debug> Grid<T> {
    /// The single value of a scalar setting.
    pub fn single(&self, name: &str) -> Result<T, CliError> {
        match self.0.as_slice() {
            [x] => Ok(*x),
            v => Err(CliError::Invalid(format!("`{name}` must be a single value here, got {v:?}"))),
        }
    }
}

impl<T: Serialize> Serialize for Grid<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0.as_slice() {
            [x] => x.serialize(s),
            v => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Grid<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany<T> {
            Many(Vec<T>),
            One(T),
        }
        Ok(match OneOrMany::deserialize(d)? {
            OneOrMany::Many(v) => Grid(v),
            OneOrMany::One(x) => Grid(vec![x]),
        })
    }
}

/// A label given either as a string or as an integer (`eq=21`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Label(pub String);

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => Ok(Label(s)),
            Value::Number(n) => Ok(Label(n.to_string())),
            other => Err(de::Error::custom(format!("expected a label, got {other}"))),
        }
    }
}

fn d_default() -> Grid<usize> {
    Grid::one(2)
}
fn n_default() -> Grid<usize> {
    Grid::one(10)
}
fn eps_default() -> Grid<f64> {
    Grid::one(0.05)
}
fn alpha_default() -> Grid<f64> {
    Grid::one(0.05)
}
fn p_default() -> Grid<f64> {
    Grid::one(0.3)
}
fn p1_default() -> Grid<f64> {
    Grid::one(0.2)
}
fn p2_default() -> Grid<f64> {
    Grid::one(0.3)
}
fn p3_default() -> Grid<f64> {
    Grid::one(0.1)
}
fn eq_default() -> Grid<Label> {
    Grid::one(Label("21".into()))
}
fn target_default() -> Grid<Label> {
    Grid::one(Label("eq18".into()))
}
fn protocol_default() -> String {
    "one_way_t1".into()
}
fn delta_default() -> Grid<f64> {
    Grid::one(1.0)
}
fn t_default() -> Grid<f64> {
    Grid::one(3.0)
}
fn n_list_default() -> Vec<usize> {
    vec![100, 1000, 10_000]
}
fn direction_default() -> String {
    "le".into()
}
fn dist_default() -> String {
    "binomial".into()
}
fn out_default() -> String {
    "entbench-out".into()
}

/// Every setting of a run. Settings a command does not use are carried
/// along unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default = "d_default")]
    pub d: Grid<usize>,
    #[serde(default = "n_default")]
    pub n: Grid<usize>,
    #[serde(default = "eps_default")]
    pub epsilon: Grid<f64>,
    #[serde(default = "alpha_default")]
    pub alpha: Grid<f64>,
    /// Defect of the state, or the alternative `q` of a classical test.
    #[serde(default = "p_default")]
    pub p: Grid<f64>,
    #[serde(default = "p1_default")]
    pub p1: Grid<f64>,
    #[serde(default = "p2_default")]
    pub p2: Grid<f64>,
    #[serde(default = "p3_default")]
    pub p3: Grid<f64>,
    /// Closed forms for `exact`.
    #[serde(default = "eq_default")]
    pub eq: Grid<Label>,
    #[serde(default = "protocol_default")]
    pub protocol: String,
    /// Defaults to `isotropic` with the first `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_state: Option<StateSpec>,
    /// Defaults per command: 100000 for `simulate`, 1000 for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "out_default")]
    pub out_dir: String,
    /// Operators for `twirl-verify`.
    #[serde(default = "target_default")]
    pub target: Grid<Label>,
    #[serde(default = "delta_default")]
    pub delta: Grid<f64>,
    #[serde(default = "t_default")]
    pub t: Grid<f64>,
    #[serde(default = "n_list_default")]
    pub n_list: Vec<usize>,
    /// `le` or `ge` null hypothesis for `classical`.
    #[serde(default = "direction_default")]
    pub direction: String,
    /// `binomial` or `poisson` for `classical`.
    #[serde(default = "dist_default")]
    pub dist: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Map::new())).expect("all fields have defaults")
    }
}

/// Parses one override value: empty is an empty list, commas make a list,
/// anything that is not JSON is a string.
pub fn parse_value(raw: &str) -> Value {
    if raw.is_empty() {
        return Value::Array(Vec::new());
    }
    let trimmed = raw.trim();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        if let Ok(v) = serde_json::from_str(trimmed) {
            return v;
        }
    }
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(|s| scalar(s.trim())).collect());
    }
    scalar(trimmed)
}

fn scalar(s: &str) -> Value {
    match serde_json::from_str::<Value>(s) {
        Ok(Value::Number(n)) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() && x.fract() == 0.0 && x.abs() < 9e15 && x >= 0.0 => Value::from(x as u64),
            _ => Value::Number(n),
        },
        Ok(v @ (Value::Bool(_) | Value::Null)) => v,
        _ => Value::String(s.to_string()),
    }
}

/// Sets `value` at a dotted path, creating objects on the way.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Invalid(format!("bad override key `{key}`")));
        }
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Reads a config file. A run manifest is accepted in place of a config;
/// its resolved config is used.
pub fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    match v {
        Value::Object(mut o) if o.contains_key("tool_version") && o.contains_key("config") => {
            Ok(o.remove("config").expect("checked"))
        }
        Value::Object(_) => Ok(v),
        _ => Err(CliError::Invalid(format!("{}: config must be a JSON object", path.display()))),
    }
}

/// Command-line settings layered over the file.
#[derive(Clone, Debug, Default)]
pub struct Layers {
    pub file: Option<Value>,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<String>,
}

/// File, then `key=value` overrides, then flags; `command` must agree
/// with any command recorded in the file.
pub fn resolve(command: &str, layers: &Layers) -> Result<RunConfig, CliError> {
    let mut v = layers.file.clone().unwrap_or_else(|| Value::Object(Map::new()));
    for ov in &layers.overrides {
        let (k, raw) = ov
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("override `{ov}` is not key=value")))?;
        set_path(&mut v, k.trim(), parse_value(raw))?;
    }
    if let Some(s) = layers.seed {
        set_path(&mut v, "seed", Value::from(s))?;
    }
    if let Some(t) = layers.trials {
        set_path(&mut v, "trials", Value::from(t))?;
    }
    if let Some(s) = layers.samples {
        set_path(&mut v, "samples", Value::from(s))?;
    }
    if let Some(o) = &layers.out {
        set_path(&mut v, "out_dir", Value::from(o.clone()))?;
    }
    let mut cfg: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Invalid(format!("config: {e}")))?;
    match &cfg.command {
        Some(c) if c != command => {
            return Err(CliError::Invalid(format!("config is for `{c}`, not `{command}`")));
        }
        _ => cfg.command = Some(command.to_string()),
    }
    match command {
        "simulate" => {
            cfg.trials.get_or_insert(100_000);
        }
        "sweep" => {
            cfg.trials.get_or_insert(1000);
        }
        "twirl-verify" => {
            cfg.samples.get_or_insert(100_000);
        }
        _ => {}
    }
    Ok(cfg)
}
