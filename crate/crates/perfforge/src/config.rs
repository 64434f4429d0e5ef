//! Dataset-level parameter file: `[section]` headers, `key = value` pairs,
//! `#` comments. Each feature module owns one section; unknown sections and
//! keys are rejected so a typo can never silently fall back to a default.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::alignment::AlignmentParams;
use crate::loudness::LoudnessParams;
use crate::tension::{TensionParams, WeightMode};

/// Config filename looked up in the dataset root when no path is given.
pub const DEFAULT_CONFIG_NAME: &str = "features.cfg";

pub const SECTION_NAMES: [&str; 5] = ["loudness", "alignment", "beats", "dynamics", "tension"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error("unknown config section [{0}]")]
    UnknownSection(String),
    #[error("unknown config key {section}.{key}")]
    UnknownKey { section: String, key: String },
    #[error("duplicate config key {section}.{key}")]
    DuplicateKey { section: String, key: String },
    #[error("config key {section}.{key} expects {expected}, got \"{value}\"")]
    TypeMismatch {
        section: String,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("invalid value for {section}.{key}: {detail}")]
    InvalidValue {
        section: String,
        key: String,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
    Str(String),
}

impl fmt::Display for Value {
    /// Canonical rendering: base-10 integers, shortest round-trip reals,
    /// true/false, raw strings.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Str(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Real,
    Str,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Int => "an integer",
            Kind::Real => "a real number",
            Kind::Str => "a string",
        }
    }
}

struct KeySpec {
    key: &'static str,
    kind: Kind,
    default: Value,
}

fn schema() -> Vec<(&'static str, Vec<KeySpec>)> {
    let int = |key, v| KeySpec {
        key,
        kind: Kind::Int,
        default: Value::Int(v),
    };
    let real = |key, v| KeySpec {
        key,
        kind: Kind::Real,
        default: Value::Real(v),
    };
    let string = |key, v: &str| KeySpec {
        key,
        kind: Kind::Str,
        default: Value::Str(v.into()),
    };
    vec![
        (
            "loudness",
            vec![
                int("window_length", 4096),
                int("hop_length", 1024),
                real("db_max", 96.0),
                string("method", "default"),
            ],
        ),
        (
            "alignment",
            vec![
                real("chord_epsilon", 0.03),
                real("gap_cost", 0.75),
                string("method", "default"),
            ],
        ),
        (
            "beats",
            vec![int("subdivision", 1), string("method", "default")],
        ),
        (
            "dynamics",
            vec![int("pedal_threshold", 64), string("method", "default")],
        ),
        (
            "tension",
            vec![
                real("window_s", 1.0),
                real("hop_s", 0.5),
                string("weight", "duration"),
                string("method", "default"),
            ],
        ),
    ]
}

/// Typed, per-key-validated overrides parsed from a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub overrides: BTreeMap<String, BTreeMap<String, Value>>,
}

/// Complete parameter tables: defaults overlaid with overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub sections: BTreeMap<String, BTreeMap<String, Value>>,
}

fn validate_key(section: &str, key: &str, value: &Value) -> Result<(), ConfigError> {
    let fail = |detail: String| {
        Err(ConfigError::InvalidValue {
            section: section.into(),
            key: key.into(),
            detail,
        })
    };
    match (section, key, value) {
        ("loudness", "window_length", Value::Int(v)) => {
            if !(2..=16_777_216).contains(v) {
                return fail(format!("{v} outside 2..=16777216"));
            }
            if v % 2 != 0 {
                return fail(format!("{v} must be even"));
            }
        }
        ("loudness", "hop_length", Value::Int(v)) => {
            if !(1..=16_777_216).contains(v) {
                return fail(format!("{v} outside 1..=16777216"));
            }
        }
        ("loudness", "db_max", Value::Real(v)) => {
            if !(v.is_finite() && *v > 0.0) {
                return fail(format!("{v} must be positive"));
            }
        }
        ("alignment", "chord_epsilon", Value::Real(v)) => {
            if !(v.is_finite() && *v >= 0.0) {
                return fail(format!("{v} must be non-negative"));
            }
        }
        ("alignment", "gap_cost", Value::Real(v)) => {
            if !(v.is_finite() && *v > 0.0) {
                return fail(format!("{v} must be positive"));
            }
        }
        ("beats", "subdivision", Value::Int(v)) => {
            if !(1..=1024).contains(v) {
                return fail(format!("{v} outside 1..=1024"));
            }
        }
        ("dynamics", "pedal_threshold", Value::Int(v)) => {
            if !(1..=127).contains(v) {
                return fail(format!("{v} outside 1..=127"));
            }
        }
        ("tension", "window_s", Value::Real(v)) => {
            if !(v.is_finite() && *v > 0.0) {
                return fail(format!("{v} must be positive"));
            }
        }
        ("tension", "hop_s", Value::Real(v)) => {
            if !(v.is_finite() && *v >= 0.001) {
                return fail(format!("{v} must be at least 0.001"));
            }
        }
        ("tension", "weight", Value::Str(v)) => {
            if v != "duration" && v != "count" {
                return fail(format!("\"{v}\" is neither duration nor count"));
            }
        }
        (_, "method", Value::Str(v)) => {
            if v != "default" {
                return fail(format!("\"{v}\" is not an available method"));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Parses and validates config text into typed overrides.
pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let schema = schema();
    let mut overrides: BTreeMap<String, BTreeMap<String, Value>> = BTreeMap::new();
    let mut current: Option<&'static str> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::Syntax {
                    line,
                    detail: "unterminated section header".into(),
                });
            };
            let name = name.trim();
            let Some((section, _)) = schema.iter().find(|(s, _)| *s == name) else {
                return Err(ConfigError::UnknownSection(name.into()));
            };
            current = Some(section);
            overrides.entry(section.to_string()).or_default();
            continue;
        }
        let Some((raw_key, raw_value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                detail: format!("expected `key = value`, got \"{content}\""),
            });
        };
        let key = raw_key.trim();
        let value_text = raw_value.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                detail: "empty key".into(),
            });
        }
        let Some(section) = current else {
            return Err(ConfigError::Syntax {
                line,
                detail: format!("key \"{key}\" appears before any [section]"),
            });
        };
        let keys = &schema.iter().find(|(s, _)| *s == section).unwrap().1;
        let Some(spec) = keys.iter().find(|s| s.key == key) else {
            return Err(ConfigError::UnknownKey {
                section: section.into(),
                key: key.into(),
            });
        };
        let mismatch = || ConfigError::TypeMismatch {
            section: section.into(),
            key: key.into(),
            expected: spec.kind.name(),
            value: value_text.into(),
        };
        let value = match spec.kind {
            Kind::Int => Value::Int(value_text.parse().map_err(|_| mismatch())?),
            Kind::Real => {
                let v: f64 = value_text.parse().map_err(|_| mismatch())?;
                if !v.is_finite() {
                    return Err(mismatch());
                }
                Value::Real(v)
            }
            Kind::Str => Value::Str(value_text.to_string()),
        };
        validate_key(section, key, &value)?;
        let section_map = overrides.entry(section.to_string()).or_default();
        if section_map.insert(key.to_string(), value).is_some() {
            return Err(ConfigError::DuplicateKey {
                section: section.into(),
                key: key.into(),
            });
        }
    }
    Ok(ConfigFile { overrides })
}

/// Defaults overlaid with the file's overrides.
pub fn effective_params(config: &ConfigFile) -> ParamSet {
    let mut sections = BTreeMap::new();
    for (section, keys) in schema() {
        let mut map = BTreeMap::new();
        for spec in keys {
            let value = config
                .overrides
                .get(section)
                .and_then(|m| m.get(spec.key))
                .cloned()
                .unwrap_or(spec.default);
            map.insert(spec.key.to_string(), value);
        }
        sections.insert(section.to_string(), map);
    }
    ParamSet { sections }
}

/// Cross-key constraints that only hold on the merged parameter set.
pub fn validate_params(params: &ParamSet) -> Result<(), ConfigError> {
    let window = params.int("loudness", "window_length");
    let hop = params.int("loudness", "hop_length");
    if hop > window {
        return Err(ConfigError::InvalidValue {
            section: "loudness".into(),
            key: "hop_length".into(),
            detail: format!("hop {hop} exceeds window_length {window}"),
        });
    }
    let window_s = params.real("tension", "window_s");
    let hop_s = params.real("tension", "hop_s");
    if hop_s > window_s {
        return Err(ConfigError::InvalidValue {
            section: "tension".into(),
            key: "hop_s".into(),
            detail: format!("hop_s {hop_s} exceeds window_s {window_s}"),
        });
    }
    Ok(())
}

impl ParamSet {
    pub fn defaults() -> ParamSet {
        effective_params(&ConfigFile::default())
    }

    fn value(&self, section: &str, key: &str) -> &Value {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .unwrap_or_else(|| panic!("schema guarantees {section}.{key}"))
    }

    fn int(&self, section: &str, key: &str) -> i64 {
        match self.value(section, key) {
            Value::Int(v) => *v,
            other => panic!("{section}.{key} is not an integer: {other:?}"),
        }
    }

    fn real(&self, section: &str, key: &str) -> f64 {
        match self.value(section, key) {
            Value::Real(v) => *v,
            other => panic!("{section}.{key} is not a real: {other:?}"),
        }
    }

    fn string(&self, section: &str, key: &str) -> &str {
        match self.value(section, key) {
            Value::Str(v) => v,
            other => panic!("{section}.{key} is not a string: {other:?}"),
        }
    }

    pub fn loudness(&self) -> LoudnessParams {
        LoudnessParams {
            window_length: self.int("loudness", "window_length") as usize,
            hop_length: self.int("loudness", "hop_length") as usize,
            db_max: self.real("loudness", "db_max"),
        }
    }

    pub fn alignment(&self) -> AlignmentParams {
        AlignmentParams {
            chord_epsilon_s: self.real("alignment", "chord_epsilon"),
            gap_cost: self.real("alignment", "gap_cost"),
        }
    }

    pub fn beats_subdivision(&self) -> u32 {
        self.int("beats", "subdivision") as u32
    }

    pub fn pedal_threshold(&self) -> u8 {
        self.int("dynamics", "pedal_threshold") as u8
    }

    pub fn tension(&self) -> TensionParams {
        TensionParams {
            window_s: self.real("tension", "window_s"),
            hop_s: self.real("tension", "hop_s"),
            weight: match self.string("tension", "weight") {
                "count" => WeightMode::Count,
                _ => WeightMode::Duration,
            },
        }
    }

    /// Canonical per-section text: sorted keys, normal-form values. This is
    /// the string digested for staleness, so permuting the config file or
    /// writing a default explicitly cannot change the digest.
    pub fn section_text(&self, section: &str) -> String {
        let mut out = String::new();
        if let Some(map) = self.sections.get(section) {
            for (key, value) in map {
                out.push_str(key);
                out.push('=');
                out.push_str(&value.to_string());
                out.push('\n');
            }
        }
        out
    }
}

/// Renders a ParamSet back to parseable config text.
pub fn render(params: &ParamSet) -> String {
    let mut out = String::new();
    for (section, map) in &params.sections {
        out.push('[');
        out.push_str(section);
        out.push_str("]\n");
        for (key, value) in map {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out.push('\n');
    }
    out
}
