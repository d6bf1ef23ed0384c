//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments and blank lines are ignored
//! [simulate]
//! family = gaussian
//! N = 4096
//! k = 32
//! l = 8
//! T = auto
//! ```
//!
//! Keys before the first section header apply to every command; a section
//! named after the command overrides them, other sections are ignored. A JSON
//! summary written by this tool is also accepted: its `config` object is read
//! as a flat key/value map, so echoed configurations can be fed back in.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use blockmom::distributions::FamilyKind;
use blockmom::{Budget, DistributionSpec, Family, Threads};

use crate::error::{CliError, Result};

pub type KeyMap = BTreeMap<String, String>;

pub fn load(path: &Path, command: &str) -> Result<KeyMap> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, command)
}

pub fn parse(text: &str, command: &str) -> Result<KeyMap> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_flat(text, command)
    }
}

fn parse_flat(text: &str, command: &str) -> Result<KeyMap> {
    let mut global = KeyMap::new();
    let mut own = KeyMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected key = value",
                i + 1
            )));
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", i + 1)));
        }
        let target = match section.as_deref() {
            None => &mut global,
            Some(s) if s == command => &mut own,
            Some(_) => continue,
        };
        if target.insert(key.clone(), value).is_some() {
            return Err(CliError::Config(format!(
                "line {}: duplicate key '{key}'",
                i + 1
            )));
        }
    }
    global.extend(own);
    Ok(global)
}

fn parse_json(text: &str) -> Result<KeyMap> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("invalid JSON config: {e}")))?;
    let object = value
        .get("config")
        .unwrap_or(&value)
        .as_object()
        .ok_or_else(|| CliError::Config("JSON config must be an object".into()))?;
    object
        .iter()
        .map(|(k, v)| {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => {
                    return Err(CliError::Config(format!(
                        "key '{k}': unsupported value {other}"
                    )))
                }
            };
            Ok((k.clone(), s))
        })
        .collect()
}

/// Rejects keys outside `allowed`, naming every offender.
pub fn check_known(map: &KeyMap, allowed: &[&str]) -> Result<()> {
    let unknown: Vec<&str> = map
        .keys()
        .map(String::as_str)
        .filter(|k| !allowed.contains(k))
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "unknown config keys: {}",
            unknown.join(", ")
        )))
    }
}

pub fn get<T: FromStr>(map: &KeyMap, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| CliError::Config(format!("key '{key}': cannot parse '{v}'")))
        })
        .transpose()
}

pub fn require<T: FromStr>(map: &KeyMap, key: &str) -> Result<T> {
    get(map, key)?.ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))
}

pub fn list<T: FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::Config(format!("key '{key}': cannot parse '{s}'")))
        })
        .collect()
}

pub fn parse_budget(value: &str) -> Result<Budget> {
    match value {
        "auto" => Ok(Budget::Auto),
        v => v
            .parse::<u64>()
            .ok()
            .filter(|&t| t > 0)
            .map(Budget::Fixed)
            .ok_or_else(|| {
                CliError::Config(format!("T must be 'auto' or a positive integer, got '{v}'"))
            }),
    }
}

pub fn format_budget(budget: Budget) -> String {
    match budget {
        Budget::Auto => "auto".into(),
        Budget::Fixed(t) => t.to_string(),
    }
}

pub fn parse_threads(value: &str) -> Result<Threads> {
    match value {
        "auto" => Ok(Threads::Auto),
        v => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Threads::Fixed)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "threads must be 'auto' or a positive integer, got '{v}'"
                ))
            }),
    }
}

/// Keys describing a distribution.
pub const DISTRIBUTION_KEYS: &[&str] = &["family", "loc", "scale", "dof", "shape", "log_sigma"];

/// Builds the distribution for `family` from the shared parameter keys.
pub fn distribution(map: &KeyMap, family: &str) -> Result<DistributionSpec> {
    let kind: FamilyKind = family.parse()?;
    let param = |key: &str| -> Result<Option<f64>> { get(map, key) };
    let family = match kind {
        FamilyKind::Gaussian => Family::Gaussian,
        FamilyKind::Rademacher => Family::Rademacher,
        FamilyKind::StudentT => Family::StudentT {
            dof: param("dof")?
                .ok_or_else(|| CliError::Config("student_t requires 'dof'".into()))?,
        },
        FamilyKind::Pareto => Family::Pareto {
            shape: param("shape")?
                .ok_or_else(|| CliError::Config("pareto requires 'shape'".into()))?,
        },
        FamilyKind::Lognormal => Family::Lognormal {
            log_sigma: param("log_sigma")?
                .ok_or_else(|| CliError::Config("lognormal requires 'log_sigma'".into()))?,
        },
    };
    Ok(DistributionSpec::new(
        family,
        param("loc")?.unwrap_or(0.0),
        param("scale")?.unwrap_or(1.0),
    )?)
}

/// Canonical key/value echo of a distribution.
pub fn distribution_pairs(spec: &DistributionSpec) -> Vec<(&'static str, String)> {
    let mut pairs = vec![("family", spec.family().name().to_string())];
    match spec.family() {
        Family::StudentT { dof } => pairs.push(("dof", dof.to_string())),
        Family::Pareto { shape } => pairs.push(("shape", shape.to_string())),
        Family::Lognormal { log_sigma } => pairs.push(("log_sigma", log_sigma.to_string())),
        Family::Gaussian | Family::Rademacher => {}
    }
    pairs.push(("loc", spec.loc().to_string()));
    pairs.push(("scale", spec.scale().to_string()));
    pairs
}
