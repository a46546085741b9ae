//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "model",
    "scale",
    "modes",
    "samples",
    "steps",
    "href",
    "seed",
    "out",
    "plot",
    "force",
    "horizon",
    "p",
    "bump_width",
    "noise_exponent",
    "noise_scale",
    "grid_factor",
    "initial_decay",
    "profile",
    "threads",
];

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected 'key = value', found '{line}'", i + 1);
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            bail!("config line {}: unknown key '{key}'", i + 1);
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            bail!("config line {}: duplicate key '{key}'", i + 1);
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

/// Step sizes as `2^-n` tokens or plain decimals, comma separated.
pub fn parse_steps(text: &str) -> Result<Vec<f64>> {
    let steps = text
        .split(',')
        .map(|t| parse_step(t.trim()))
        .collect::<Result<Vec<_>>>()?;
    if steps.is_empty() {
        bail!("empty step list");
    }
    Ok(steps)
}

pub fn parse_step(token: &str) -> Result<f64> {
    let value = if let Some(exp) = token.strip_prefix("2^") {
        let n: i32 = exp
            .parse()
            .with_context(|| format!("bad exponent in step '{token}'"))?;
        2f64.powi(n)
    } else {
        token
            .parse()
            .with_context(|| format!("step '{token}' is neither 2^-n nor a number"))?
    };
    if !(value > 0.0) || !value.is_finite() {
        bail!("step '{token}' must be positive");
    }
    Ok(value)
}

pub fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, found '{value}'"),
    }
}
