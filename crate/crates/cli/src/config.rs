//! Merging of a JSON config file over parsed command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Returns `args` with every key of the JSON object at `path` replacing the
/// corresponding flag. Keys may use dashes or underscores.
pub fn apply<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let overrides: Map<String, Value> =
        serde_json::from_str(&text).with_context(|| format!("config {} must be a JSON object", path.display()))?;
    merge(args, overrides).with_context(|| format!("applying config {}", path.display()))
}

pub fn merge<T: Serialize + DeserializeOwned>(args: T, overrides: Map<String, Value>) -> Result<T> {
    let Value::Object(mut fields) = serde_json::to_value(&args)? else {
        bail!("arguments do not serialize to an object");
    };
    for (key, value) in overrides {
        let key = key.replace('-', "_");
        match fields.get_mut(&key) {
            Some(slot) => *slot = value,
            None => {
                let mut known: Vec<&String> = fields.keys().collect();
                known.sort();
                bail!("unknown config key '{key}'; expected one of {known:?}");
            }
        }
    }
    Ok(serde_json::from_value(Value::Object(fields))?)
}
