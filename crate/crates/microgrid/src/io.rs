//! Scenario files and dotted-path overrides.

use std::fs;
use std::path::{Path, PathBuf};

use microgrid_core::{Scenario, ScenarioError};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{path}: {err}")]
    Parse {
        path: PathBuf,
        err: serde_json::Error,
    },
    #[error("override `{key}`: {reason}")]
    Override { key: String, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Reads, overrides and validates a scenario document.
pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<Scenario, LoadError> {
    let text = fs::read_to_string(path).map_err(|err| LoadError::Io {
        path: path.to_owned(),
        err,
    })?;
    parse_scenario(&text, overrides).map_err(|e| match e {
        LoadError::Parse { err, .. } => LoadError::Parse {
            path: path.to_owned(),
            err,
        },
        other => other,
    })
}

pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<Scenario, LoadError> {
    let parse_err = |err| LoadError::Parse {
        path: PathBuf::from("<scenario>"),
        err,
    };
    let mut doc: Value = serde_json::from_str(text).map_err(parse_err)?;
    // shape check before overrides so document errors are reported as such
    serde_json::from_value::<Scenario>(doc.clone()).map_err(parse_err)?;
    for ov in overrides {
        let (key, raw) = ov.split_once('=').ok_or_else(|| LoadError::Override {
            key: ov.clone(),
            reason: "expected key=value".into(),
        })?;
        apply_override(&mut doc, key, raw)?;
        serde_json::from_value::<Scenario>(doc.clone()).map_err(|e| LoadError::Override {
            key: key.into(),
            reason: e.to_string(),
        })?;
    }
    let sc: Scenario = serde_json::from_value(doc).map_err(parse_err)?;
    sc.validate()?;
    Ok(sc)
}

/// Sets `key` (dotted path) in `doc` to `raw`, parsed as JSON when possible
/// and as a bare string otherwise. Array elements are addressed by index or
/// by their `id`. The last segment may name an absent optional field; any
/// other missing segment is an error.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<(), LoadError> {
    let fail = |reason: String| LoadError::Override {
        key: key.into(),
        reason,
    };
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let segs: Vec<&str> = key.split('.').collect();
    if segs.iter().any(|s| s.is_empty()) {
        return Err(fail("empty path segment".into()));
    }
    let mut cur = doc;
    for (k, seg) in segs.iter().enumerate() {
        let last = k + 1 == segs.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*seg).into(), value);
                    return Ok(());
                }
                map.get_mut(*seg)
                    .ok_or_else(|| fail(format!("unknown key `{seg}`")))?
            }
            Value::Array(items) => {
                let idx = match seg.parse::<usize>() {
                    Ok(i) if i < items.len() => i,
                    Ok(i) => return Err(fail(format!("index {i} out of range"))),
                    Err(_) => items
                        .iter()
                        .position(|it| it.get("id").and_then(Value::as_str) == Some(*seg))
                        .ok_or_else(|| fail(format!("no element with id `{seg}`")))?,
                };
                if last {
                    items[idx] = value;
                    return Ok(());
                }
                &mut items[idx]
            }
            _ => return Err(fail(format!("`{seg}` is not inside an object or array"))),
        };
    }
    unreachable!("loop returns on the last segment")
}
