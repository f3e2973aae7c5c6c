use std::fs;
use std::io::Write;
use std::path::Path;

use maxgrad::cluster::FaultToleranceProfile;
use maxgrad::metric::{GraphJson, MetricJson};
use maxgrad::{Error, FiniteMetric, Result, UltrametricTree};
use serde::{Deserialize as _, Serialize};
use serde_json::Value;

/// Parses JSON without the default nesting limit; tree files nest one level
/// per internal node.
pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    de.disable_recursion_limit();
    let value = Value::deserialize(&mut de)?;
    de.end()?;
    Ok(value)
}

/// Reads a metric file (`{"labels", "dist"}`) or a weighted graph file
/// (`{"n", "edges"}`).
pub fn read_metric(path: &Path) -> Result<FiniteMetric> {
    let value = read_json(path)?;
    if value.get("edges").is_some() {
        FiniteMetric::from_graph(&serde_json::from_value::<GraphJson>(value)?)
    } else {
        FiniteMetric::from_json(&serde_json::from_value::<MetricJson>(value)?)
    }
}

pub fn read_tree(path: &Path) -> Result<UltrametricTree> {
    UltrametricTree::from_json(&read_json(path)?)
}

/// Per-point values given either as an array in point order or as an object
/// keyed by point label.
fn per_point(value: Value, labels: &[String], what: &str) -> Result<Vec<Value>> {
    match value {
        Value::Array(items) => {
            if items.len() != labels.len() {
                return Err(Error::BadParameter(format!(
                    "{what} has {} entries for {} points",
                    items.len(),
                    labels.len()
                )));
            }
            Ok(items)
        }
        Value::Object(mut map) => {
            let mut out = Vec::with_capacity(labels.len());
            for l in labels {
                out.push(map.remove(l).ok_or_else(|| Error::BadParameter(format!("{what} has no entry for {l:?}")))?);
            }
            if let Some(extra) = map.keys().next() {
                return Err(Error::UnknownPoint(extra.clone()));
            }
            Ok(out)
        }
        _ => Err(Error::BadParameter(format!("{what} must be an array or an object"))),
    }
}

pub fn read_profile(path: &Path, labels: &[String]) -> Result<FaultToleranceProfile> {
    let items = per_point(read_json(path)?, labels, "profile")?;
    items
        .into_iter()
        .map(|v| {
            v.as_u64()
                .map(|j| j as usize)
                .ok_or_else(|| Error::BadParameter("profile entries must be positive integers".into()))
        })
        .collect::<Result<_>>()
        .map(FaultToleranceProfile)
}

pub fn read_costs(path: &Path, labels: &[String]) -> Result<Vec<f64>> {
    per_point(read_json(path)?, labels, "opening costs")?
        .into_iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::BadParameter("opening costs must be numbers".into())))
        .collect()
}

/// Pretty JSON to `out` or stdout, newline-terminated.
pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(text.as_bytes(), out)
}

pub fn write_bytes(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}
