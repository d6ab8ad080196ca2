//! Run manifests written next to every output.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use xsdr::{FitOptions, LambdaChoice, LambdaSelection};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
    pub n: usize,
    pub p: usize,
    pub response: String,
    pub predictors: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub options: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputRecord>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, options: Value) -> Self {
        RunManifest {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            options,
            input: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join("manifest.json"), &serde_json::to_value(self).expect("manifest serializes"))
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

/// Options as actually used: `r` and `λ` resolved, plus the selection
/// record when `λ` was chosen from a grid.
pub fn resolved_options(
    requested: &FitOptions,
    resolved: Option<&FitOptions>,
    selection: Option<&LambdaSelection>,
) -> Value {
    let used = resolved.unwrap_or(requested);
    let lambda = match (&requested.lambda, selection) {
        _ if !requested.flavor.uses_expectiles() => Value::Null,
        (LambdaChoice::Auto(grid), Some(sel)) => json!({
            "mode": "data-driven",
            "grid": grid,
            "scores": sel.scores,
            "selected": sel.chosen,
        }),
        (LambdaChoice::Auto(grid), None) => json!({ "mode": "data-driven", "grid": grid }),
        (LambdaChoice::Fixed(l), _) => json!(l),
    };
    let r = match used.bandwidth {
        xsdr::Bandwidth::Fixed(r) if requested.flavor.uses_expectiles() => json!(r),
        _ => Value::Null,
    };
    let expectile = requested.flavor.uses_expectiles();
    json!({
        "method": requested.label(),
        "flavor": crate::commands::flavor_name(requested.flavor),
        "H": requested.slices,
        "N": if requested.flavor == xsdr::Flavor::Projective { json!(requested.projections) } else { Value::Null },
        "k": if expectile { json!(requested.levels.len()) } else { Value::Null },
        "levels": if expectile { json!(requested.levels) } else { Value::Null },
        "r": r,
        "r_rule": match requested.bandwidth {
            _ if !expectile => Value::Null,
            xsdr::Bandwidth::Heuristic => json!("inverse squared mean pairwise distance"),
            xsdr::Bandwidth::Scaled(m) => json!(format!("{m} x inverse squared mean pairwise distance")),
            xsdr::Bandwidth::Fixed(_) => json!("fixed"),
        },
        "lambda": lambda,
        "d": requested.d,
        "seed": requested.seed,
        "jitter": requested.jitter,
    })
}
