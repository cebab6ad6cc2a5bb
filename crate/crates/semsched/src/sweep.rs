//! One simulation per value of a config key, run in parallel.

use rayon::prelude::*;
use semsched_core::{run, RunReport, ScenarioConfig};
use serde::Serialize;
use serde_json::Value;

use crate::output::{rows, ResultRow};
use crate::scenario::{set_key, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
pub enum SeedMode {
    /// Every run uses the base seed.
    #[default]
    Same,
    /// Run `i` uses base seed + `i`.
    Offset,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("no sweep values given")]
    NoValues,
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error("run with {axis}={value}: {message}")]
    Run { axis: String, value: String, message: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: String,
    pub report: RunReport,
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs `base` once per value of `axis`. Results keep the order of `values`.
pub fn sweep(base: &ScenarioConfig, axis: &str, values: &[Value], seeds: SeedMode) -> Result<Vec<SweepPoint>, SweepError> {
    if values.is_empty() {
        return Err(SweepError::NoValues);
    }
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut cfg = set_key(base, axis, v.clone())?;
            if seeds == SeedMode::Offset {
                cfg.seed = base.seed.wrapping_add(i as u64);
            }
            Ok((label(v), cfg))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    configs
        .into_par_iter()
        .map(|(value, cfg)| {
            let fail = |message: String| SweepError::Run { axis: axis.to_owned(), value: value.clone(), message };
            let trace = run(&cfg).map_err(|e| fail(e.to_string()))?;
            let report = RunReport::from_trace(&trace, &cfg).map_err(|e| fail(e.to_string()))?;
            Ok(SweepPoint { value, report })
        })
        .collect()
}

pub fn sweep_rows(axis: &str, points: &[SweepPoint]) -> Vec<ResultRow> {
    points.iter().flat_map(|p| rows(&p.report, axis, &p.value)).collect()
}
