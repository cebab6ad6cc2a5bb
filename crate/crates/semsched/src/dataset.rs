//! JSON-lines request datasets.
//!
//! One object per line:
//! `{"prompt_len": 120, "output_len": 48, "urgency": 2, "arrival": 0.4}`.
//! `arrival` is optional; requests without one are placed on the workload's
//! tick pattern in file order.

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semsched_core::workload::{arrival_times, WorkloadSpec};
use semsched_core::{Request, RequestId, UrgencyLevel};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    prompt_len: u32,
    output_len: u32,
    urgency: u8,
    #[serde(default)]
    arrival: Option<f64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct Dataset {
    /// Dense ids, sorted by arrival.
    pub requests: Vec<Request>,
    pub errors: Vec<LineError>,
}

/// Reads every valid line and collects the bad ones instead of stopping.
pub fn read(input: impl BufRead, spec: &WorkloadSpec, seed: u64) -> std::io::Result<Dataset> {
    let mut parsed = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line) {
            Ok(l) if l.prompt_len == 0 || l.output_len == 0 => errors.push(LineError {
                line: n,
                message: "prompt_len and output_len must be positive".into(),
            }),
            Ok(l) if l.urgency >= spec.urgency_levels => errors.push(LineError {
                line: n,
                message: format!("urgency {} outside 0..{}", l.urgency, spec.urgency_levels),
            }),
            Ok(l) if l.arrival.is_some_and(|a| !(a.is_finite() && a >= 0.0)) => errors.push(LineError {
                line: n,
                message: "arrival must be finite and nonnegative".into(),
            }),
            Ok(l) => parsed.push(l),
            Err(e) => errors.push(LineError { line: n, message: e.to_string() }),
        }
    }
    let missing = parsed.iter().filter(|l| l.arrival.is_none()).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ticks = arrival_times(spec, missing, &mut rng).into_iter();
    let mut timed: Vec<(f64, Line)> = parsed
        .into_iter()
        .map(|l| (l.arrival.unwrap_or_else(|| ticks.next().expect("one tick per missing arrival")), l))
        .collect();
    // stable: file order breaks arrival ties
    timed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let requests = timed
        .into_iter()
        .enumerate()
        .map(|(i, (t, l))| {
            Request::new(RequestId(i as u64), t, l.prompt_len, l.output_len, UrgencyLevel::from_rank(l.urgency))
        })
        .collect();
    Ok(Dataset { requests, errors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_valid_lines_and_reports_bad_ones() {
        let text = r#"{"prompt_len": 10, "output_len": 5, "urgency": 1, "arrival": 2.0}
{"prompt_len": 20, "output_len": 5, "urgency": 0, "arrival": 1.0}

not json
{"prompt_len": 0, "output_len": 5, "urgency": 0}
{"prompt_len": 5, "output_len": 5, "urgency": 9}
{"prompt_len": 5, "output_len": 5, "urgency": 0, "colour": "red"}
"#;
        let d = read(text.as_bytes(), &WorkloadSpec::default(), 0).unwrap();
        assert_eq!(d.requests.len(), 2);
        assert_eq!(d.requests[0].prompt_len, 20);
        assert_eq!(d.requests[0].id, RequestId(0));
        assert_eq!(d.requests[1].arrival, 2.0);
        let lines: Vec<_> = d.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, [4, 5, 6, 7]);
    }

    #[test]
    fn missing_arrivals_follow_ticks() {
        let spec = WorkloadSpec { spike: true, max_concurrent: 2, arrival_gap_s: 0.25, ..Default::default() };
        let text = "{\"prompt_len\": 1, \"output_len\": 1, \"urgency\": 0}\n".repeat(5);
        let d = read(text.as_bytes(), &spec, 0).unwrap();
        let t: Vec<_> = d.requests.iter().map(|r| r.arrival).collect();
        assert_eq!(t, [0.0, 0.0, 0.25, 0.25, 0.5]);
    }
}
