//! Input loading, output plumbing, and the exit-code contract.
//!
//! Exit codes: 0 success or affirmative verdict, 2 usage or precondition
//! error, 3 negative verdict, 4 numerical failure, 5 inconclusive.

use crn_core::kinetics::RateAssignment;
use crn_core::network::{analyze, parse_network, ReactionNetwork, StoichAnalysis};
use crn_core::CrnError;
use nalgebra::DVector;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_INCONCLUSIVE: i32 = 5;

/// A command failure: message for stderr plus the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<CrnError> for Failure {
    fn from(e: CrnError) -> Self {
        let code = match &e {
            CrnError::Parse { .. }
            | CrnError::InvalidNetwork { .. }
            | CrnError::NonPositiveState { .. }
            | CrnError::RateMismatch { .. }
            | CrnError::NonPositiveRate { .. }
            | CrnError::NotWeaklyReversible { .. }
            | CrnError::ShapeMismatch { .. }
            | CrnError::SpeciesMismatch { .. }
            | CrnError::InvalidPlan { .. }
            | CrnError::UnsupportedShape { .. } => EXIT_USAGE,
            CrnError::NotComplexBalanced { .. } => EXIT_NEGATIVE,
            CrnError::ScheduleOutOfBounds { .. }
            | CrnError::SolveDidNotConverge { .. }
            | CrnError::NotSteadyState { .. }
            | CrnError::IntegrationFailure { .. }
            | CrnError::Internal { .. } => EXIT_NUMERICAL,
        };
        Failure { code, message: e.to_string() }
    }
}

pub fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

pub fn load_network(path: &Path) -> Result<(ReactionNetwork, StoichAnalysis), Failure> {
    let text = read_file(path)?;
    let net = parse_network(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let stoich = analyze(&net)?;
    Ok((net, stoich))
}

/// Rates come either from a JSON file or inline JSON (detected by a leading
/// '{' or '['). An object keys rates by canonical reaction text; an array
/// lists them in edge order.
pub fn load_rates(net: &ReactionNetwork, spec: &str) -> Result<RateAssignment, Failure> {
    let trimmed = spec.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        spec.to_string()
    } else {
        read_file(Path::new(spec))?
    };
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("rates are not valid JSON: {e}")))?;
    match value {
        serde_json::Value::Object(map) => {
            let mut named = HashMap::new();
            for (k, v) in map {
                let f = v
                    .as_f64()
                    .ok_or_else(|| Failure::usage(format!("rate for {k:?} is not a number")))?;
                named.insert(k, f);
            }
            Ok(RateAssignment::from_named(net, &named)?)
        }
        serde_json::Value::Array(items) => {
            let mut kappa = Vec::with_capacity(items.len());
            for (i, v) in items.iter().enumerate() {
                let f = v
                    .as_f64()
                    .ok_or_else(|| Failure::usage(format!("rate {i} is not a number")))?;
                kappa.push(f);
            }
            Ok(RateAssignment::new(net, kappa)?)
        }
        _ => Err(Failure::usage("rates must be a JSON object or array")),
    }
}

/// Parses "a,b,c" into a state vector of the expected dimension.
pub fn parse_state(spec: &str, n: usize) -> Result<DVector<f64>, Failure> {
    let values = parse_float_list(spec)?;
    if values.len() != n {
        return Err(Failure::usage(format!(
            "state has {} components, expected {n}",
            values.len()
        )));
    }
    Ok(DVector::from_vec(values))
}

pub fn parse_float_list(spec: &str) -> Result<Vec<f64>, Failure> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("not a number: {:?}", s.trim())))
        })
        .collect()
}

/// Grid specs: a single value, a comma list, or "lo:hi:count" for `count`
/// evenly spaced values including both endpoints.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Failure::usage(format!("range must be lo:hi:count, got {spec:?}")));
        }
        let lo: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("not a number: {:?}", parts[0])))?;
        let hi: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("not a number: {:?}", parts[1])))?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("not a count: {:?}", parts[2])))?;
        if count < 2 {
            return Err(Failure::usage("range count must be at least 2"));
        }
        let step = (hi - lo) / (count - 1) as f64;
        return Ok((0..count).map(|i| lo + step * i as f64).collect());
    }
    parse_float_list(spec)
}

/// Serializes a document as pretty JSON with a trailing newline, to stdout
/// or to `--out`.
pub fn write_json<T: Serialize>(doc: &T, out: Option<&PathBuf>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Failure { code: EXIT_NUMERICAL, message: format!("serialization failed: {e}") })?;
    text.push('\n');
    write_text(&text, out)
}

pub fn write_text(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| Failure::usage(format!("cannot write stdout: {e}")))
        }
    }
}
