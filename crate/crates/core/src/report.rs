//! Verification reports: named residuals against tolerances.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::diffgeo::Sampler;

/// One named check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    /// `None` for pass/fail conditions without a magnitude.
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
}

impl CheckOutcome {
    /// Passes iff `residual` is finite and strictly below `tolerance`.
    pub fn residual(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            residual: Some(residual),
            tolerance: Some(tolerance),
            passed: residual.is_finite() && residual < tolerance,
            details: BTreeMap::new(),
        }
    }

    pub fn condition(name: impl Into<String>, passed: bool) -> Self {
        CheckOutcome {
            name: name.into(),
            residual: None,
            tolerance: None,
            passed,
            details: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    pub fn detail(&self, key: &str) -> Option<&Value> {
        self.details.get(key)
    }
}

/// A group of checks and the samples they were computed on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Sampler>,
    pub checks: Vec<CheckOutcome>,
    pub elapsed_ms: f64,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, samples: Option<Sampler>) -> Self {
        VerificationReport {
            name: name.into(),
            passed: true,
            samples,
            checks: Vec::new(),
            elapsed_ms: 0.0,
        }
    }

    pub fn push(&mut self, check: CheckOutcome) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest residual among the checks, ignoring conditions.
    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .filter_map(|c| c.residual)
            .fold(0.0, f64::max)
    }

    pub(crate) fn timed(mut self, start: Instant) -> Self {
        self.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        self
    }
}

/// Maximum of `values` and the index where it occurs; NaN wins.
pub(crate) fn worst(values: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let mut best = (0.0, 0);
    for (i, v) in values.into_iter().enumerate() {
        if v.is_nan() {
            return (f64::NAN, i);
        }
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

/// Removes every `elapsed_ms` field, leaving the parts of a report that must
/// be reproducible.
pub fn strip_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.remove("elapsed_ms");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_is_conjunction() {
        let mut r = VerificationReport::new("x", None);
        r.push(CheckOutcome::residual("a", 1e-9, 1e-8));
        assert!(r.passed);
        r.push(CheckOutcome::residual("b", f64::NAN, 1.0));
        assert!(!r.passed);
        assert_eq!(r.max_residual(), 1e-9);
    }

    #[test]
    fn worst_tracks_index() {
        assert_eq!(worst([0.1, 0.3, 0.2]), (0.3, 1));
        assert!(worst([0.1, f64::NAN]).0.is_nan());
    }
}
