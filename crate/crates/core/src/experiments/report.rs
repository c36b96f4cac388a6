use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One inequality checked against computed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub formula: String,
    pub bound: f64,
    pub observed: f64,
    pub pass: bool,
}

impl BoundCheck {
    /// Passes when `observed <= bound`.
    pub fn upper(name: &str, formula: &str, bound: f64, observed: f64) -> Self {
        Self {
            name: name.into(),
            formula: formula.into(),
            bound,
            observed,
            pass: observed <= bound,
        }
    }

    /// Passes when `observed >= bound`.
    pub fn lower(name: &str, formula: &str, bound: f64, observed: f64) -> Self {
        Self {
            name: name.into(),
            formula: formula.into(),
            bound,
            observed,
            pass: observed >= bound,
        }
    }
}

/// Structured result of a driver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub inputs: BTreeMap<String, Value>,
    pub fitted: BTreeMap<String, f64>,
    pub bounds: Vec<BoundCheck>,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            inputs: BTreeMap::new(),
            fitted: BTreeMap::new(),
            bounds: Vec::new(),
            artifacts: Vec::new(),
            notes: Vec::new(),
            passed: true,
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs.insert(
            key.into(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    pub fn fit(mut self, key: &str, value: f64) -> Self {
        self.fitted.insert(key.into(), value);
        self
    }

    pub fn bound(mut self, check: BoundCheck) -> Self {
        self.passed &= check.pass;
        self.bounds.push(check);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    /// Folds an extra pass/fail condition into the verdict.
    pub fn require(mut self, ok: bool, what: &str) -> Self {
        if !ok {
            self.passed = false;
            self.notes.push(format!("failed: {what}"));
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
