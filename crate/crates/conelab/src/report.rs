//! Structured experiment output: every numeric comparison a suite makes is
//! recorded as a named check with both sides, so reports can be diffed
//! across runs and implementations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub suite: String,
    pub params: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checks: Vec<CheckRecord>,
    /// Empirical constants observed during the run (never asserted unless a
    /// check also records them).
    pub constants: BTreeMap<String, f64>,
    pub timing_ms: u64,
}

impl Report {
    pub fn new(suite: impl Into<String>, params: serde_json::Value) -> Report {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            suite: suite.into(),
            params,
            seed: None,
            checks: Vec::new(),
            constants: BTreeMap::new(),
            timing_ms: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Report {
        self.seed = Some(seed);
        self
    }

    /// Record a comparison `lhs` against `rhs`.
    pub fn check(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, pass: bool) {
        let ratio = if rhs != 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
        self.checks.push(CheckRecord { name: name.into(), lhs, rhs, ratio, pass, flag: None });
    }

    pub fn check_flagged(
        &mut self,
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        pass: bool,
        flag: impl Into<String>,
    ) {
        self.check(name, lhs, rhs, pass);
        self.checks.last_mut().unwrap().flag = Some(flag.into());
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) {
        self.constants.insert(name.into(), value);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckRecord> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Serialization with the timing field zeroed, for byte-identical
    /// comparison of seeded runs.
    pub fn to_json_stable(&self) -> String {
        let mut copy = self.clone();
        copy.timing_ms = 0;
        serde_json::to_string_pretty(&copy).expect("report serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_tracking() {
        let mut r = Report::new("demo", serde_json::json!({"q": 3}));
        r.check("a", 1.0, 2.0, true);
        assert!(r.all_pass());
        r.check_flagged("b", 3.0, 1.0, false, "out-of-regime");
        assert!(!r.all_pass());
        assert_eq!(r.failures().len(), 1);
        assert_eq!(r.checks[0].ratio, 0.5);
    }

    #[test]
    fn stable_json_zeroes_timing() {
        let mut r = Report::new("demo", serde_json::json!({}));
        r.timing_ms = 1234;
        let s = r.to_json_stable();
        let back: Report = serde_json::from_str(&s).unwrap();
        assert_eq!(back.timing_ms, 0);
    }
}
