//! Pass/fail records for numerical checks, serialized as JSON.

use std::time::Instant;

use serde::Serialize;

use crate::model::{Params, Regime};

/// Outcome of one numerical check: a measured quantity compared against a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub params: Params,
    pub runtime_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl VerificationReport {
    /// Passes iff `measured <= bound + tolerance`.
    pub fn at_most(name: impl Into<String>, params: Params, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(name, params, measured, bound, tolerance, measured <= bound + tolerance)
    }

    /// Passes iff `measured >= bound - tolerance`.
    pub fn at_least(name: impl Into<String>, params: Params, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(name, params, measured, bound, tolerance, measured >= bound - tolerance)
    }

    /// Passes iff `|measured - bound| <= tolerance`.
    pub fn close_to(name: impl Into<String>, params: Params, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(name, params, measured, bound, tolerance, (measured - bound).abs() <= tolerance)
    }

    pub fn new(name: impl Into<String>, params: Params, measured: f64, bound: f64, tolerance: f64, pass: bool) -> Self {
        VerificationReport {
            check_name: name.into(),
            pass: pass && !measured.is_nan(),
            measured,
            bound,
            tolerance,
            params,
            runtime_seconds: None,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn with_runtime(mut self, start: Instant) -> Self {
        self.runtime_seconds = Some(start.elapsed().as_secs_f64());
        self
    }

    /// A failed check for a computation that did not complete.
    pub fn errored(name: impl Into<String>, params: Params, err: impl std::fmt::Display) -> Self {
        Self::new(name, params, f64::NAN, f64::NAN, 0.0, false).with_detail(err.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A set of checks for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationSuite {
    pub params: Params,
    pub regime: Regime,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<VerificationReport>,
}

impl VerificationSuite {
    pub fn new(params: Params, regime: Regime, seed: u64, checks: Vec<VerificationReport>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerificationSuite { params, regime, seed, pass, checks }
    }

    /// Drops wall-clock timings so that output depends only on inputs.
    pub fn strip_timings(&mut self) {
        self.checks.iter_mut().for_each(|c| c.runtime_seconds = None);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        let p = Params::new(3.0, 1.0, 1.0).unwrap();
        assert!(VerificationReport::at_most("a", p, 1.0, 1.0, 0.0).pass);
        assert!(!VerificationReport::at_most("a", p, 1.1, 1.0, 0.05).pass);
        assert!(VerificationReport::at_least("b", p, 0.99, 1.0, 0.02).pass);
        assert!(!VerificationReport::close_to("c", p, f64::NAN, 1.0, 1.0).pass);
    }

    #[test]
    fn json_keys_in_declaration_order() {
        let p = Params::new(3.0, 1.0, 1.0).unwrap();
        let json = VerificationReport::at_most("m_bound", p, 47.0, 48.0, 1e-6).to_json();
        let keys = ["check_name", "pass", "measured", "bound", "tolerance", "params", "runtime_seconds"];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(!json.contains("detail"));
    }
}
