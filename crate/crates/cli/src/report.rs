//! Verification records, one JSON object per line with a fixed field order.

use serde::Serialize;

/// How the residual is judged against the tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    /// Pass when `max_residual < tol`.
    Zero,
    /// Pass when `max_residual >= tol`.
    Nonzero,
    /// Pass when `max_residual >= tol` (a lower bound such as an order).
    AtLeast,
    /// Reported only; the residual may be zero or not.
    Informational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub worst_point: Vec<f64>,
    pub expectation: Expectation,
    pub gating: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(check: &str, max_residual: f64, tol: f64, worst_point: Vec<f64>, expectation: Expectation) -> Self {
        let pass = match expectation {
            Expectation::Zero => max_residual < tol,
            Expectation::Nonzero | Expectation::AtLeast => max_residual >= tol,
            Expectation::Informational => true,
        };
        CheckRecord {
            check: check.to_string(),
            max_residual,
            tol,
            pass,
            worst_point,
            expectation,
            gating: expectation != Expectation::Informational,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Record for a check that could not be evaluated.
    pub fn error(check: &str, tol: f64, message: String) -> Self {
        CheckRecord {
            check: check.to_string(),
            max_residual: f64::NAN,
            tol,
            pass: false,
            worst_point: Vec::new(),
            expectation: Expectation::Zero,
            gating: true,
            note: Some(message),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass || !r.gating)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_json_line());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_field_order_is_stable() {
        let r = CheckRecord::new("thm1.oracle", 1e-12, 1e-5, vec![1.0, 0.5], Expectation::Zero);
        assert_eq!(
            r.to_json_line(),
            r#"{"check":"thm1.oracle","max_residual":1e-12,"tol":0.00001,"pass":true,"worst_point":[1.0,0.5],"expectation":"zero","gating":true}"#
        );
    }

    #[test]
    fn expectations() {
        assert!(!CheckRecord::new("a", 1.0, 1e-5, vec![], Expectation::Zero).pass);
        assert!(CheckRecord::new("a", 1.0, 1e-5, vec![], Expectation::Nonzero).pass);
        assert!(CheckRecord::new("a", 3.9, 3.0, vec![], Expectation::AtLeast).pass);
        let info = CheckRecord::new("a", 1.0, 1e-5, vec![], Expectation::Informational);
        assert!(info.pass && !info.gating);
    }
}
