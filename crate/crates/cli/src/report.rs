//! Run reports: one record per assertion, rendered as text or JSON.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Not shown symbolically, but the oracle found no counterexample.
    Unproven,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Unproven => "unproven",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRecord {
    pub trials: usize,
    pub exact_trials: usize,
    pub rejected: usize,
    pub equivalent: bool,
    pub witness: Option<String>,
    /// Set when the oracle could not run, e.g. too many odd atoms.
    pub skipped: Option<String>,
}

impl OracleRecord {
    pub fn skipped(reason: String) -> OracleRecord {
        OracleRecord {
            trials: 0,
            exact_trials: 0,
            rejected: 0,
            equivalent: false,
            witness: None,
            skipped: Some(reason),
        }
    }

    fn summary(&self) -> String {
        if let Some(r) = &self.skipped {
            return format!("oracle skipped: {r}");
        }
        let mut s = format!(
            "oracle: {} trials ({} exact, {} rejected), {}",
            self.trials,
            self.exact_trials,
            self.rejected,
            if self.equivalent { "no counterexample" } else { "counterexample" }
        );
        if let Some(w) = &self.witness {
            let _ = write!(s, " at {w}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionRecord {
    pub id: usize,
    pub name: String,
    pub kind: String,
    pub line: usize,
    pub status: Status,
    pub residual: Option<String>,
    pub tier: Option<String>,
    pub oracle: Option<OracleRecord>,
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u128>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShowRecord {
    pub line: usize,
    pub label: Option<String>,
    pub value: String,
}

/// A statement that failed outside an assertion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub script: String,
    pub status: Status,
    pub exit_code: i32,
    pub assertions: Vec<AssertionRecord>,
    pub shows: Vec<ShowRecord>,
    pub errors: Vec<ErrorRecord>,
}

impl Report {
    pub(crate) fn finish(script: String, assertions: Vec<AssertionRecord>, shows: Vec<ShowRecord>, errors: Vec<ErrorRecord>) -> Report {
        let engine_error = !errors.is_empty() || assertions.iter().any(|a| a.status == Status::Error);
        let not_pass = assertions.iter().any(|a| a.status != Status::Pass);
        let (status, exit_code) = if engine_error {
            (Status::Error, 3)
        } else if not_pass {
            (Status::Fail, 1)
        } else {
            (Status::Pass, 0)
        };
        Report { script, status, exit_code, assertions, shows, errors }
    }

    pub fn passed(&self) -> bool {
        self.exit_code == 0
    }

    pub fn assertion(&self, name: &str) -> Option<&AssertionRecord> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The text printed to standard output.
    pub fn human(&self) -> String {
        let mut out = String::new();
        for s in &self.shows {
            let label = s.label.as_deref().map(|l| format!(" {l}")).unwrap_or_default();
            let _ = writeln!(out, "show{label} (line {}):\n  {}", s.line, s.value.replace('\n', "\n  "));
        }
        for a in &self.assertions {
            let _ = writeln!(out, "[{}] #{} {} (line {}, {})", a.status.as_str(), a.id, a.name, a.line, a.kind);
            if let Some(t) = &a.tier {
                let _ = writeln!(out, "  tier: {t}");
            }
            if let Some(d) = &a.detail {
                let _ = writeln!(out, "  {d}");
            }
            if a.status != Status::Pass {
                if let Some(r) = &a.residual {
                    let _ = writeln!(out, "  residual: {r}");
                }
            }
            if let Some(o) = &a.oracle {
                let _ = writeln!(out, "  {}", o.summary());
            }
        }
        for e in &self.errors {
            let _ = writeln!(out, "error at {}:{}: {}", e.line, e.col, e.message);
        }
        let passed = self.assertions.iter().filter(|a| a.status == Status::Pass).count();
        let _ = writeln!(
            out,
            "{}: {passed}/{} assertions passed, status {}",
            self.script,
            self.assertions.len(),
            self.status.as_str()
        );
        out
    }
}
