//! Structured pass/fail reports produced by the input validators.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub severity: Severity,
    /// Worst value of the checked quantity.
    pub worst: f64,
    /// Where the worst value was found, as `(age index, cell, arc node)`
    /// with unused coordinates omitted.
    pub location: Option<Vec<usize>>,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, worst: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            severity: Severity::Error,
            worst,
            location: None,
            detail: detail.into(),
        }
    }

    pub fn at(mut self, location: Vec<usize>) -> Self {
        self.location = Some(location);
        self
    }

    pub fn warning(mut self) -> Self {
        self.severity = Severity::Warning;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    /// No failed check of error severity.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.severity == Severity::Warning)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && c.severity == Severity::Error)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match (c.passed, c.severity) {
                (true, _) => "pass",
                (false, Severity::Error) => "FAIL",
                (false, Severity::Warning) => "warn",
            };
            write!(f, "[{tag}] {}: worst {:.6e}", c.name, c.worst)?;
            if let Some(loc) = &c.location {
                write!(f, " at {loc:?}")?;
            }
            if !c.detail.is_empty() {
                write!(f, " ({})", c.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
