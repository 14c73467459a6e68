//! Structured pass/fail results with replayable counterexamples.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Counterexamples kept per report; the total count is always exact.
pub const MAX_WITNESSES: usize = 64;

/// One named morphism (or object) of a diagram instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Binding {
    pub role: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Counterexample {
    pub diagram: Vec<Binding>,
    pub probe: String,
    pub lhs: String,
    pub rhs: String,
}

impl Counterexample {
    pub fn new(probe: impl Into<String>, lhs: impl Into<String>, rhs: impl Into<String>) -> Self {
        Counterexample {
            diagram: Vec::new(),
            probe: probe.into(),
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }

    pub fn bind(mut self, role: &str, value: impl Into<String>) -> Self {
        self.diagram.push(Binding {
            role: role.to_string(),
            value: value.into(),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub universe: String,
    pub passed: bool,
    /// Number of (diagram instance, probe) pairs evaluated.
    pub instances: u64,
    pub violations: u64,
    pub counterexamples: Vec<Counterexample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, universe: impl Into<String>) -> Self {
        CheckReport {
            check: check.into(),
            universe: universe.into(),
            passed: true,
            instances: 0,
            violations: 0,
            counterexamples: Vec::new(),
            notes: Vec::new(),
        }
    }

    #[inline]
    pub fn tick(&mut self) {
        self.instances += 1;
    }

    pub fn fail(&mut self, cx: Counterexample) {
        self.violations += 1;
        self.passed = false;
        self.counterexamples.push(cx);
        if self.counterexamples.len() > 4 * MAX_WITNESSES {
            self.trim();
        }
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Records an evaluation that could not be performed as a violation.
    pub fn error(&mut self, context: &str, err: &crate::Error) {
        self.fail(Counterexample::new("-", format!("error: {err}"), "-").bind("context", context));
    }

    /// Folds another report's instances and counterexamples into this one.
    pub fn absorb(&mut self, other: CheckReport) {
        self.instances += other.instances;
        self.violations += other.violations;
        if !other.passed {
            self.passed = false;
        }
        let prefix = other.check;
        for mut cx in other.counterexamples {
            cx.diagram.insert(
                0,
                Binding {
                    role: "check".into(),
                    value: prefix.clone(),
                },
            );
            self.counterexamples.push(cx);
        }
        self.notes.extend(other.notes);
        self.trim();
    }

    fn trim(&mut self) {
        self.counterexamples.sort();
        self.counterexamples.dedup();
        self.counterexamples.truncate(MAX_WITNESSES);
    }

    /// Sorts counterexamples by their canonical key and caps the list.
    pub fn finish(mut self) -> Self {
        self.trim();
        self.passed = self.violations == 0;
        self
    }

    pub fn first(&self) -> Option<&Counterexample> {
        self.counterexamples.first()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "[{status}] {} ({} instances, {} violations)",
            self.check, self.instances, self.violations
        )?;
        writeln!(f, "    universe: {}", self.universe)?;
        for n in &self.notes {
            writeln!(f, "    note: {n}")?;
        }
        for cx in self.counterexamples.iter().take(5) {
            writeln!(f, "    counterexample:")?;
            for b in &cx.diagram {
                writeln!(f, "      {} = {}", b.role, b.value)?;
            }
            writeln!(f, "      probe = {}", cx.probe)?;
            writeln!(f, "      lhs   = {}", cx.lhs)?;
            writeln!(f, "      rhs   = {}", cx.rhs)?;
        }
        if self.counterexamples.len() > 5 {
            writeln!(f, "    ... {} more kept", self.counterexamples.len() - 5)?;
        }
        Ok(())
    }
}
