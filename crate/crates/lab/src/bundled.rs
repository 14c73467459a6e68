//! Scenarios shipped with the binary, and the suite that runs them all.

use serde::{Deserialize, Serialize};

use crate::run::{run_text, RunReport, Status, EXIT_COUNTEREXAMPLE, EXIT_PASS};

macro_rules! scenario {
    ($name:literal) => {
        ($name, include_str!(concat!("../scenarios/", $name, ".scn")))
    };
}

/// Name and text of every bundled scenario, in suite order.
pub const SCENARIOS: &[(&str, &str)] = &[
    scenario!("axioms_small"),
    scenario!("naturality"),
    scenario!("monoid"),
    scenario!("strict_inclusion"),
    scenario!("pushforward_identity"),
    scenario!("subtheory_closure"),
    scenario!("delta_cap"),
    scenario!("grothendieck"),
    scenario!("quillen"),
    scenario!("finiteness"),
    scenario!("finiteness_monoid"),
];

/// Bundled but left out of the suite because they take half a minute.
pub const EXTRA: &[(&str, &str)] = &[scenario!("axioms_s1")];

/// Fixtures that are expected to exit with a counterexample.
pub const FIXTURES: &[(&str, &str)] = &[
    ("corrupted", include_str!("../scenarios/fixtures/corrupted.scn")),
    ("non_pointwise", include_str!("../scenarios/fixtures/non_pointwise.scn")),
    ("wrong_correspondence", include_str!("../scenarios/fixtures/wrong_correspondence.scn")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".scn").unwrap_or(name);
    SCENARIOS
        .iter()
        .chain(EXTRA)
        .chain(FIXTURES)
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: Option<u64>,
    pub status: Status,
    pub scenarios: Vec<RunReport>,
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => EXIT_PASS,
            Status::Counterexample => EXIT_COUNTEREXAMPLE,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Runs every bundled scenario. The bundled texts are known to compile.
pub fn run_suite(seed: Option<u64>) -> SuiteReport {
    let scenarios: Vec<RunReport> = SCENARIOS
        .iter()
        .map(|(name, text)| run_text(name, text, seed).unwrap_or_else(|e| panic!("bundled {name}: {e}")))
        .collect();
    let status = if scenarios.iter().all(|r| r.status == Status::Pass) {
        Status::Pass
    } else {
        Status::Counterexample
    };
    SuiteReport {
        seed,
        status,
        scenarios,
    }
}
