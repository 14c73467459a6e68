//! Scenario files, a runner for law checks over finite sites, and the
//! narrated demos behind the `bivariant-lab` binary.

pub mod bundled;
pub mod compile;
pub mod demos;
pub mod run;
pub mod syntax;
