//! Shared fixtures for the benchmark targets.

use eom_core::problem::{lookup, ProblemSpec};

/// Problems timed by the solver benchmarks.
pub const SOLVE_PROBLEMS: [&str; 3] = ["lane-emden-p1", "lane-emden-p5", "lane-emden-exp"];

/// Degrees swept by the solver benchmarks.
pub const SOLVE_DEGREES: [usize; 3] = [4, 8, 12];

pub fn problem(name: &str) -> ProblemSpec {
    lookup(name).unwrap_or_else(|| panic!("unknown benchmark problem {name}"))
}
