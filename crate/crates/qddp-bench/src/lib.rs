//! Experiment harness around the `qddp` solvers: config parsing, seeded
//! multi-trial runs and artifact emission. The `qddp-bench` binary is a
//! thin CLI over this library.

pub mod config;
pub mod experiment;
