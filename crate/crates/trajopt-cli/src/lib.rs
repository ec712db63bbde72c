//! Benchmark front end: run configs, the solve driver, and the CSV writers.

pub mod config;
pub mod output;
pub mod run;
