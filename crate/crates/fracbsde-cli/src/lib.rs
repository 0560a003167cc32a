//! Experiment runner around the fractional BSDE laboratory: a JSON config
//! schema resolved into library scenarios or inline problems, deterministic
//! CSV/JSON artifact emission, and printed admissibility tables.

pub mod config;
pub mod csvout;
pub mod report;
pub mod runner;
