//! Scenario parsing, the verification sweep and its report format.
pub mod checks;
pub mod config;
pub mod report;
