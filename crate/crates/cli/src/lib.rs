//! Front-end plumbing for the oscillator-network simulator: config files,
//! output artifacts, physical-unit calibration, and the subcommand drivers
//! behind the `oscnet` binary.

pub mod config;
pub mod driver;
pub mod output;
pub mod physical;
