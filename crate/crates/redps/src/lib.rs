//! Experiment harness: oracles, configuration, file formats, parallel
//! execution and reporting on top of `redps-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod parallel;
pub mod polyfile;
pub mod profile;
pub mod quad;
pub mod report;
pub mod synthetic;
