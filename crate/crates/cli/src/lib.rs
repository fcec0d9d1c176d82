//! Benchmark harness for the forced-oscillation localizer: experiment
//! configuration, seeded Monte Carlo sweeps, CSV/SVG reporting, and the
//! file formats the `folo` binary speaks.

pub mod config;
pub mod plot;
pub mod record_io;
pub mod report;
pub mod runner;
pub mod trial;
