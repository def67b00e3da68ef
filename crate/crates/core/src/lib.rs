//! Self-adjusting network loop at desk scale.
//!
//! A deterministic switch model stamps in-band telemetry on every packet and
//! mirrors it to a collector; supervised classifiers learn traffic classes
//! from the labeled records; an adjuster maps classes to queue priorities and
//! writes them back into the switch registers.

pub mod adjuster;
pub mod cli;
pub mod collector;
pub mod ml;
pub mod model;
pub mod qoe;
pub mod scenario;
pub mod switch;
pub mod traffic;
