//! Placement of a fixed-altitude aerial relay between a ground base station
//! and a street-level user in a segmented (LOS / obstructed) propagation
//! environment.

pub mod baselines;
pub mod channel;
pub mod cost;
pub mod geometry;
pub mod harness;
pub mod report;
pub mod search;
pub mod terrain;
