//! Scenario configuration, study orchestration and report emission.

pub mod config;
pub mod maps;
pub mod output;
pub mod study;
pub mod svg;
pub mod verify;
pub mod worlds;
