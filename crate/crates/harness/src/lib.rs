//! Scenario runner, wire codec, scripted and network operators, timeline
//! log and verification for the teleassist simulator.

pub mod codec;
pub mod files;
pub mod operator;
pub mod runner;
pub mod server;
pub mod svg;
pub mod timeline;
pub mod verify;

pub use runner::{RunOptions, RunReport, Runner};
