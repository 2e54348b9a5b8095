//! Learning NC part-program generator for prismatic parts.
//!
//! A deterministic process planner acts as teacher for a bank of small
//! feedforward networks, one per machining-operation class. Programs from
//! either source are emitted as NC text, split into geometry and function
//! streams, simulated against a height-field stock, and moved between
//! endpoints over a framed, checksummed link.

pub mod geometry;
pub mod part_model;
pub mod recognition;
pub mod planner;
pub mod nc;
pub mod sim;
pub mod dnc;
pub mod neural;
pub mod corpus;
pub mod config;
pub mod pipeline;
