//! Agent-based simulation of voter-mobilization banners on a synthetic
//! social network.

pub mod agent;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod feed;
pub mod population;
pub mod rng;
