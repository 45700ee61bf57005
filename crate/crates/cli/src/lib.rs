//! Command-line pipeline for the house-elevation analysis.

pub mod commands;
pub mod config;
pub mod manifest;
