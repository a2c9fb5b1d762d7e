//! Batch driver: configuration, report drivers and error records.

pub mod commands;
pub mod config;
pub mod error;
