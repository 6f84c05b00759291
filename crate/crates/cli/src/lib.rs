//! Batch front-end for `fracheat-core`: JSON experiment configs in,
//! `report.json` and CSV tables out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod report;
pub mod stages;

pub use app::{execute, run, Cli, Command};
pub use config::Config;
