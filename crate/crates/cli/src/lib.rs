//! Pipeline orchestration behind the `vidssm` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod document;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{CliError, Stage};
