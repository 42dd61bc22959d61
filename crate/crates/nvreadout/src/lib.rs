//! File formats, presets, plotting and the command-line front end for
//! [`nvreadout_core`].

pub mod cli;
pub mod config;
pub mod csvio;
mod error;
pub mod parallel;
pub mod runner;
pub mod seqfmt;
pub mod svg;

pub use crate::error::{AppError, Result};
pub use nvreadout_core as core;
