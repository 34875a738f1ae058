//! Shifting-pattern time-series classification: a sliding-window LSTM
//! encoder whose per-window outputs are pooled by a max-of-averages
//! multi-instance head with adaptive block lengths and an optional
//! context regularizer.

pub mod cli;
pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io_util;
pub mod mil;
pub mod model_io;
pub mod numerics;
pub mod training;

pub use error::{Result, SpamsError};
