//! File formats, configuration and the `warpcost` command line on top of
//! [`warpcost_core`].

pub mod cli;
pub mod config;
pub mod formats;
pub mod model_io;

pub use warpcost_core as core;
