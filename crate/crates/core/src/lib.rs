//! Pole-to-earth fault location on DC railway feeds from the 600 Hz ripple
//! component of a 12-pulse rectifier.
//!
//! The crate covers the whole pipeline: phasor-domain simulation of the
//! faulted feed ([`circuit`]), rectifier ripple synthesis and single-bin
//! phasor extraction ([`ripple`]), labelled dataset generation
//! ([`dataset`]), a small MLP regressor ([`nn`]) trained by imperialist
//! competition, particle swarm or momentum gradient descent ([`optim`]),
//! and the error metrics used to compare them ([`eval`]).

pub mod circuit;
pub mod cli;
pub mod dataset;
mod error;
pub mod eval;
pub mod model_file;
pub mod nn;
mod numfmt;
pub mod optim;
pub mod ripple;

pub use error::{Error, Result};
pub use numfmt::format_f64;
