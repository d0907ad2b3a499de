//! Compressor tree synthesis for multipliers and multiply-accumulators,
//! tuned to a standard-cell library.
//!
//! The pipeline: parse a Liberty timing library, characterize candidate
//! compressor implementations into macro timing models, build a
//! Dadda/Wallace compressor tree, relax the discrete wiring and
//! implementation choices into probabilities, minimize differentiable
//! timing/area objectives by gradient descent, legalize back to a
//! discrete design, and emit a verified gate-level Verilog netlist.

pub mod artifact;
pub mod autodiff;
pub mod builtin;
pub mod compressor;
pub mod error;
pub mod golden;
pub mod legalize;
pub mod liberty;
pub mod logic;
pub mod lut;
pub mod netlist;
pub mod objective;
pub mod optimize;
pub mod relaxed;
pub mod sim;
pub mod sta;
pub mod tree;

pub use error::{Error, Result};
