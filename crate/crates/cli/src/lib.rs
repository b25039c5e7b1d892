//! Experiment harness for adversarial risk certificates: configuration,
//! data files, the sinc generator, Monte Carlo validation and the
//! `advcert` subcommands.

// NaN-rejecting guards are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod sinc;
pub mod validate;
