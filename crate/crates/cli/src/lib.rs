//! Command-line front end for `ncfdg`.

pub mod commands;
pub mod config;
pub mod expr;
