//! Library backing the `fcurve` command line: the fitted feature space,
//! the benchmark grid harness, and the subcommand implementations.

pub mod commands;
pub mod grid;
pub mod manifest;
pub mod space;
