//! Supervised classification of curves: discrete series are smoothed with
//! B-splines, decomposed into functional principal components per derivative
//! order (level, velocity, acceleration), and the pooled scores feed CART
//! trees and random forests. Includes a conditional permutation importance
//! for the correlated derivative features, separation-curve explanations of
//! tree splits, and Gaussian-process scenario generators for benchmarks.

pub mod augment;
pub mod basis;
pub mod cart;
pub mod dataio;
pub mod error;
pub mod forest;
pub mod fpca;
pub mod importance;
mod quadrature;
pub mod simgen;

pub use error::{Error, ErrorClass, Result};
