//! Quasi-isometry promotion on finite truncations of trees and hyperbolic
//! fillings.
//!
//! The crate builds the discrete objects (pseudo-regular trees, end spaces,
//! fillings of model spaces), certifies isoperimetric data, constructs
//! quasi-isometries from end-space correspondences, and promotes them to
//! bounded-distance bijections by bounded-radius bipartite matching.

pub mod cheeger;
pub mod ends;
pub mod error;
pub mod fill;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod qi;
pub mod rational;
pub mod tree;
pub mod whyte;

pub use error::{Error, Result};
pub use graph::{Truncation, UdbgGraph, VertexId};
pub use rational::Rational;
