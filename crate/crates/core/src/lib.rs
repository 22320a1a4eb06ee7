//! Multiple instance learning with graph neural networks.
//!
//! A bag of instance feature vectors is turned into a fully connected graph
//! whose edge weights are learned from the instances and a pooled context
//! vector. Spectral (Chebyshev) or spatial (weighted-mean SAGE) convolutions
//! run on that graph, a graph pooling layer condenses it to one vector, and a
//! small MLP head scores the bag. Training uses the crate's own reverse-mode
//! differentiation engine in [`diffcore`].

pub mod cli;
pub mod data;
pub mod diffcore;
pub mod error;
pub mod fmt;
pub mod graphcore;
pub mod harness;
pub mod layers;
pub mod model;

pub use error::{Error, ErrorClass, Result};
