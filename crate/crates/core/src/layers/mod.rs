//! Neural building blocks: the adjacency learning layer, Chebyshev and SAGE
//! graph convolutions, graph poolings, dense layers, per-bag batch
//! normalization and dropout.

mod adjacency;
mod conv;
mod dense;
mod norm;
mod pool;

pub use adjacency::{context_vector, cross_correlation, AdjacencyLearner, ContextMode};
pub use conv::{ChebConv, GraphConv, SageConv};
pub use dense::{dense, Activation, Dense};
pub use norm::{dropout, BatchNorm, BN_EPS, BN_MOMENTUM};
pub use pool::{simple_pool, AttentionPool, PoolMode};
