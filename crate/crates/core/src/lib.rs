//! Graph embedding with text-derived bridge nodes.
//!
//! The pipeline: parse an [`InfoNetwork`], build the bipartite-augmented
//! [`HeteroNetwork`], precompute [`BiasTables`] for the three-case biased
//! walk, [`train`] skip-gram embeddings with negative sampling, and score
//! them with the node-classification harness in [`eval`].

pub mod alias;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod seed;
pub mod synth;
pub mod train;
pub mod tune;
pub mod walk;

pub use alias::AliasTable;
pub use embedding::{init_embeddings, EmbeddingMatrix};
pub use error::{Error, Result};
pub use eval::{evaluate, LabelSet, MetricsReport, SplitSpec};
pub use graph::{HeteroNetwork, InfoNetwork, NodeId, NodeKind};
pub use train::{train, Model, TrainConfig, Trained, WalkStarts};
pub use tune::{grid_search, GridSpec};
pub use walk::{BiasMode, BiasTables, Walk, WalkConfig};
