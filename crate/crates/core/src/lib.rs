//! Contrastive meta-learning for few-shot node classification.
//!
//! The pipeline samples N-way K-shot episodes from a labelled graph, represents
//! every node by a personalized-PageRank subgraph, encodes each subgraph with a
//! one-layer GCN into two views (central node and mean pool), and trains the
//! encoder with a two-step episode: a contrastive step on the support set
//! (optionally enlarged with mixed-up "hard" classes) followed by a
//! cross-entropy step on the query set. Meta-test fits a per-task logistic
//! regression on frozen embeddings.
//!
//! All gradients are analytic; [`encoder::finite_diff_check`] verifies them.

pub mod contrastive;
pub mod encoder;
pub mod episode;
pub mod error;
pub mod eval;
pub mod graph;
pub mod mixup;
pub mod ppr;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
