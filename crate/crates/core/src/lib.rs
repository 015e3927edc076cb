//! Knowledge-guided reinforcement learning for open attribute value
//! extraction.
//!
//! A candidate-answer stream (one extracted answer per retrieved article) is
//! walked by a deep Q-network agent that decides, two answers at a time,
//! whether to keep the current best, replace it, or stop. Its state mixes
//! extractor confidences with string-similarity features against reference
//! values of sibling entities from a knowledge graph.

pub mod baselines;
pub mod dqn;
pub mod env;
pub mod error;
pub mod harness;
pub mod io;
pub mod kg;
pub mod parallel;
pub mod similarity;
pub mod state;
pub mod synth;

pub use error::{Error, Result};
