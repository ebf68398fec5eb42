//! Embedding models for short documents in user timelines.
//!
//! The library trains dense vector representations for tweets by combining
//! two prediction tasks over a shared parameter store:
//!
//! - a word context model that predicts each word of a tweet from its
//!   surrounding words plus the tweet vector, and
//! - a temporal context model that predicts a tweet from its chronological
//!   neighbours in the author's timeline, weighted by a learned attention
//!   distribution, optionally conditioned on a per-user vector.
//!
//! Both prediction heads use hierarchical softmax over binary coding trees,
//! so a forward/backward pass costs `O(log)` in the label-space size.
//! Training uses Adam; evaluation averages tweet vectors per entity and
//! scores them with a linear hinge-loss classifier.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod params;
pub mod tensor;
pub mod trainer;
pub mod tweetctx;
pub mod wordctx;

pub use corpus::{CodingTree, Corpus, Tweet, User, Vocabulary};
pub use error::Error;
pub use params::{AdamHyper, AdamState, ParameterStore, Slot};
pub use tensor::Matrix;
pub use trainer::{AttentionMode, AttentionReport, LossCurve, TrainConfig, TrainOutput};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
