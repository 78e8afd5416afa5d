//! Skip-gram word embeddings trained with negative sampling, where a word is
//! represented by its own vector alone, by the sum of its vector and its
//! character n-gram vectors, or by the sum of its vector and its morpheme
//! vectors.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod persist;
pub mod subword;
pub mod trainer;

pub use corpus::Vocab;
pub use error::{Error, Result};
pub use model::{ContextMode, EmbeddingModel, Sigmoid};
pub use subword::{MorphemeLexicon, NgramParams, Strategy, SubwordIndexer};
pub use trainer::{train, TrainConfig, TrainReport};
