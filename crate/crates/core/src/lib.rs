//! Authorship verification with multi-headed character-level recurrent
//! language models.
//!
//! One recurrent network is trained per problem corpus. Its hidden layer is
//! shared by every known author while each author owns a separate softmax
//! head. Unknown documents are scored by the cross entropy each head assigns
//! them, and the resulting matrix is turned into per-problem probabilities by
//! normalization, ranking and median alignment.

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod pipeline;
pub mod preprocess;
pub mod rnn;
pub mod scoring;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use preprocess::{Alphabet, CanonicalRules, Language, SymbolSequence};
pub use rnn::{HiddenState, ModelParams, StepOutput};
pub use scoring::{ScoreMatrix, VerdictSet};
pub use trainer::{TrainConfig, TrainedModel};
