//! Algorithmic core of a hierarchical, cross-lingual entity-type classifier
//! for encyclopedia pages.
//!
//! Pages are tokenized into hashed subwords, encoded to a document vector,
//! and scored by a hierarchy-aware head whose deeper levels see the
//! shallower levels' logits. Labels are assigned by thresholding the finest
//! level and then reconciled across interlanguage-linked pages by
//! mean-frequency voting.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, threading
//! and the command line live in the companion `enetype` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adam;
pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod grad;
pub mod gradcheck;
pub mod head;
pub mod label;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod rng;
pub mod taxonomy;
pub mod tokenizer;
pub mod train;
pub mod voting;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use encoder::{DocVector, EncoderParams};
pub use error::{CheckpointError, Error, Result};
pub use grad::{Gradients, TensorGrad};
pub use head::{Feedback, HeadArch, HeadParams, LevelLogits};
pub use label::EneLabel;
pub use loss::{compute_weights, LossWeights};
pub use metrics::{label_histogram, micro_f1, ExtraPages, Metrics};
pub use model::{Input, Model};
pub use predict::{assign, Assignment, PageKey, PredictionSet};
pub use taxonomy::{LevelTargets, Taxonomy};
pub use tokenizer::{TokenSequence, Tokenizer};
pub use train::{Example, Executor, Sequential, TrainConfig};
pub use voting::{apply_voting, vote, LinkGroup, VoteMode, VoteResult, VoteRule};
