//! Item embeddings learned from co-consumption sets.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the numerical parts:
//!
//! * [`corpus`]: vocabulary construction, set ingestion and frequency subsampling.
//! * [`trainer`]: skip-gram with negative sampling over item sets.
//! * [`svd`]: the item-item co-occurrence SVD baseline.
//! * [`similarity`]: cosine similarity and exact top-k neighbor queries.
//! * [`eval`]: genre-consistency scoring, mislabel reports and a synthetic corpus generator.
//!
//! File formats, threading and the command line live in the `itemvec` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
mod error;
pub mod eval;
pub mod linalg;
mod rng;
pub mod similarity;
pub mod svd;
pub mod trainer;

pub use crate::corpus::{discard_probability, subsample, Corpus, IngestStats, Vocabulary};
pub use crate::error::{Error, Result};
pub use crate::eval::{
    genre_consistency, mislabel_report, softmax_prob, synth_corpus, unpopular_slice,
    genre_consistency_over, softmax_row, ConsistencyReport, GenreCatalog, GenreScore, MislabelRecord,
    SynthConfig,
};
pub use crate::rng::{seeded_rng, ItemRng};
pub use crate::similarity::{cosine, ranking, top_k, ItemSpace, NeighborList, Variant};
pub use crate::svd::{
    build_cooccurrence, normalize, svd_representation, truncated_svd, CooccurrenceMatrix,
    SvdModel, SvdOptions, TruncatedSvd,
};
pub use crate::trainer::{
    generate_pairs, mean_pair_loss, sigmoid, train, window_pairs, ChunkJob, EmbeddingModel, EpochPlan,
    NegativeTable, PairMode, Real, SharedParams, TrainConfig, Trainer,
};
