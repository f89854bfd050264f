//! File formats, multi-threaded training and the `itemvec` command line on top
//! of [`itemvec_core`].
//!
//! Embedding files use the word2vec layout: a `"<rows> <dim>"` header followed
//! by one row per item, either as text or as little-endian `f32` bytes.

mod error;

pub mod embeddings;
pub mod input;
pub mod parallel;
pub mod report;

pub use crate::embeddings::{Embeddings, Encoding};
pub use crate::error::{Error, Result};
pub use crate::input::{read_catalog, read_corpus, write_catalog, write_corpus, InputFormat};
pub use crate::parallel::train;
