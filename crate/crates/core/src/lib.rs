//! Lossless two-stage compression: a predictive rank-coding preprocessor
//! that turns predictable tokens into runs of small integers, followed by
//! gzip. Also ships the corpus generator and benchmark harness used to
//! compare the pipeline against plain gzip.
//!
//! Pipeline: [`tokenizer::tokenize`] → [`transform::forward`] →
//! [`transform::serialize_ranks`] → [`container::gzip_compress`], wrapped in
//! a `.gpz` container by [`container::compress_file`].

pub mod bench;
pub mod cli;
pub mod container;
pub mod corpusgen;
pub mod error;
pub mod external;
pub mod predictor;
pub mod tokenizer;
pub mod transform;

pub use container::{compress_file, decompress_file, CompressOptions};
pub use error::{Error, Result};
