//! Bias audit of machine-generated news against paired reference articles.
//!
//! Three levels of measurement are provided: group-word distributions
//! ([`word_bias`]), sentiment and toxicity of group-assigned sentences
//! ([`sentence_bias`]), and topic-based semantic shares ([`doc_bias`], built
//! on the LDA implementation in [`topics`]).
//!
//! Numeric kernels are generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the pipeline uses.

pub mod corpus;
pub mod doc_bias;
pub mod error;
pub mod lexicon;
pub mod pipeline;
pub mod prejudice;
pub mod report;
pub mod scalar;
pub mod sentence_bias;
pub mod special;
pub mod stats;
pub mod textproc;
pub mod topics;
pub mod transport;
pub mod word_bias;

pub use error::{Error, Result};
pub use scalar::Real;

pub type GroupDistribution = transport::Distribution<f64>;
pub type GroupDistribution32 = transport::Distribution<f32>;
pub type IntervalEstimate = stats::IntervalEstimate<f64>;
