//! Gaussian regularization of speaker embeddings with variational
//! auto-encoders, plus the cosine, PCA/LDA and PLDA scoring back-ends and
//! the evaluation metrics used to compare them.

pub mod backend;
pub mod cli;
mod codec;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod vae;

pub use error::{Error, Result};
