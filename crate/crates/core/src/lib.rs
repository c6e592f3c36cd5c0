//! Detection of ad-targeting interests linked to sensitive personal data.
//!
//! The pipeline goes: load an ad-preference catalog ([`corpus`]), score each
//! preference against a keyword dictionary with word-embedding similarity
//! ([`embeddings`], [`scoring`]), aggregate panelist votes into labels
//! ([`labeling`]), tune a threshold classifier on the labeled scores
//! ([`classifier`]), quantify population exposure through union-audience
//! reach queries ([`exposure`]), and maintain a per-user audit history
//! against the resulting blacklist ([`audit`]). [`report`] renders tables,
//! CDF files and the identification-attack cost estimate.

pub mod audit;
pub mod cdf;
pub mod classifier;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod exposure;
pub mod labeling;
pub mod report;
pub mod scoring;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
