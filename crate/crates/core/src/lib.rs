//! Phrase-based statistical machine translation for low-resource language
//! pairs: pivot triangulation, transliteration mining, synthetic bitexts and
//! a log-linear stack decoder.

pub mod align;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod evalkit;
pub mod ngramlm;
pub mod phrasetab;
pub mod pipeline;
pub mod pivot;
pub mod translit;

pub use error::{Error, Result};
