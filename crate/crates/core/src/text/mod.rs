//! Corpus ingestion, preprocessing and vocabulary construction.

pub mod corpus;
pub mod preprocess;
pub mod synth;
pub mod vocab;

pub use corpus::{read_corpus, write_corpus, Example};
pub use preprocess::{first_sentence, preprocess, split_first_sentence};
pub use synth::synth_copy_corpus;
pub use vocab::{build_vocab, Vocabulary};
