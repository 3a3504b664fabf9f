//! Hybrid part-of-speech disambiguation.
//!
//! A lexicon-driven analyzer ([`morph`]) proposes every reading of every
//! word, a Constraint Grammar engine ([`cg`]) discards readings that
//! contextual rules rule out, and an HMM tagger over a compact tagset
//! ([`hmm`]) supplies a guess for whatever the rules leave open. The
//! [`combine`] module aligns the two token streams and maps coarse tags onto
//! fine readings; [`pipeline`] wires the stages into the D0-D5 cascade and
//! scores the result against a gold corpus.

pub mod cg;
pub mod combine;
pub mod corpus;
pub mod error;
pub mod hmm;
pub mod morph;
pub mod pipeline;
pub mod tokenize;

pub use corpus::{ambiguity_metrics, AmbiguityMetrics, AnnotatedCorpus, Cohort, Reading, Sentence, Tag, Tagset};
pub use error::{Error, Result};
pub use tokenize::{tokenize, Token, TokenizationMode, TokenizationPolicy};
