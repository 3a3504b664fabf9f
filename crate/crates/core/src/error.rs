use std::io;

use thiserror::Error;

/// Errors produced while loading resources or running the tagging cascade.
#[derive(Debug, Error)]
pub enum Error {
    /// A line in one of the text formats could not be parsed.
    #[error("{format} line {line}: {message}")]
    Format {
        format: &'static str,
        line: usize,
        message: String,
    },

    /// A value violates a type invariant (empty tag, duplicate reading, ...).
    #[error("invalid {0}")]
    Invalid(String),

    #[error("empty corpus")]
    EmptyCorpus,

    /// A tag of the HMM tagset is not a member of any equivalence class.
    #[error("unemittable tag {0:?}")]
    UnemittableTag(String),

    /// The model assigns zero probability to every tag path of a sentence.
    #[error("impossible sequence")]
    ImpossibleSequence,

    /// A word's equivalence class is not known to the loaded model.
    #[error("word {word:?} maps to class {{{tags}}} which the model does not define")]
    UnknownClass { word: String, tags: String },

    #[error("cannot align fine token {fine} with coarse token {coarse}: {message}")]
    Alignment {
        fine: usize,
        coarse: usize,
        message: String,
    },

    #[error("token streams diverge at token {index}: {message}")]
    TokenMismatch { index: usize, message: String },

    /// A cascade stage needs a resource the caller did not provide.
    #[error("stage {stage} requires the {resource} resource")]
    MissingResource {
        stage: &'static str,
        resource: &'static str,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by resources that do not fit together
    /// (as opposed to malformed input).
    pub fn is_resource_inconsistency(&self) -> bool {
        matches!(
            self,
            Error::MissingResource { .. }
                | Error::UnemittableTag(_)
                | Error::ImpossibleSequence
                | Error::UnknownClass { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
