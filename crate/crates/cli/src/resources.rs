//! The resource-directory convention used by `hytag tag`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hytag::cg::Grammar;
use hytag::combine::TagMapping;
use hytag::hmm::{open_class_guesser, HmmModel, HmmTagger};
use hytag::morph::{GuesserConfig, Lexicon};
use hytag::pipeline::{ConfigLabel, Resources, Stage};
use hytag::{Error, Tagset, TokenizationPolicy};

use crate::CliError;

pub const FINE_LEXICON: &str = "fine.lex";
pub const COARSE_LEXICON: &str = "coarse.lex";
pub const GUESSER: &str = "guesser.rules";
pub const COARSE_GUESSER: &str = "coarse.rules";
pub const GRAMMAR: &str = "grammar.cg";
pub const MODEL: &str = "model.hmm";
pub const MAPPING: &str = "mapping.map";
pub const POLICY: &str = "policy.tok";

pub struct ResourceDir {
    root: PathBuf,
}

/// Opens `path` and parses it, tagging any failure with the file name.
pub fn load<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> hytag::Result<T>) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    parse(BufReader::new(file)).map_err(|e| CliError::from_core(e).context(path))
}

impl ResourceDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResourceDir { root: root.into() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Loads `name` if it exists; a missing file is reported against `stage`.
    fn required<T>(
        &self,
        name: &str,
        stage: Stage,
        resource: &'static str,
        parse: impl FnOnce(BufReader<File>) -> hytag::Result<T>,
    ) -> Result<T, CliError> {
        let path = self.path(name);
        if !path.is_file() {
            let err = Error::MissingResource {
                stage: stage.name(),
                resource,
            };
            return Err(CliError::from_core(err).context(&path));
        }
        load(&path, parse)
    }

    fn optional<T>(
        &self,
        name: &str,
        parse: impl FnOnce(BufReader<File>) -> hytag::Result<T>,
    ) -> Result<Option<T>, CliError> {
        let path = self.path(name);
        if path.is_file() {
            load(&path, parse).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Loads exactly the resources the stages of `label` use.
    pub fn load_for(&self, label: ConfigLabel) -> Result<Resources, CliError> {
        let mut res = Resources {
            policy: self.optional(POLICY, TokenizationPolicy::parse)?.unwrap_or_default(),
            ..Default::default()
        };
        for stage in label.stages() {
            match stage {
                Stage::Morph => {
                    res.lexicon = Some(self.required(FINE_LEXICON, stage, "fine lexicon", |r| {
                        Lexicon::parse(r, Tagset::Fine)
                    })?);
                    res.guesser = Some(self.required(GUESSER, stage, "guesser", |r| {
                        GuesserConfig::parse(r, Tagset::Fine)
                    })?);
                }
                Stage::Rules(_) => {
                    res.grammar = Some(self.required(GRAMMAR, stage, "grammar", Grammar::parse)?);
                }
                Stage::Hmm(_) => {
                    let model = self.required(MODEL, stage, "hmm model", HmmModel::parse)?;
                    let lexicon = self.required(COARSE_LEXICON, stage, "coarse lexicon", |r| {
                        Lexicon::parse(r, Tagset::Coarse)
                    })?;
                    let guesser = match self.optional(COARSE_GUESSER, |r| GuesserConfig::parse(r, Tagset::Coarse))? {
                        Some(g) => g,
                        None => open_class_guesser(&lexicon).map_err(CliError::from_core)?,
                    };
                    res.tagger = Some(HmmTagger::new(model, lexicon, guesser));
                    res.mapping = Some(self.required(MAPPING, stage, "mapping", TagMapping::parse)?);
                }
            }
        }
        Ok(res)
    }
}
