//! The D0-D5 cascade configurations, evaluation against a gold corpus and
//! the comparison report.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cg::{disambiguate_corpus, Grammar, Tier};
use crate::combine::{align, resolve_sentence, CombinationMode, TagMapping};
use crate::corpus::{AmbiguityMetrics, AnnotatedCorpus, Cohort, Sentence, Tagset};
use crate::error::{Error, Result};
use crate::hmm::HmmTagger;
use crate::morph::{analyze_tokens, GuesserConfig, Lexicon};
use crate::tokenize::{tokenize, TokenizationMode, TokenizationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConfigLabel {
    D0,
    D1,
    D2,
    D3a,
    D3b,
    D4,
    D5,
}

/// One step of a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Morph,
    Rules(Tier),
    Hmm(CombinationMode),
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Morph => "morph",
            Stage::Rules(_) => "cg",
            Stage::Hmm(_) => "hmm",
        }
    }
}

impl ConfigLabel {
    pub const ALL: [ConfigLabel; 7] = [
        ConfigLabel::D0,
        ConfigLabel::D1,
        ConfigLabel::D2,
        ConfigLabel::D3a,
        ConfigLabel::D3b,
        ConfigLabel::D4,
        ConfigLabel::D5,
    ];

    pub fn stages(self) -> Vec<Stage> {
        use CombinationMode::*;
        let rules = |tier| Stage::Rules(tier);
        match self {
            ConfigLabel::D0 => vec![Stage::Morph],
            ConfigLabel::D1 => vec![Stage::Morph, rules(Tier::Grammar)],
            ConfigLabel::D2 => vec![Stage::Morph, rules(Tier::Heuristic)],
            ConfigLabel::D3a => vec![Stage::Morph, rules(Tier::Heuristic), Stage::Hmm(Careful)],
            ConfigLabel::D3b => vec![Stage::Morph, rules(Tier::Heuristic), Stage::Hmm(Unambiguous)],
            ConfigLabel::D4 => vec![Stage::Morph, rules(Tier::Grammar), Stage::Hmm(Unambiguous)],
            ConfigLabel::D5 => vec![Stage::Morph, Stage::Hmm(Unambiguous)],
        }
    }

    pub fn uses_rules(self) -> bool {
        self.stages().iter().any(|s| matches!(s, Stage::Rules(_)))
    }

    pub fn uses_hmm(self) -> bool {
        self.stages().iter().any(|s| matches!(s, Stage::Hmm(_)))
    }
}

impl fmt::Display for ConfigLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigLabel::D0 => "D0",
            ConfigLabel::D1 => "D1",
            ConfigLabel::D2 => "D2",
            ConfigLabel::D3a => "D3a",
            ConfigLabel::D3b => "D3b",
            ConfigLabel::D4 => "D4",
            ConfigLabel::D5 => "D5",
        })
    }
}

impl FromStr for ConfigLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConfigLabel::ALL
            .into_iter()
            .find(|l| l.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("configuration {s:?}; expected one of D0 D1 D2 D3a D3b D4 D5")))
    }
}

/// Everything a cascade may need. Only the resources of the selected
/// configuration's stages have to be present.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub lexicon: Option<Lexicon>,
    pub guesser: Option<GuesserConfig>,
    pub grammar: Option<Grammar>,
    pub tagger: Option<HmmTagger>,
    pub mapping: Option<TagMapping>,
    pub policy: TokenizationPolicy,
}

fn require<'a, T>(value: &'a Option<T>, stage: Stage, resource: &'static str) -> Result<&'a T> {
    value.as_ref().ok_or(Error::MissingResource {
        stage: stage.name(),
        resource,
    })
}

impl Resources {
    /// Fails with the first resource a stage of `label` lacks.
    pub fn check(&self, label: ConfigLabel) -> Result<()> {
        for stage in label.stages() {
            match stage {
                Stage::Morph => {
                    require(&self.lexicon, stage, "fine lexicon")?;
                    require(&self.guesser, stage, "guesser")?;
                }
                Stage::Rules(_) => {
                    require(&self.grammar, stage, "grammar")?;
                }
                Stage::Hmm(_) => {
                    require(&self.tagger, stage, "hmm model")?;
                    require(&self.mapping, stage, "mapping")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub corpus: AnnotatedCorpus,
    /// Per sentence and cohort: ambiguity the coarse tag could not resolve.
    /// All false for configurations without an HMM stage.
    pub residual: Vec<Vec<bool>>,
}

impl RunOutput {
    pub fn residual_count(&self) -> usize {
        self.residual.iter().flatten().filter(|&&r| r).count()
    }
}

/// Runs configuration `label` over raw text.
pub fn run(label: ConfigLabel, text: &str, resources: &Resources) -> Result<RunOutput> {
    resources.check(label)?;
    let mut corpus = AnnotatedCorpus::empty(Tagset::Fine);
    let mut residual = Vec::new();
    for stage in label.stages() {
        match stage {
            Stage::Morph => {
                let fine_policy = resources.policy.with_mode(TokenizationMode::Fine);
                let tokens = tokenize(text, &fine_policy);
                corpus = analyze_tokens(
                    &tokens,
                    require(&resources.lexicon, stage, "fine lexicon")?,
                    require(&resources.guesser, stage, "guesser")?,
                )?;
                residual = corpus.sentences().iter().map(|s| vec![false; s.len()]).collect();
            }
            Stage::Rules(tier) => {
                corpus = disambiguate_corpus(corpus, require(&resources.grammar, stage, "grammar")?, tier);
            }
            Stage::Hmm(mode) => {
                let tagger = require(&resources.tagger, stage, "hmm model")?;
                let mapping = require(&resources.mapping, stage, "mapping")?;
                let (c, r) = combine_with_hmm(corpus, text, tagger, mapping, &resources.policy, mode)?;
                corpus = c;
                residual = r;
            }
        }
    }
    Ok(RunOutput { corpus, residual })
}

/// Tags the coarse tokenization of `text` and maps each coarse tag onto the
/// aligned, still-ambiguous fine cohorts.
fn combine_with_hmm(
    corpus: AnnotatedCorpus,
    text: &str,
    tagger: &HmmTagger,
    mapping: &TagMapping,
    policy: &TokenizationPolicy,
    mode: CombinationMode,
) -> Result<(AnnotatedCorpus, Vec<Vec<bool>>)> {
    let coarse = tokenize(text, &policy.with_mode(TokenizationMode::Coarse));
    if coarse.len() != corpus.sentences().len() {
        return Err(Error::TokenMismatch {
            index: coarse.len().min(corpus.sentences().len()),
            message: format!(
                "{} coarse sentences vs {} fine sentences",
                coarse.len(),
                corpus.sentences().len()
            ),
        });
    }
    let results: Vec<(Sentence, Vec<bool>)> = corpus
        .sentences()
        .par_iter()
        .zip(&coarse)
        .map(|(fine, coarse)| {
            let words: Vec<&str> = coarse.iter().map(|t| t.surface.as_str()).collect();
            let tags = tagger.tag(&words)?;
            let links = align(&fine.surfaces(), &words, policy)?;
            resolve_sentence(fine, &tags, &links, mapping, mode)
        })
        .collect::<Result<_>>()?;
    let (sentences, residual) = results.into_iter().unzip();
    Ok((AnnotatedCorpus::new(Tagset::Fine, sentences)?, residual))
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRow {
    pub label: String,
    pub tokens: usize,
    pub ambiguous: usize,
    pub readings: usize,
    /// Cohorts whose gold reading is missing from the output.
    pub errors: usize,
}

impl EvalRow {
    pub fn from_counts(label: impl Into<String>, tokens: usize, ambiguous: usize, readings: usize, errors: usize) -> Self {
        EvalRow {
            label: label.into(),
            tokens,
            ambiguous,
            readings,
            errors,
        }
    }

    pub fn ambiguous_percent(&self) -> f64 {
        100.0 * self.ambiguous as f64 / self.tokens as f64
    }

    pub fn readings_per_word(&self) -> f64 {
        self.readings as f64 / self.tokens as f64
    }

    pub fn error_rate_percent(&self) -> f64 {
        100.0 * self.errors as f64 / self.tokens as f64
    }
}

/// Scores `output` against a fully disambiguated `gold` corpus.
///
/// Gold cohorts without a marker count as gold when they have exactly one
/// reading. A cohort is an error when the gold reading is absent from the
/// output, whether or not the output is still ambiguous.
pub fn evaluate(output: &AnnotatedCorpus, gold: &AnnotatedCorpus, label: impl Into<String>) -> Result<EvalRow> {
    let out: Vec<&Cohort> = output.cohorts().collect();
    let gold: Vec<&Cohort> = gold.cohorts().collect();
    for (index, (o, g)) in out.iter().zip(&gold).enumerate() {
        if o.surface() != g.surface() {
            return Err(Error::TokenMismatch {
                index,
                message: format!("output {:?} vs gold {:?}", o.surface(), g.surface()),
            });
        }
    }
    if out.len() != gold.len() {
        return Err(Error::TokenMismatch {
            index: out.len().min(gold.len()),
            message: format!("output has {} tokens, gold has {}", out.len(), gold.len()),
        });
    }
    let mut errors = 0;
    for (index, (o, g)) in out.iter().zip(&gold).enumerate() {
        let Some(reading) = g.resolved_gold() else {
            return Err(Error::Invalid(format!(
                "gold token {index} {:?} is not disambiguated",
                g.surface()
            )));
        };
        if !o.contains(reading) {
            errors += 1;
        }
    }
    let m = AmbiguityMetrics::of_cohorts(out)?;
    Ok(EvalRow::from_counts(label, m.tokens, m.ambiguous, m.readings, errors))
}

const HEADERS: [&str; 6] = ["Config", "Amb. words", "Readings", "Readings/word", "Errors", "Error rate"];

fn cells(row: &EvalRow) -> [String; 6] {
    [
        row.label.clone(),
        format!("{:.1} %", row.ambiguous_percent()),
        row.readings.to_string(),
        format!("{:.2}", row.readings_per_word()),
        row.errors.to_string(),
        format!("{:.2} %", row.error_rate_percent()),
    ]
}

/// Fixed-width comparison table, rows in the given order.
pub fn report(rows: &[EvalRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Invalid("report: no rows".into()));
    }
    let body: Vec<[String; 6]> = rows.iter().map(cells).collect();
    let mut widths = HEADERS.map(str::len);
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cols: &[String]| {
        let mut l = format!("{:<w$}", cols[0], w = widths[0]);
        for (c, w) in cols[1..].iter().zip(&widths[1..]) {
            l.push_str(&format!("  {c:>w$}"));
        }
        out.push_str(&l);
        out.push('\n');
    };
    line(&HEADERS.map(String::from));
    for r in &body {
        line(r);
    }
    Ok(out)
}

/// Tab-separated variant of [`report`] with the same columns.
pub fn report_tsv(rows: &[EvalRow]) -> String {
    let mut out = HEADERS.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&cells(r).join("\t"));
        out.push('\n');
    }
    out
}
