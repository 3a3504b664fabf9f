//! Lexicon lookup with an affix-rule guesser for unknown words.

use std::io::{BufRead, Write};

use indexmap::IndexMap;
use log::warn;

use crate::corpus::{AnnotatedCorpus, Cohort, Reading, Sentence, Tag, Tagset};
use crate::error::{Error, Result};
use crate::tokenize::Token;

/// Word forms and their readings, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    tagset: Tagset,
    entries: IndexMap<String, Vec<Reading>>,
    /// Retry a failed exact lookup with the lowercased word.
    pub case_folding: bool,
}

impl Lexicon {
    pub fn new(tagset: Tagset) -> Self {
        Lexicon {
            tagset,
            entries: IndexMap::new(),
            case_folding: true,
        }
    }

    pub fn tagset(&self) -> Tagset {
        self.tagset
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[Reading])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Adds a reading; returns `false` if the pair was already present.
    pub fn insert(&mut self, surface: &str, reading: Reading) -> Result<bool> {
        if surface.is_empty() || surface.contains(['\t', '\n']) {
            return Err(Error::Invalid(format!("lexicon surface {surface:?}")));
        }
        if self.tagset == Tagset::Coarse && reading.tags().len() != 1 {
            return Err(Error::Invalid(format!(
                "coarse lexicon entry {surface:?}: reading {reading} must be a single tag"
            )));
        }
        let readings = self.entries.entry(surface.to_string()).or_default();
        if readings.contains(&reading) {
            return Ok(false);
        }
        readings.push(reading);
        Ok(true)
    }

    /// Removes one reading of `surface`, dropping the entry when it was the last.
    pub fn remove(&mut self, surface: &str, reading: &Reading) -> bool {
        let Some(readings) = self.entries.get_mut(surface) else {
            return false;
        };
        let before = readings.len();
        readings.retain(|r| r != reading);
        let removed = readings.len() != before;
        if readings.is_empty() {
            self.entries.shift_remove(surface);
        }
        removed
    }

    /// Exact lookup, then lowercase lookup when case folding is on.
    pub fn lookup(&self, word: &str) -> Option<&[Reading]> {
        if let Some(r) = self.entries.get(word) {
            return Some(r);
        }
        if self.case_folding {
            let lower = word.to_lowercase();
            if lower != word {
                return self.entries.get(&lower).map(Vec::as_slice);
            }
        }
        None
    }

    /// Collects every cohort's readings under its surface form.
    pub fn from_corpus(corpus: &AnnotatedCorpus) -> Result<Self> {
        let mut lex = Lexicon::new(corpus.tagset());
        for cohort in corpus.cohorts() {
            for reading in cohort.readings() {
                lex.insert(cohort.surface(), reading.clone())?;
            }
        }
        Ok(lex)
    }

    /// Reads `surface<TAB>tags` lines. Duplicate pairs are dropped with a warning.
    pub fn parse(reader: impl BufRead, tagset: Tagset) -> Result<Self> {
        const FORMAT: &str = "lexicon";
        let mut lex = Lexicon::new(tagset);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((surface, tags)) = line.split_once('\t') else {
                return Err(Error::format(FORMAT, lineno, "expected surface<TAB>tags"));
            };
            if surface.is_empty() {
                return Err(Error::format(FORMAT, lineno, "empty surface"));
            }
            let reading =
                Reading::parse(tags).map_err(|e| Error::format(FORMAT, lineno, e.to_string()))?;
            if !lex
                .insert(surface, reading)
                .map_err(|e| Error::format(FORMAT, lineno, e.to_string()))?
            {
                warn!("lexicon line {lineno}: duplicate entry for {surface:?} ignored");
            }
        }
        Ok(lex)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for (surface, readings) in &self.entries {
            for reading in readings {
                writeln!(out, "{surface}\t{reading}")?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("lexicon text is UTF-8")
    }
}

/// Readings assigned to unknown words that start with `prefix` and end
/// with `suffix`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffixRule {
    prefix: Option<String>,
    suffix: Option<String>,
    readings: Vec<Reading>,
}

impl AffixRule {
    pub fn new(prefix: Option<String>, suffix: Option<String>, readings: Vec<Reading>) -> Result<Self> {
        let prefix = prefix.filter(|p| !p.is_empty()).map(|p| p.to_lowercase());
        let suffix = suffix.filter(|s| !s.is_empty()).map(|s| s.to_lowercase());
        if prefix.is_none() && suffix.is_none() {
            return Err(Error::Invalid("affix rule: neither prefix nor suffix".into()));
        }
        if readings.is_empty() {
            return Err(Error::Invalid("affix rule: no readings".into()));
        }
        Ok(AffixRule {
            prefix,
            suffix,
            readings,
        })
    }

    pub fn prefix(&self) -> Option<&str> {
        self.prefix.as_deref()
    }

    pub fn suffix(&self) -> Option<&str> {
        self.suffix.as_deref()
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    /// Affixes compare case-insensitively and may not overlap.
    pub fn matches(&self, word: &str) -> bool {
        let lower = word.to_lowercase();
        let p = self.prefix.as_deref().unwrap_or("");
        let s = self.suffix.as_deref().unwrap_or("");
        lower.chars().count() >= p.chars().count() + s.chars().count()
            && lower.starts_with(p)
            && lower.ends_with(s)
    }

    fn key(&self) -> String {
        match (&self.prefix, &self.suffix) {
            (Some(p), Some(s)) => format!("PREFIX:{p} SUFFIX:{s}"),
            (Some(p), None) => format!("PREFIX:{p}"),
            (None, Some(s)) => format!("SUFFIX:{s}"),
            (None, None) => unreachable!("affix rule without affixes"),
        }
    }
}

/// Supplies readings for words the lexicon does not know.
pub trait Guesser {
    fn guess(&self, word: &str) -> Vec<Reading>;
}

/// Ordered affix rules, a numeral reading and the open-class fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuesserConfig {
    tagset: Tagset,
    rules: Vec<AffixRule>,
    open_class: Vec<Reading>,
    numeral: Option<Reading>,
}

/// The reading digit-only fine tokens receive.
pub fn default_numeral_reading(tagset: Tagset) -> Option<Reading> {
    match tagset {
        Tagset::Fine => Some(Reading::parse("NUM CARD").expect("valid reading")),
        Tagset::Coarse => None,
    }
}

impl GuesserConfig {
    pub fn new(tagset: Tagset, rules: Vec<AffixRule>, open_class: Vec<Reading>) -> Result<Self> {
        if open_class.is_empty() {
            return Err(Error::Invalid("guesser: empty open class".into()));
        }
        Ok(GuesserConfig {
            tagset,
            rules,
            open_class,
            numeral: default_numeral_reading(tagset),
        })
    }

    pub fn with_numeral(mut self, numeral: Option<Reading>) -> Self {
        self.numeral = numeral;
        self
    }

    pub fn tagset(&self) -> Tagset {
        self.tagset
    }

    pub fn rules(&self) -> &[AffixRule] {
        &self.rules
    }

    pub fn open_class(&self) -> &[Reading] {
        &self.open_class
    }

    pub fn numeral(&self) -> Option<&Reading> {
        self.numeral.as_ref()
    }

    /// Parses rule lines (`PREFIX:un SUFFIX:al<TAB>A ABS`), `OPENCLASS<TAB>tags`
    /// and an optional `NUMERAL<TAB>tags`. Consecutive lines with the same
    /// affixes add readings to one rule.
    pub fn parse(reader: impl BufRead, tagset: Tagset) -> Result<Self> {
        const FORMAT: &str = "guesser";
        let mut rules: Vec<AffixRule> = Vec::new();
        let mut open_class: Vec<Reading> = Vec::new();
        let mut numeral = default_numeral_reading(tagset);
        let mut last_key: Option<String> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::format(FORMAT, lineno, m);
            let Some((head, tags)) = line.split_once('\t') else {
                return Err(err("expected selector<TAB>tags".into()));
            };
            let reading = Reading::parse(tags).map_err(|e| err(e.to_string()))?;
            if tagset == Tagset::Coarse && reading.tags().len() != 1 {
                return Err(err(format!("coarse reading {reading} must be a single tag")));
            }
            match head.trim() {
                "OPENCLASS" => {
                    if !open_class.contains(&reading) {
                        open_class.push(reading);
                    }
                    last_key = None;
                }
                "NUMERAL" => {
                    numeral = Some(reading);
                    last_key = None;
                }
                selector => {
                    let (mut prefix, mut suffix) = (None, None);
                    for part in selector.split_whitespace() {
                        if let Some(p) = part.strip_prefix("PREFIX:") {
                            prefix = Some(p.to_string());
                        } else if let Some(s) = part.strip_prefix("SUFFIX:") {
                            suffix = Some(s.to_string());
                        } else {
                            return Err(err(format!("unknown selector {part:?}")));
                        }
                    }
                    let rule = AffixRule::new(prefix, suffix, vec![reading.clone()])
                        .map_err(|e| err(e.to_string()))?;
                    let key = rule.key();
                    if last_key.as_deref() == Some(key.as_str()) {
                        let last = rules.last_mut().expect("key implies a rule");
                        if !last.readings.contains(&reading) {
                            last.readings.push(reading);
                        }
                    } else {
                        rules.push(rule);
                        last_key = Some(key);
                    }
                }
            }
        }
        if open_class.is_empty() {
            return Err(Error::Invalid("guesser: no OPENCLASS lines".into()));
        }
        Ok(GuesserConfig::new(tagset, rules, open_class)?.with_numeral(numeral))
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for rule in &self.rules {
            let key = rule.key();
            for reading in &rule.readings {
                writeln!(out, "{key}\t{reading}")?;
            }
        }
        for reading in &self.open_class {
            writeln!(out, "OPENCLASS\t{reading}")?;
        }
        if self.numeral != default_numeral_reading(self.tagset) {
            if let Some(n) = &self.numeral {
                writeln!(out, "NUMERAL\t{n}")?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("guesser text is UTF-8")
    }

    /// All tags the guesser can ever emit.
    pub fn tags(&self) -> impl Iterator<Item = &Tag> {
        self.rules
            .iter()
            .flat_map(|r| r.readings.iter())
            .chain(self.open_class.iter())
            .chain(self.numeral.iter())
            .flat_map(|r| r.tags().iter())
    }
}

impl Guesser for GuesserConfig {
    fn guess(&self, word: &str) -> Vec<Reading> {
        if let Some(n) = &self.numeral {
            if !word.is_empty() && word.chars().all(|c| c.is_ascii_digit()) {
                return vec![n.clone()];
            }
        }
        self.rules
            .iter()
            .find(|r| r.matches(word))
            .map_or_else(|| self.open_class.clone(), |r| r.readings.clone())
    }
}

/// Analyzes one word: lexicon readings when known, guessed readings otherwise.
pub fn analyze(word: &str, lexicon: &Lexicon, guesser: &impl Guesser) -> Result<Cohort> {
    if word.is_empty() {
        return Err(Error::Invalid("analyze: empty word".into()));
    }
    let readings = match lexicon.lookup(word) {
        Some(r) => r.to_vec(),
        None => guesser.guess(word),
    };
    Cohort::new(word, readings)
}

/// Analyzes tokenized sentences into a fine corpus.
pub fn analyze_tokens(
    sentences: &[Vec<Token>],
    lexicon: &Lexicon,
    guesser: &impl Guesser,
) -> Result<AnnotatedCorpus> {
    let sentences = sentences
        .iter()
        .filter(|s| !s.is_empty())
        .map(|tokens| {
            let cohorts = tokens
                .iter()
                .map(|t| analyze(&t.surface, lexicon, guesser))
                .collect::<Result<Vec<_>>>()?;
            Sentence::new(cohorts)
        })
        .collect::<Result<Vec<_>>>()?;
    AnnotatedCorpus::new(lexicon.tagset(), sentences)
}
