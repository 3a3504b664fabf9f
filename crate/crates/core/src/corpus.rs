//! Tokens, readings, cohorts and the vertical cohort corpus format.
//!
//! A corpus file lists one cohort per word:
//!
//! ```text
//! "<the>"
//! 	DET CENTRAL ART SG/PL <Gold>
//! "<cook>"
//! 	V INF
//! 	N NOM SG <Gold>
//!
//! "<next sentence>"
//! ...
//! ```
//!
//! Word lines start in column 1, reading lines with a single TAB, and a blank
//! line separates sentences. Coarse corpora use the same layout with one tag
//! per reading line.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

const GOLD_MARKER: &str = "<Gold>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tagset {
    /// The rich, multi-tag analysis set used by the rule-based disambiguator.
    Fine,
    /// The compact single-tag set used by the statistical tagger.
    Coarse,
}

impl fmt::Display for Tagset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tagset::Fine => "fine",
            Tagset::Coarse => "coarse",
        })
    }
}

impl FromStr for Tagset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(Tagset::Fine),
            "coarse" => Ok(Tagset::Coarse),
            other => Err(Error::Invalid(format!("tagset {other:?}"))),
        }
    }
}

/// A symbolic tag label. Non-empty and free of whitespace.
///
/// Which tagset a tag belongs to is a property of the container (corpus,
/// lexicon, model) rather than of each tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(String);

impl Tag {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Invalid("tag: empty name".into()));
        }
        if name.chars().any(char::is_whitespace) {
            return Err(Error::Invalid(format!("tag {name:?}: contains whitespace")));
        }
        Ok(Tag(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tag::new(s)
    }
}

impl AsRef<str> for Tag {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// One morphological analysis: an ordered bundle of distinct tags.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reading {
    tags: Vec<Tag>,
}

impl Reading {
    pub fn new(tags: Vec<Tag>) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::Invalid("reading: no tags".into()));
        }
        for (i, tag) in tags.iter().enumerate() {
            if tags[..i].contains(tag) {
                return Err(Error::Invalid(format!("reading: duplicate tag {tag}")));
            }
        }
        Ok(Reading { tags })
    }

    /// Parses a whitespace-separated tag list such as `V PRES -SG3 VFIN`.
    pub fn parse(s: &str) -> Result<Self> {
        let tags = s.split_whitespace().map(Tag::new).collect::<Result<Vec<_>>>()?;
        Reading::new(tags)
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn contains(&self, tag: &Tag) -> bool {
        self.tags.contains(tag)
    }

    /// True when every tag in `tags` occurs in this reading.
    pub fn contains_all<'a>(&self, tags: impl IntoIterator<Item = &'a Tag>) -> bool {
        tags.into_iter().all(|t| self.contains(t))
    }
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tag) in self.tags.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(tag.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for Reading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Reading::parse(s)
    }
}

/// A word-form token with its alternative readings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cohort {
    surface: String,
    readings: Vec<Reading>,
    gold: Option<usize>,
}

impl Cohort {
    pub fn new(surface: impl Into<String>, readings: Vec<Reading>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() || surface.contains(['\n', '\t']) {
            return Err(Error::Invalid(format!("cohort surface {surface:?}")));
        }
        if readings.is_empty() {
            return Err(Error::Invalid(format!("cohort {surface:?}: no readings")));
        }
        for (i, r) in readings.iter().enumerate() {
            if readings[..i].contains(r) {
                return Err(Error::Invalid(format!(
                    "cohort {surface:?}: duplicate reading {r}"
                )));
            }
        }
        Ok(Cohort {
            surface,
            readings,
            gold: None,
        })
    }

    /// Marks reading `index` as the correct analysis.
    pub fn with_gold(mut self, index: usize) -> Result<Self> {
        if index >= self.readings.len() {
            return Err(Error::Invalid(format!(
                "cohort {:?}: gold index {index} out of range",
                self.surface
            )));
        }
        self.gold = Some(index);
        Ok(self)
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_ambiguous(&self) -> bool {
        self.readings.len() > 1
    }

    pub fn gold_index(&self) -> Option<usize> {
        self.gold
    }

    pub fn gold_reading(&self) -> Option<&Reading> {
        self.gold.map(|i| &self.readings[i])
    }

    /// The marked gold reading, or the only reading of an unmarked
    /// unambiguous cohort.
    pub fn resolved_gold(&self) -> Option<&Reading> {
        match (self.gold, self.readings.as_slice()) {
            (Some(g), _) => Some(&self.readings[g]),
            (None, [only]) => Some(only),
            _ => None,
        }
    }

    pub fn contains(&self, reading: &Reading) -> bool {
        self.readings.contains(reading)
    }

    /// Drops the gold marker, e.g. to feed a gold corpus back through a tagger.
    pub fn without_gold(mut self) -> Self {
        self.gold = None;
        self
    }

    /// Keeps the readings for which `keep` holds, preserving order.
    ///
    /// Returns whether anything was removed; a filter that would leave no
    /// reading is refused. The gold index follows its reading, or is cleared
    /// if that reading goes.
    pub fn retain(&mut self, mut keep: impl FnMut(&Reading) -> bool) -> bool {
        let mask: Vec<bool> = self.readings.iter().map(&mut keep).collect();
        if !mask.iter().any(|&k| k) || mask.iter().all(|&k| k) {
            return false;
        }
        let gold = self.gold.and_then(|g| {
            mask[g].then(|| mask[..g].iter().filter(|&&k| k).count())
        });
        let mut i = 0;
        self.readings.retain(|_| {
            i += 1;
            mask[i - 1]
        });
        self.gold = gold;
        true
    }
}

/// An ordered, non-empty sequence of cohorts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    cohorts: Vec<Cohort>,
}

impl Sentence {
    pub fn new(cohorts: Vec<Cohort>) -> Result<Self> {
        if cohorts.is_empty() {
            return Err(Error::Invalid("sentence: no cohorts".into()));
        }
        Ok(Sentence { cohorts })
    }

    pub fn cohorts(&self) -> &[Cohort] {
        &self.cohorts
    }

    pub(crate) fn cohorts_mut(&mut self) -> &mut [Cohort] {
        &mut self.cohorts
    }

    pub fn into_cohorts(self) -> Vec<Cohort> {
        self.cohorts
    }

    pub fn len(&self) -> usize {
        self.cohorts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cohorts.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.cohorts.iter().map(Cohort::surface).collect()
    }

    pub fn total_readings(&self) -> usize {
        self.cohorts.iter().map(Cohort::len).sum()
    }
}

/// Sentences annotated with readings from one tagset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedCorpus {
    tagset: Tagset,
    sentences: Vec<Sentence>,
}

impl AnnotatedCorpus {
    /// Builds a corpus, checking that coarse corpora carry single-tag readings.
    pub fn new(tagset: Tagset, sentences: Vec<Sentence>) -> Result<Self> {
        if tagset == Tagset::Coarse {
            for c in sentences.iter().flat_map(Sentence::cohorts) {
                if let Some(r) = c.readings().iter().find(|r| r.tags().len() != 1) {
                    return Err(Error::Invalid(format!(
                        "coarse cohort {:?}: reading {r} has more than one tag",
                        c.surface()
                    )));
                }
            }
        }
        Ok(AnnotatedCorpus { tagset, sentences })
    }

    pub fn empty(tagset: Tagset) -> Self {
        AnnotatedCorpus {
            tagset,
            sentences: Vec::new(),
        }
    }

    pub fn tagset(&self) -> Tagset {
        self.tagset
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<Sentence> {
        self.sentences
    }

    pub fn cohorts(&self) -> impl Iterator<Item = &Cohort> {
        self.sentences.iter().flat_map(Sentence::cohorts)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Reads the vertical cohort format.
    pub fn parse(reader: impl BufRead, tagset: Tagset) -> Result<Self> {
        let mut parser = CorpusParser::default();
        for (i, line) in reader.lines().enumerate() {
            parser.line(i + 1, &line?)?;
        }
        let sentences = parser.finish()?;
        AnnotatedCorpus::new(tagset, sentences)
    }

    pub fn parse_str(text: &str, tagset: Tagset) -> Result<Self> {
        AnnotatedCorpus::parse(text.as_bytes(), tagset)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for (i, sentence) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.write_all(b"\n")?;
            }
            for cohort in sentence.cohorts() {
                writeln!(out, "\"<{}>\"", cohort.surface())?;
                for (j, reading) in cohort.readings().iter().enumerate() {
                    if cohort.gold_index() == Some(j) {
                        writeln!(out, "\t{reading} {GOLD_MARKER}")?;
                    } else {
                        writeln!(out, "\t{reading}")?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("corpus text is UTF-8")
    }
}

#[derive(Default)]
struct CorpusParser {
    sentences: Vec<Sentence>,
    cohorts: Vec<Cohort>,
    // surface, word line number, readings, gold index
    pending: Option<(String, usize, Vec<Reading>, Option<usize>)>,
}

impl CorpusParser {
    const FORMAT: &'static str = "corpus";

    fn line(&mut self, lineno: usize, line: &str) -> Result<()> {
        if line.trim().is_empty() {
            self.flush_cohort()?;
            self.flush_sentence();
        } else if let Some(rest) = line.strip_prefix('\t') {
            let Some((_, _, readings, gold)) = self.pending.as_mut() else {
                return Err(Error::format(
                    Self::FORMAT,
                    lineno,
                    "reading line before any word line",
                ));
            };
            let (tags, is_gold) = match rest.trim_end().strip_suffix(GOLD_MARKER) {
                Some(tags) => (tags, true),
                None => (rest, false),
            };
            if is_gold && tags.trim().is_empty() {
                return Err(Error::format(
                    Self::FORMAT,
                    lineno,
                    "gold marker without a reading",
                ));
            }
            let reading =
                Reading::parse(tags).map_err(|e| Error::format(Self::FORMAT, lineno, e.to_string()))?;
            if readings.contains(&reading) {
                return Err(Error::format(
                    Self::FORMAT,
                    lineno,
                    format!("duplicate reading {reading}"),
                ));
            }
            if is_gold {
                if gold.is_some() {
                    return Err(Error::format(
                        Self::FORMAT,
                        lineno,
                        "second gold marker in one cohort",
                    ));
                }
                *gold = Some(readings.len());
            }
            readings.push(reading);
        } else if let Some(surface) = line
            .strip_prefix("\"<")
            .and_then(|s| s.strip_suffix(">\""))
        {
            if surface.is_empty() {
                return Err(Error::format(Self::FORMAT, lineno, "empty surface"));
            }
            self.flush_cohort()?;
            self.pending = Some((surface.to_string(), lineno, Vec::new(), None));
        } else {
            return Err(Error::format(
                Self::FORMAT,
                lineno,
                format!("expected a \"<word>\" line, a TAB-indented reading or a blank line, got {line:?}"),
            ));
        }
        Ok(())
    }

    fn flush_cohort(&mut self) -> Result<()> {
        if let Some((surface, lineno, readings, gold)) = self.pending.take() {
            if readings.is_empty() {
                return Err(Error::format(
                    Self::FORMAT,
                    lineno,
                    format!("word {surface:?} has no readings"),
                ));
            }
            let mut cohort =
                Cohort::new(surface, readings).map_err(|e| Error::format(Self::FORMAT, lineno, e.to_string()))?;
            if let Some(g) = gold {
                cohort = cohort.with_gold(g)?;
            }
            self.cohorts.push(cohort);
        }
        Ok(())
    }

    fn flush_sentence(&mut self) {
        if !self.cohorts.is_empty() {
            let cohorts = std::mem::take(&mut self.cohorts);
            self.sentences.push(Sentence { cohorts });
        }
    }

    fn finish(mut self) -> Result<Vec<Sentence>> {
        self.flush_cohort()?;
        self.flush_sentence();
        Ok(self.sentences)
    }
}

/// Ambiguity counts over a set of cohorts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbiguityMetrics {
    pub tokens: usize,
    /// Cohorts with two or more readings.
    pub ambiguous: usize,
    pub readings: usize,
}

impl AmbiguityMetrics {
    pub fn of_cohorts<'a>(cohorts: impl IntoIterator<Item = &'a Cohort>) -> Result<Self> {
        let mut m = AmbiguityMetrics {
            tokens: 0,
            ambiguous: 0,
            readings: 0,
        };
        for c in cohorts {
            m.tokens += 1;
            m.readings += c.len();
            if c.is_ambiguous() {
                m.ambiguous += 1;
            }
        }
        if m.tokens == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(m)
    }

    pub fn ambiguous_fraction(&self) -> f64 {
        self.ambiguous as f64 / self.tokens as f64
    }

    pub fn readings_per_word(&self) -> f64 {
        self.readings as f64 / self.tokens as f64
    }
}

/// Ambiguity statistics of a corpus; fails on a corpus without tokens.
pub fn ambiguity_metrics(corpus: &AnnotatedCorpus) -> Result<AmbiguityMetrics> {
    AmbiguityMetrics::of_cohorts(corpus.cohorts())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Reading {
        Reading::parse(s).unwrap()
    }

    #[test]
    fn tag_rejects_whitespace_and_empty() {
        assert!(Tag::new("").is_err());
        assert!(Tag::new("V FIN").is_err());
        assert!(Tag::new("-SG3").is_ok());
    }

    #[test]
    fn reading_rejects_duplicates() {
        assert!(Reading::parse("V V").is_err());
        assert!(Reading::parse("   ").is_err());
        assert_eq!(r("V  PRES -SG3 VFIN").to_string(), "V PRES -SG3 VFIN");
    }

    #[test]
    fn retain_tracks_gold_and_refuses_to_empty() {
        let mut c = Cohort::new("cook", vec![r("V INF"), r("V IMP VFIN"), r("N NOM SG")])
            .unwrap()
            .with_gold(2)
            .unwrap();
        assert!(!c.retain(|_| false));
        assert_eq!(c.len(), 3);
        assert!(c.retain(|x| !x.contains(&Tag::new("VFIN").unwrap())));
        assert_eq!(c.gold_reading(), Some(&r("N NOM SG")));
        assert!(c.retain(|x| x.contains(&Tag::new("V").unwrap())));
        assert_eq!(c.gold_index(), None);
    }

    #[test]
    fn metrics_hand_count() {
        let a = Cohort::new("a", vec![r("X")]).unwrap();
        let b = Cohort::new("b", vec![r("X"), r("Y"), r("Z")]).unwrap();
        let m = AmbiguityMetrics::of_cohorts([&a, &b]).unwrap();
        assert_eq!((m.ambiguous_fraction(), m.readings, m.readings_per_word()), (0.5, 4, 2.0));
    }

    #[test]
    fn metrics_on_benchmark_scale_counts() {
        let m = AmbiguityMetrics {
            tokens: 26_711,
            ambiguous: 0,
            readings: 47_269,
        };
        assert_eq!(format!("{:.2}", m.readings_per_word()), "1.77");
    }

    #[test]
    fn metrics_fully_disambiguated() {
        let cs: Vec<_> = (0..5)
            .map(|i| Cohort::new(format!("w{i}"), vec![r("X")]).unwrap())
            .collect();
        let m = AmbiguityMetrics::of_cohorts(&cs).unwrap();
        assert_eq!((m.ambiguous_fraction(), m.readings, m.readings_per_word()), (0.0, 5, 1.0));
    }

    #[test]
    fn metrics_empty_corpus_is_an_error() {
        let corpus = AnnotatedCorpus::empty(Tagset::Fine);
        assert!(matches!(ambiguity_metrics(&corpus), Err(Error::EmptyCorpus)));
    }

    const CANONICAL: &str = "\"<the>\"\n\tDET CENTRAL ART SG/PL <Gold>\n\"<cook>\"\n\tV INF\n\tN NOM SG <Gold>\n\n\"<in spite of>\"\n\tPREP\n";

    #[test]
    fn canonical_text_round_trips() {
        let c = AnnotatedCorpus::parse_str(CANONICAL, Tagset::Fine).unwrap();
        assert_eq!(c.sentences().len(), 2);
        assert_eq!(c.sentences()[0].cohorts()[1].gold_reading(), Some(&r("N NOM SG")));
        assert_eq!(c.to_text(), CANONICAL);
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        let c = AnnotatedCorpus::parse_str("", Tagset::Fine).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.to_text(), "");
    }

    #[test]
    fn reading_before_word_fails_at_line_one() {
        let err = AnnotatedCorpus::parse_str("\tDET\n", Tagset::Fine).unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let err = AnnotatedCorpus::parse_str("\"<a>\"\n\tX\nbogus\n", Tagset::Fine).unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
        let err = AnnotatedCorpus::parse_str("\"<a>\"\n\t<Gold>\n", Tagset::Fine).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");
        let err =
            AnnotatedCorpus::parse_str("\"<a>\"\n\tX <Gold>\n\tY <Gold>\n", Tagset::Fine).unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
        let err = AnnotatedCorpus::parse_str("\"<a>\"\n\"<b>\"\n\tX\n", Tagset::Fine).unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }), "{err}");
    }

    #[test]
    fn coarse_corpus_needs_single_tags() {
        assert!(AnnotatedCorpus::parse_str("\"<a>\"\n\tvb\n\tnn\n", Tagset::Coarse).is_ok());
        assert!(AnnotatedCorpus::parse_str("\"<a>\"\n\tvb nn\n", Tagset::Coarse).is_err());
    }
}
