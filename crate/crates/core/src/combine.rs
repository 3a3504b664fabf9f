//! Aligning the fine and coarse token streams and mapping coarse tags onto
//! fine readings through decision lists.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use indexmap::IndexMap;

use crate::corpus::{AnnotatedCorpus, Cohort, Reading, Sentence, Tag, Tagset};
use crate::error::{Error, Result};
use crate::tokenize::TokenizationPolicy;

/// Links fine token `fine_index` with coarse token `coarse_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlignmentLink {
    pub fine_index: usize,
    pub coarse_index: usize,
}

impl AlignmentLink {
    pub fn new(fine_index: usize, coarse_index: usize) -> Self {
        AlignmentLink {
            fine_index,
            coarse_index,
        }
    }
}

/// Aligns two tokenizations of the same text.
///
/// Equal surfaces link one-to-one, a split contraction links its parts to
/// the coarse word, and a multiword unit links to each of its words. Links
/// come out sorted.
pub fn align<F: AsRef<str>, C: AsRef<str>>(
    fine: &[F],
    coarse: &[C],
    policy: &TokenizationPolicy,
) -> Result<Vec<AlignmentLink>> {
    let mut links = Vec::with_capacity(fine.len().max(coarse.len()));
    let (mut i, mut j) = (0, 0);
    while i < fine.len() && j < coarse.len() {
        let f = fine[i].as_ref();
        let c = coarse[j].as_ref();
        if f == c {
            links.push(AlignmentLink::new(i, j));
            i += 1;
            j += 1;
            continue;
        }
        if let Some(parts) = policy.split_contraction(c) {
            let n = parts.len();
            if fine.len() - i >= n && fine[i..i + n].iter().zip(&parts).all(|(a, b)| a.as_ref() == b) {
                links.extend((i..i + n).map(|k| AlignmentLink::new(k, j)));
                i += n;
                j += 1;
                continue;
            }
        }
        if policy.is_multiword_unit(f) {
            let words: Vec<&str> = f.split(' ').collect();
            let n = words.len();
            if coarse.len() - j >= n && coarse[j..j + n].iter().zip(&words).all(|(a, b)| a.as_ref() == *b) {
                links.extend((j..j + n).map(|k| AlignmentLink::new(i, k)));
                i += 1;
                j += n;
                continue;
            }
        }
        return Err(Error::Alignment {
            fine: i,
            coarse: j,
            message: format!("{f:?} vs {c:?}"),
        });
    }
    if i < fine.len() || j < coarse.len() {
        return Err(Error::Alignment {
            fine: i,
            coarse: j,
            message: "one stream ended before the other".into(),
        });
    }
    Ok(links)
}

/// One fine reading of a decision list.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub reading: Reading,
    pub count: u64,
    /// Share of this alternative among the listed counts.
    pub fraction: f64,
}

/// Fine readings observed for one coarse tag, most frequent first.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionList {
    coarse_tag: Tag,
    alternatives: Vec<Alternative>,
}

impl DecisionList {
    /// Orders `counts` by descending count, ties by reading text.
    pub fn new(coarse_tag: Tag, counts: Vec<(Reading, u64)>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Invalid(format!("decision list {coarse_tag}: no alternatives")));
        }
        let mut keyed: Vec<(String, Reading, u64)> = Vec::with_capacity(counts.len());
        for (reading, count) in counts {
            if count == 0 {
                return Err(Error::Invalid(format!("decision list {coarse_tag}: zero count for {reading}")));
            }
            if keyed.iter().any(|(_, r, _)| *r == reading) {
                return Err(Error::Invalid(format!("decision list {coarse_tag}: duplicate {reading}")));
            }
            keyed.push((reading.to_string(), reading, count));
        }
        keyed.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        let total: u64 = keyed.iter().map(|k| k.2).sum();
        let alternatives = keyed
            .into_iter()
            .map(|(_, reading, count)| Alternative {
                reading,
                count,
                fraction: count as f64 / total as f64,
            })
            .collect();
        Ok(DecisionList {
            coarse_tag,
            alternatives,
        })
    }

    pub fn coarse_tag(&self) -> &Tag {
        &self.coarse_tag
    }

    pub fn alternatives(&self) -> &[Alternative] {
        &self.alternatives
    }

    pub fn readings(&self) -> impl Iterator<Item = &Reading> {
        self.alternatives.iter().map(|a| &a.reading)
    }

    pub fn contains(&self, reading: &Reading) -> bool {
        self.readings().any(|r| r == reading)
    }

    /// The earliest listed reading that `cohort` offers.
    pub fn first_in<'a>(&'a self, cohort: &Cohort) -> Option<&'a Reading> {
        self.readings().find(|r| cohort.contains(r))
    }
}

/// Decision lists keyed by coarse tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagMapping {
    lists: IndexMap<Tag, DecisionList>,
}

impl TagMapping {
    pub fn new(lists: impl IntoIterator<Item = DecisionList>) -> Result<Self> {
        let mut map = IndexMap::new();
        for list in lists {
            let tag = list.coarse_tag.clone();
            if map.insert(tag.clone(), list).is_some() {
                return Err(Error::Invalid(format!("mapping: two lists for {tag}")));
            }
        }
        Ok(TagMapping { lists: map })
    }

    pub fn get(&self, coarse_tag: &Tag) -> Option<&DecisionList> {
        self.lists.get(coarse_tag)
    }

    pub fn lists(&self) -> impl Iterator<Item = &DecisionList> {
        self.lists.values()
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Reads `COARSE<TAB>fine tags<TAB>count` lines. Lines must be grouped by
    /// coarse tag and ordered the way [`DecisionList::new`] orders them.
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        const FORMAT: &str = "mapping";
        let mut lists: Vec<DecisionList> = Vec::new();
        let mut group: Option<(Tag, Vec<(Reading, u64)>)> = None;
        let mut seen: Vec<Tag> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::format(FORMAT, lineno, m);
            let fields: Vec<&str> = line.split('\t').collect();
            let [coarse, fine, count] = fields.as_slice() else {
                return Err(err("expected COARSE<TAB>fine tags<TAB>count".into()));
            };
            let coarse = Tag::new(coarse.trim()).map_err(|e| err(e.to_string()))?;
            let reading = Reading::parse(fine).map_err(|e| err(e.to_string()))?;
            let count: u64 = count
                .trim()
                .parse()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| err(format!("count {count:?} is not a positive integer")))?;
            match &mut group {
                Some((tag, entries)) if *tag == coarse => {
                    let (prev_reading, prev_count) = entries.last().expect("groups are never empty");
                    let ordered = count < *prev_count
                        || (count == *prev_count && prev_reading.to_string() < reading.to_string());
                    if !ordered {
                        return Err(err(format!("{coarse}: {reading} is out of order")));
                    }
                    if entries.iter().any(|(r, _)| *r == reading) {
                        return Err(err(format!("{coarse}: duplicate reading {reading}")));
                    }
                    entries.push((reading, count));
                }
                _ => {
                    if seen.contains(&coarse) {
                        return Err(err(format!("lines for {coarse} are not contiguous")));
                    }
                    if let Some((tag, entries)) = group.take() {
                        lists.push(DecisionList::new(tag, entries)?);
                    }
                    seen.push(coarse.clone());
                    group = Some((coarse, vec![(reading, count)]));
                }
            }
        }
        if let Some((tag, entries)) = group {
            lists.push(DecisionList::new(tag, entries)?);
        }
        TagMapping::new(lists)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for list in self.lists.values() {
            for alt in &list.alternatives {
                writeln!(out, "{}\t{}\t{}", list.coarse_tag, alt.reading, alt.count)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("mapping text is UTF-8")
    }
}

const DEFAULT_MAPPING: &str = include_str!("../data/default.map");

/// The shipped partial mapping from Brown-style tags to fine readings.
pub fn default_mapping() -> TagMapping {
    TagMapping::parse(DEFAULT_MAPPING.as_bytes()).expect("shipped mapping parses")
}

/// A sentence tagged in both tagsets, with its token alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelSentence {
    pub fine: Sentence,
    pub coarse: Sentence,
    pub links: Vec<AlignmentLink>,
}

impl ParallelSentence {
    pub fn new(fine: Sentence, coarse: Sentence, policy: &TokenizationPolicy) -> Result<Self> {
        let links = align(&fine.surfaces(), &coarse.surfaces(), policy)?;
        Ok(ParallelSentence { fine, coarse, links })
    }
}

/// Pairs the sentences of a fine and a coarse gold corpus.
pub fn parallel_corpus(
    fine: &AnnotatedCorpus,
    coarse: &AnnotatedCorpus,
    policy: &TokenizationPolicy,
) -> Result<Vec<ParallelSentence>> {
    if fine.tagset() != Tagset::Fine || coarse.tagset() != Tagset::Coarse {
        return Err(Error::Invalid("parallel corpus: expected a fine and a coarse corpus".into()));
    }
    if fine.sentences().len() != coarse.sentences().len() {
        return Err(Error::TokenMismatch {
            index: fine.sentences().len().min(coarse.sentences().len()),
            message: format!(
                "{} fine sentences vs {} coarse sentences",
                fine.sentences().len(),
                coarse.sentences().len()
            ),
        });
    }
    fine.sentences()
        .iter()
        .zip(coarse.sentences())
        .map(|(f, c)| ParallelSentence::new(f.clone(), c.clone(), policy))
        .collect()
}

/// Counts gold (coarse tag, fine reading) pairs over every alignment link.
pub fn build_mapping(parallel: &[ParallelSentence]) -> Result<TagMapping> {
    let mut counts: HashMap<Tag, HashMap<Reading, u64>> = HashMap::new();
    for (s, sentence) in parallel.iter().enumerate() {
        for link in &sentence.links {
            let fine = &sentence.fine.cohorts()[link.fine_index];
            let coarse = &sentence.coarse.cohorts()[link.coarse_index];
            let (Some(reading), Some(tag)) = (fine.resolved_gold(), coarse.resolved_gold()) else {
                return Err(Error::Invalid(format!(
                    "parallel sentence {s}: link {}-{} lacks a gold reading",
                    link.fine_index, link.coarse_index
                )));
            };
            *counts
                .entry(tag.tags()[0].clone())
                .or_default()
                .entry(reading.clone())
                .or_default() += 1;
        }
    }
    let mut tags: Vec<Tag> = counts.keys().cloned().collect();
    tags.sort();
    let lists = tags
        .into_iter()
        .map(|tag| {
            let entries = counts.remove(&tag).expect("key from map").into_iter().collect();
            DecisionList::new(tag, entries)
        })
        .collect::<Result<Vec<_>>>()?;
    TagMapping::new(lists)
}

/// Drops readings missing from the coarse tag's list, unless none would remain.
pub fn resolve_careful(cohort: &Cohort, coarse_tag: &Tag, mapping: &TagMapping) -> Cohort {
    let mut out = cohort.clone();
    if let Some(list) = mapping.get(coarse_tag) {
        out.retain(|r| list.contains(r));
    }
    out
}

/// Keeps only the first listed reading present; leaves the cohort alone
/// when the list offers nothing it contains.
pub fn resolve_unambiguous(cohort: &Cohort, coarse_tag: &Tag, mapping: &TagMapping) -> Cohort {
    let mut out = cohort.clone();
    if let Some(choice) = mapping.get(coarse_tag).and_then(|l| l.first_in(cohort)) {
        let choice = choice.clone();
        out.retain(|r| *r == choice);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombinationMode {
    Careful,
    Unambiguous,
}

impl fmt::Display for CombinationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombinationMode::Careful => "careful",
            CombinationMode::Unambiguous => "unambiguous",
        })
    }
}

impl FromStr for CombinationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "careful" => Ok(CombinationMode::Careful),
            "unambiguous" => Ok(CombinationMode::Unambiguous),
            other => Err(Error::Invalid(format!("combination mode {other:?}"))),
        }
    }
}

/// Resolves the still-ambiguous cohorts of `fine` with the coarse tags of
/// their aligned tokens. Returns one flag per cohort: true where ambiguity
/// remains afterwards.
///
/// A fine cohort linked to several coarse tokens (a multiword unit) uses
/// the first of their tags whose list shares a reading with it.
pub fn resolve_sentence(
    fine: &Sentence,
    coarse_tags: &[Tag],
    links: &[AlignmentLink],
    mapping: &TagMapping,
    mode: CombinationMode,
) -> Result<(Sentence, Vec<bool>)> {
    let mut linked: Vec<Vec<&Tag>> = vec![Vec::new(); fine.len()];
    for link in links {
        let tag = coarse_tags.get(link.coarse_index).ok_or_else(|| {
            Error::Invalid(format!("link to coarse token {} out of range", link.coarse_index))
        })?;
        linked
            .get_mut(link.fine_index)
            .ok_or_else(|| Error::Invalid(format!("link to fine token {} out of range", link.fine_index)))?
            .push(tag);
    }
    let mut cohorts = Vec::with_capacity(fine.len());
    let mut residual = Vec::with_capacity(fine.len());
    for (cohort, tags) in fine.cohorts().iter().zip(&linked) {
        if !cohort.is_ambiguous() {
            cohorts.push(cohort.clone());
            residual.push(false);
            continue;
        }
        let tag = tags
            .iter()
            .find(|t| mapping.get(t).is_some_and(|l| l.first_in(cohort).is_some()))
            .or(tags.first());
        let out = match (tag, mode) {
            (None, _) => cohort.clone(),
            (Some(t), CombinationMode::Careful) => resolve_careful(cohort, t, mapping),
            (Some(t), CombinationMode::Unambiguous) => resolve_unambiguous(cohort, t, mapping),
        };
        residual.push(out.is_ambiguous());
        cohorts.push(out);
    }
    Ok((Sentence::new(cohorts)?, residual))
}
