//! Constraint Grammar rules and the fixpoint disambiguation engine.
//!
//! Rule files look like this:
//!
//! ```text
//! # reliable constraints
//! CONSTRAINTS
//! REMOVE (VFIN) IF (-1C DET);
//! SELECT (N) IF (0 NOM);
//!
//! HEURISTICS
//! REMOVE (A) IF (1 NOT N) (-1 NOT DET);
//! ```
//!
//! A test `(OFFSET[C] [NOT] TAG ...)` looks at the cohort `OFFSET` positions
//! away from the target. `C` demands that cohort be unambiguous. The tag
//! condition holds when some reading carries all listed tags; `NOT` inverts
//! it. A test pointing outside the sentence always fails.

use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::corpus::{AnnotatedCorpus, Cohort, Reading, Sentence, Tag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Discard readings matching the target.
    Remove,
    /// Discard readings not matching the target, if any match.
    Select,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Remove => "REMOVE",
            Action::Select => "SELECT",
        })
    }
}

/// Reliability tier of a rule. Grammar-based rules rank below heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Grammar,
    Heuristic,
}

impl std::str::FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grammar" => Ok(Tier::Grammar),
            "heuristic" => Ok(Tier::Heuristic),
            other => Err(Error::Invalid(format!("tier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextTest {
    pub position: isize,
    pub careful: bool,
    pub negate: bool,
    tags: Vec<Tag>,
}

impl ContextTest {
    pub fn new(position: isize, careful: bool, negate: bool, tags: Vec<Tag>) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::Invalid("context test: no tags".into()));
        }
        Ok(ContextTest {
            position,
            careful,
            negate,
            tags,
        })
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    fn passes(&self, sentence: &[Cohort], index: usize) -> bool {
        let Some(pos) = index.checked_add_signed(self.position) else {
            return false;
        };
        let Some(cohort) = sentence.get(pos) else {
            return false;
        };
        if self.careful && cohort.len() != 1 {
            return false;
        }
        let found = cohort.readings().iter().any(|r| r.contains_all(&self.tags));
        found != self.negate
    }
}

impl fmt::Display for ContextTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.position)?;
        if self.careful {
            f.write_str("C")?;
        }
        if self.negate {
            f.write_str(" NOT")?;
        }
        for t in &self.tags {
            write!(f, " {t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Eq)]
pub struct ConstraintRule {
    pub action: Action,
    target: Vec<Tag>,
    tests: Vec<ContextTest>,
    pub tier: Tier,
    /// Source line, for tracing. Not part of rule identity.
    pub line: usize,
}

impl PartialEq for ConstraintRule {
    fn eq(&self, other: &Self) -> bool {
        self.action == other.action
            && self.target == other.target
            && self.tests == other.tests
            && self.tier == other.tier
    }
}

impl ConstraintRule {
    pub fn new(action: Action, target: Vec<Tag>, tests: Vec<ContextTest>, tier: Tier) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::Invalid("rule: empty target".into()));
        }
        Ok(ConstraintRule {
            action,
            target,
            tests,
            tier,
            line: 0,
        })
    }

    pub fn target(&self) -> &[Tag] {
        &self.target
    }

    pub fn tests(&self) -> &[ContextTest] {
        &self.tests
    }

    pub fn matches_target(&self, reading: &Reading) -> bool {
        reading.contains_all(&self.target)
    }
}

impl fmt::Display for ConstraintRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (", self.action)?;
        for (i, t) in self.target.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")?;
        if !self.tests.is_empty() {
            f.write_str(" IF")?;
            for t in &self.tests {
                write!(f, " {t}")?;
            }
        }
        f.write_str(";")
    }
}

/// True iff every context test of `rule` passes for the cohort at `index`.
pub fn rule_applies(rule: &ConstraintRule, sentence: &Sentence, index: usize) -> bool {
    applies(rule, sentence.cohorts(), index)
}

fn applies(rule: &ConstraintRule, cohorts: &[Cohort], index: usize) -> bool {
    rule.tests.iter().all(|t| t.passes(cohorts, index))
}

/// Rules in application order: grammar tier first, then heuristics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<ConstraintRule>,
}

impl Grammar {
    /// Builds a grammar; rules are stably sorted so the grammar tier comes first.
    pub fn new(mut rules: Vec<ConstraintRule>) -> Self {
        rules.sort_by_key(|r| r.tier);
        Grammar { rules }
    }

    pub fn rules(&self) -> &[ConstraintRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn parse(mut reader: impl BufRead) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Grammar::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        RuleParser::new(text).parse()
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut tier = None;
        for rule in &self.rules {
            if tier != Some(rule.tier) {
                out.write_all(match rule.tier {
                    Tier::Grammar => b"CONSTRAINTS\n",
                    Tier::Heuristic => b"HEURISTICS\n",
                })?;
                tier = Some(rule.tier);
            }
            writeln!(out, "{rule}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("grammar text is UTF-8")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme {
    Word(String),
    Open,
    Close,
    Semi,
}

struct RuleParser {
    lexemes: Vec<(Lexeme, usize)>,
    pos: usize,
}

const FORMAT: &str = "grammar";

impl RuleParser {
    fn new(text: &str) -> Self {
        let mut lexemes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            let mut word = String::new();
            let flush = |word: &mut String, lexemes: &mut Vec<(Lexeme, usize)>| {
                if !word.is_empty() {
                    lexemes.push((Lexeme::Word(std::mem::take(word)), i + 1));
                }
            };
            for c in line.chars() {
                let punct = match c {
                    '(' => Some(Lexeme::Open),
                    ')' => Some(Lexeme::Close),
                    ';' => Some(Lexeme::Semi),
                    _ => None,
                };
                if let Some(p) = punct {
                    flush(&mut word, &mut lexemes);
                    lexemes.push((p, i + 1));
                } else if c.is_whitespace() {
                    flush(&mut word, &mut lexemes);
                } else {
                    word.push(c);
                }
            }
            flush(&mut word, &mut lexemes);
        }
        RuleParser { lexemes, pos: 0 }
    }

    fn next(&mut self) -> Option<(Lexeme, usize)> {
        let l = self.lexemes.get(self.pos).cloned();
        self.pos += 1;
        l
    }

    fn peek(&self) -> Option<&Lexeme> {
        self.lexemes.get(self.pos).map(|(l, _)| l)
    }

    fn last_line(&self) -> usize {
        self.lexemes.last().map_or(1, |(_, l)| *l)
    }

    fn expect(&mut self, want: Lexeme, what: &str) -> Result<usize> {
        match self.next() {
            Some((l, line)) if l == want => Ok(line),
            Some((l, line)) => Err(Error::format(FORMAT, line, format!("expected {what}, found {l:?}"))),
            None => Err(Error::format(FORMAT, self.last_line(), format!("expected {what}, found end of file"))),
        }
    }

    fn parse(mut self) -> Result<Grammar> {
        let mut rules = Vec::new();
        let mut tier = Tier::Grammar;
        let mut seen_heuristics = false;
        while let Some((lexeme, line)) = self.next() {
            let Lexeme::Word(word) = lexeme else {
                return Err(Error::format(FORMAT, line, format!("unexpected {lexeme:?}")));
            };
            match word.as_str() {
                "CONSTRAINTS" if seen_heuristics => {
                    return Err(Error::format(FORMAT, line, "CONSTRAINTS section after HEURISTICS"));
                }
                "CONSTRAINTS" => tier = Tier::Grammar,
                "HEURISTICS" => {
                    tier = Tier::Heuristic;
                    seen_heuristics = true;
                }
                "REMOVE" | "SELECT" => {
                    let action = if word == "REMOVE" { Action::Remove } else { Action::Select };
                    let mut rule = self.rule_body(action, tier, line)?;
                    rule.line = line;
                    rules.push(rule);
                }
                other => {
                    return Err(Error::format(FORMAT, line, format!("unknown action keyword {other:?}")));
                }
            }
        }
        Ok(Grammar { rules })
    }

    fn tags_until_close(&mut self, open_line: usize) -> Result<Vec<Tag>> {
        let mut tags = Vec::new();
        loop {
            match self.next() {
                Some((Lexeme::Word(w), line)) => {
                    tags.push(Tag::new(w).map_err(|e| Error::format(FORMAT, line, e.to_string()))?)
                }
                Some((Lexeme::Close, line)) => {
                    if tags.is_empty() {
                        return Err(Error::format(FORMAT, line, "empty tag list"));
                    }
                    return Ok(tags);
                }
                Some((l, line)) => return Err(Error::format(FORMAT, line, format!("unexpected {l:?} in tag list"))),
                None => return Err(Error::format(FORMAT, open_line, "unclosed tag list")),
            }
        }
    }

    fn rule_body(&mut self, action: Action, tier: Tier, line: usize) -> Result<ConstraintRule> {
        let open = self.expect(Lexeme::Open, "'(' after action")?;
        let target = self.tags_until_close(open)?;
        let mut tests = Vec::new();
        match self.next() {
            Some((Lexeme::Semi, _)) => {}
            Some((Lexeme::Word(w), _)) if w == "IF" => {
                while self.peek() == Some(&Lexeme::Open) {
                    let (_, open) = self.next().expect("peeked");
                    tests.push(self.test(open)?);
                }
                if tests.is_empty() {
                    return Err(Error::format(FORMAT, line, "IF without tests"));
                }
                self.expect(Lexeme::Semi, "';' ending the rule")?;
            }
            Some((l, line)) => return Err(Error::format(FORMAT, line, format!("expected IF or ';', found {l:?}"))),
            None => return Err(Error::format(FORMAT, line, "rule not terminated by ';'")),
        }
        ConstraintRule::new(action, target, tests, tier).map_err(|e| Error::format(FORMAT, line, e.to_string()))
    }

    fn test(&mut self, open_line: usize) -> Result<ContextTest> {
        let (offset, line) = match self.next() {
            Some((Lexeme::Word(w), line)) => (w, line),
            Some((_, line)) => return Err(Error::format(FORMAT, line, "missing offset")),
            None => return Err(Error::format(FORMAT, open_line, "missing offset")),
        };
        let (digits, careful) = match offset.strip_suffix('C') {
            Some(d) => (d, true),
            None => (offset.as_str(), false),
        };
        let position: isize = digits
            .parse()
            .ok()
            .filter(|_| digits.trim_start_matches(['+', '-']).chars().all(|c| c.is_ascii_digit()))
            .ok_or_else(|| Error::format(FORMAT, line, format!("malformed offset {offset:?}")))?;
        let negate = if self.peek() == Some(&Lexeme::Word("NOT".into())) {
            self.pos += 1;
            true
        } else {
            false
        };
        let tags = self.tags_until_close(open_line)?;
        ContextTest::new(position, careful, negate, tags).map_err(|e| Error::format(FORMAT, line, e.to_string()))
    }
}

/// One rule application, as reported in trace mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub rule_line: usize,
    pub sentence: usize,
    pub cohort: usize,
    pub removed: Vec<Reading>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rule line {}: sentence {} cohort {} removed",
            self.rule_line, self.sentence, self.cohort
        )?;
        for (i, r) in self.removed.iter().enumerate() {
            write!(f, "{}{r}", if i == 0 { " " } else { " | " })?;
        }
        Ok(())
    }
}

/// Applies `rule` at `index`; returns the removed readings, if any.
fn apply_at(rule: &ConstraintRule, cohorts: &mut [Cohort], index: usize) -> Option<Vec<Reading>> {
    let cohort = &cohorts[index];
    let matching = cohort.readings().iter().filter(|r| rule.matches_target(r)).count();
    // nothing to do, or the cohort would be emptied
    if matching == 0 || matching == cohort.len() {
        return None;
    }
    if !applies(rule, cohorts, index) {
        return None;
    }
    let keep_matching = rule.action == Action::Select;
    let removed: Vec<Reading> = cohorts[index]
        .readings()
        .iter()
        .filter(|r| rule.matches_target(r) != keep_matching)
        .cloned()
        .collect();
    let changed = cohorts[index].retain(|r| rule.matches_target(r) == keep_matching);
    debug_assert!(changed);
    Some(removed)
}

/// Runs passes of the rules up to `tier` until one changes nothing.
fn fixpoint(
    cohorts: &mut [Cohort],
    grammar: &Grammar,
    tier: Tier,
    sentence_index: usize,
    trace: &mut dyn FnMut(TraceEvent),
) {
    let rules: Vec<&ConstraintRule> = grammar.rules.iter().filter(|r| r.tier <= tier).collect();
    // every pass that changes something removes at least one reading
    let limit = cohorts.iter().map(Cohort::len).sum::<usize>() + 1;
    for _ in 0..limit {
        let mut changed = false;
        for rule in &rules {
            for i in 0..cohorts.len() {
                if let Some(removed) = apply_at(rule, cohorts, i) {
                    changed = true;
                    trace(TraceEvent {
                        rule_line: rule.line,
                        sentence: sentence_index,
                        cohort: i,
                        removed,
                    });
                }
            }
        }
        if !changed {
            return;
        }
    }
    unreachable!("disambiguation exceeded its pass bound");
}

/// Disambiguates one sentence with the rules of `max_tier` and below.
///
/// The grammar tier is run to its fixpoint first; heuristic rules then join
/// in on that result. Output cohorts are non-empty subsets of the input.
pub fn disambiguate(sentence: Sentence, grammar: &Grammar, max_tier: Tier) -> Sentence {
    disambiguate_traced(sentence, grammar, max_tier, 0, &mut |_| {})
}

pub fn disambiguate_traced(
    mut sentence: Sentence,
    grammar: &Grammar,
    max_tier: Tier,
    sentence_index: usize,
    trace: &mut dyn FnMut(TraceEvent),
) -> Sentence {
    for tier in [Tier::Grammar, Tier::Heuristic] {
        if tier > max_tier {
            break;
        }
        fixpoint(sentence.cohorts_mut(), grammar, tier, sentence_index, trace);
    }
    sentence
}

/// Disambiguates every sentence of a corpus, in parallel.
pub fn disambiguate_corpus(corpus: AnnotatedCorpus, grammar: &Grammar, max_tier: Tier) -> AnnotatedCorpus {
    let tagset = corpus.tagset();
    let sentences: Vec<Sentence> = corpus
        .into_sentences()
        .into_par_iter()
        .map(|s| disambiguate(s, grammar, max_tier))
        .collect();
    AnnotatedCorpus::new(tagset, sentences).expect("disambiguation preserves the tagset")
}

/// Sequential variant reporting every rule application to `trace`.
pub fn disambiguate_corpus_traced(
    corpus: AnnotatedCorpus,
    grammar: &Grammar,
    max_tier: Tier,
    trace: &mut dyn FnMut(TraceEvent),
) -> AnnotatedCorpus {
    let tagset = corpus.tagset();
    let sentences: Vec<Sentence> = corpus
        .into_sentences()
        .into_iter()
        .enumerate()
        .map(|(i, s)| disambiguate_traced(s, grammar, max_tier, i, trace))
        .collect();
    AnnotatedCorpus::new(tagset, sentences).expect("disambiguation preserves the tagset")
}
