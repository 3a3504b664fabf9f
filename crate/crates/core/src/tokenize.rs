//! Tokenization under the two conventions the taggers disagree on.
//!
//! The coarse tagger keeps contractions like `aren't` whole and reads
//! `in spite of` as three words; the fine analyzer splits the former into
//! `are` + `not` and merges the latter into one token. Both modes share the
//! same raw token stream and sentence boundaries, so their outputs can be
//! aligned sentence by sentence.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use indexmap::IndexMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenizationMode {
    Fine,
    Coarse,
}

impl FromStr for TokenizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(TokenizationMode::Fine),
            "coarse" => Ok(TokenizationMode::Coarse),
            other => Err(Error::Invalid(format!("tokenization mode {other:?}"))),
        }
    }
}

impl fmt::Display for TokenizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizationMode::Fine => "fine",
            TokenizationMode::Coarse => "coarse",
        })
    }
}

/// A token and the byte range of the input it came from.
///
/// Parts of a split contraction share the span of the original word; a
/// merged multiword unit spans from its first to its last word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizationPolicy {
    mode: TokenizationMode,
    multiword_units: Vec<String>,
    contraction_splits: IndexMap<String, Vec<String>>,
}

impl Default for TokenizationPolicy {
    fn default() -> Self {
        TokenizationPolicy {
            mode: TokenizationMode::Fine,
            multiword_units: Vec::new(),
            contraction_splits: IndexMap::new(),
        }
    }
}

impl TokenizationPolicy {
    pub fn new(
        mode: TokenizationMode,
        multiword_units: Vec<String>,
        contraction_splits: IndexMap<String, Vec<String>>,
    ) -> Result<Self> {
        for unit in &multiword_units {
            if unit.split_whitespace().next().is_none() {
                return Err(Error::Invalid("policy: empty multiword unit".into()));
            }
        }
        for (k, v) in &contraction_splits {
            if k.trim().is_empty() || v.is_empty() || v.iter().any(|p| p.trim().is_empty()) {
                return Err(Error::Invalid(format!("policy: contraction {k:?}")));
            }
        }
        let multiword_units = multiword_units
            .into_iter()
            .map(|u| u.split_whitespace().collect::<Vec<_>>().join(" "))
            .collect();
        Ok(TokenizationPolicy {
            mode,
            multiword_units,
            contraction_splits,
        })
    }

    pub fn mode(&self) -> TokenizationMode {
        self.mode
    }

    pub fn with_mode(&self, mode: TokenizationMode) -> Self {
        TokenizationPolicy {
            mode,
            ..self.clone()
        }
    }

    pub fn multiword_units(&self) -> &[String] {
        &self.multiword_units
    }

    pub fn contraction_splits(&self) -> &IndexMap<String, Vec<String>> {
        &self.contraction_splits
    }

    /// The fine token sequence for a coarse contraction token, if listed.
    ///
    /// Lookup is exact first, then with the first letter case-folded; in
    /// the latter case the first part inherits the token's capital.
    pub fn split_contraction(&self, surface: &str) -> Option<Vec<String>> {
        if let Some(parts) = self.contraction_splits.get(surface) {
            return Some(parts.clone());
        }
        let (key, parts) = self
            .contraction_splits
            .iter()
            .find(|(k, _)| eq_first_letter_folded(surface, k))?;
        let mut parts = parts.clone();
        if key.chars().next() != surface.chars().next() {
            parts[0] = with_first_letter_of(&parts[0], surface);
        }
        Some(parts)
    }

    /// True if `surface` is one of the multiword units (first letter folded).
    pub fn is_multiword_unit(&self, surface: &str) -> bool {
        self.multiword_units
            .iter()
            .any(|u| eq_first_letter_folded(surface, u))
    }

    /// Loads the `MULTIWORD`/`CONTRACTION` policy file. The mode defaults to
    /// fine; callers switch it with [`with_mode`](Self::with_mode).
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        const FORMAT: &str = "policy";
        let mut units = Vec::new();
        let mut splits = IndexMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["MULTIWORD", phrase] if !phrase.trim().is_empty() => units.push(phrase.to_string()),
                ["CONTRACTION", word, parts]
                    if !word.trim().is_empty() && !parts.trim().is_empty() =>
                {
                    let parts: Vec<String> = parts.split_whitespace().map(String::from).collect();
                    if splits.insert(word.to_string(), parts).is_some() {
                        return Err(Error::format(FORMAT, lineno, format!("duplicate contraction {word:?}")));
                    }
                }
                _ => {
                    return Err(Error::format(
                        FORMAT,
                        lineno,
                        "expected MULTIWORD<TAB>phrase or CONTRACTION<TAB>word<TAB>parts",
                    ))
                }
            }
        }
        TokenizationPolicy::new(TokenizationMode::Fine, units, splits)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for unit in &self.multiword_units {
            writeln!(out, "MULTIWORD\t{unit}")?;
        }
        for (word, parts) in &self.contraction_splits {
            writeln!(out, "CONTRACTION\t{word}\t{}", parts.join(" "))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("policy text is UTF-8")
    }
}

/// Case-insensitive on the first letter only, exact on the rest.
pub(crate) fn eq_first_letter_folded(a: &str, b: &str) -> bool {
    let mut ac = a.chars();
    let mut bc = b.chars();
    match (ac.next(), bc.next()) {
        (Some(x), Some(y)) => x.to_lowercase().eq(y.to_lowercase()) && ac.as_str() == bc.as_str(),
        (None, None) => true,
        _ => false,
    }
}

fn with_first_letter_of(word: &str, model: &str) -> String {
    let upper = model.chars().next().is_some_and(char::is_uppercase);
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if upper => c.to_uppercase().chain(chars).collect(),
        _ => word.to_string(),
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

/// Splits text into words and single-character punctuation tokens, then
/// groups them into sentences at `.`, `!` or `?` followed by whitespace.
fn raw_sentences(text: &str) -> Vec<Vec<Token>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        let mut end = start + c.len_utf8();
        if c.is_alphanumeric() {
            loop {
                match chars.peek().copied() {
                    Some((i, n)) if n.is_alphanumeric() => {
                        end = i + n.len_utf8();
                        chars.next();
                    }
                    Some((i, n)) if is_joiner(n) => {
                        let after = text[i + n.len_utf8()..].chars().next();
                        if after.is_some_and(char::is_alphanumeric) {
                            end = i + n.len_utf8();
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    _ => break,
                }
            }
        }
        current.push(Token {
            surface: text[start..end].to_string(),
            span: start..end,
        });
        let terminal = matches!(c, '.' | '!' | '?');
        let next_is_space = chars.peek().map_or(true, |&(_, n)| n.is_whitespace());
        if terminal && next_is_space {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

fn split_contractions(tokens: Vec<Token>, policy: &TokenizationPolicy) -> Vec<Token> {
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens {
        match policy.split_contraction(&tok.surface) {
            Some(parts) => out.extend(parts.into_iter().map(|surface| Token {
                surface,
                span: tok.span.clone(),
            })),
            None => out.push(tok),
        }
    }
    out
}

fn merge_multiword_units(tokens: Vec<Token>, policy: &TokenizationPolicy) -> Vec<Token> {
    let units: Vec<Vec<&str>> = policy
        .multiword_units
        .iter()
        .map(|u| u.split(' ').collect())
        .collect();
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        // greedy longest; earlier list entries win ties
        let mut best = 0;
        for unit in &units {
            if unit.len() > best && i + unit.len() <= tokens.len() {
                let window = &tokens[i..i + unit.len()];
                let matches = window.iter().zip(unit).enumerate().all(|(k, (t, w))| {
                    if k == 0 {
                        eq_first_letter_folded(&t.surface, w)
                    } else {
                        t.surface == *w
                    }
                });
                if matches {
                    best = unit.len();
                }
            }
        }
        if best > 1 {
            let window = &tokens[i..i + best];
            let surface = window
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            out.push(Token {
                surface,
                span: window[0].span.start..window[best - 1].span.end,
            });
            i += best;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

/// Tokenizes `text` into sentences of tokens following `policy`'s mode.
pub fn tokenize(text: &str, policy: &TokenizationPolicy) -> Vec<Vec<Token>> {
    raw_sentences(text)
        .into_iter()
        .map(|tokens| match policy.mode {
            TokenizationMode::Coarse => tokens,
            TokenizationMode::Fine => {
                merge_multiword_units(split_contractions(tokens, policy), policy)
            }
        })
        .collect()
}
