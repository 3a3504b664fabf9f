//! First-order HMM tagger over word equivalence classes.
//!
//! Words are not emitted individually. Every word is mapped to the class of
//! words sharing its set of possible coarse tags (`{vb, nn}`, `{hvz}`, ...)
//! and the model emits classes. A tag can only emit classes that contain it;
//! those structural zeros survive training.
//!
//! Biases seed the model before Baum-Welch training as pseudo-counts: a row
//! starts out proportional to `1 + weight` over its admissible cells.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use log::debug;
use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::corpus::{Reading, Tag};
use crate::error::{Error, Result};
use crate::morph::{Guesser, GuesserConfig, Lexicon};

/// Tolerance for row sums of stochastic vectors and matrices.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// The set of possible tags shared by all member words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EquivalenceClass {
    tags: Vec<Tag>,
}

impl EquivalenceClass {
    pub fn new(tags: impl IntoIterator<Item = Tag>) -> Result<Self> {
        let tags: Vec<Tag> = tags.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if tags.is_empty() {
            return Err(Error::Invalid("equivalence class: no tags".into()));
        }
        Ok(EquivalenceClass { tags })
    }

    fn from_readings<'a>(readings: impl IntoIterator<Item = &'a Reading>) -> Result<Self> {
        EquivalenceClass::new(readings.into_iter().flat_map(|r| r.tags().iter().cloned()))
    }

    /// Sorted, distinct tags.
    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn contains(&self, tag: &Tag) -> bool {
        self.tags.binary_search(tag).is_ok()
    }
}

impl fmt::Display for EquivalenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.tags.iter().map(Tag::as_str).collect();
        f.write_str(&names.join(" "))
    }
}

/// The class of `word`: its coarse lexicon tags, else the tags the coarse
/// guesser (suffix rules, then open class) proposes.
pub fn classify(word: &str, coarse_lexicon: &Lexicon, guesser: &GuesserConfig) -> EquivalenceClass {
    let class = match coarse_lexicon.lookup(word) {
        Some(readings) => EquivalenceClass::from_readings(readings),
        None => EquivalenceClass::from_readings(&guesser.guess(word)),
    };
    class.expect("lexicon entries and guesses are never empty")
}

/// A guesser without affix rules whose open class is every tag of the
/// coarse lexicon.
pub fn open_class_guesser(coarse_lexicon: &Lexicon) -> Result<GuesserConfig> {
    let tags: BTreeSet<&Tag> = coarse_lexicon
        .entries()
        .flat_map(|(_, readings)| readings.iter().flat_map(|r| r.tags()))
        .collect();
    let open = tags
        .into_iter()
        .map(|t| Reading::new(vec![t.clone()]))
        .collect::<Result<Vec<_>>>()?;
    GuesserConfig::new(coarse_lexicon.tagset(), Vec::new(), open)
}

/// Every class the lexicon and guesser can produce, sorted.
pub fn derive_classes(coarse_lexicon: &Lexicon, guesser: &GuesserConfig) -> Result<Vec<EquivalenceClass>> {
    let mut classes = BTreeSet::new();
    for (_, readings) in coarse_lexicon.entries() {
        classes.insert(EquivalenceClass::from_readings(readings)?);
    }
    for rule in guesser.rules() {
        classes.insert(EquivalenceClass::from_readings(rule.readings())?);
    }
    classes.insert(EquivalenceClass::from_readings(guesser.open_class())?);
    if let Some(n) = guesser.numeral() {
        classes.insert(EquivalenceClass::from_readings([n])?);
    }
    Ok(classes.into_iter().collect())
}

/// Sorted union of the classes' tags.
pub fn derive_tags(classes: &[EquivalenceClass]) -> Vec<Tag> {
    classes
        .iter()
        .flat_map(|c| c.tags.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Prior weights injected before training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiasSpec {
    /// (from, to, weight)
    pub transition: Vec<(Tag, Tag, f64)>,
    /// (class id, tag, weight)
    pub symbol: Vec<(usize, Tag, f64)>,
}

impl BiasSpec {
    /// Reads `TRANS a b weight` and `SYM classId tag weight` lines.
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        const FORMAT: &str = "bias";
        let mut spec = BiasSpec::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let err = |m: String| Error::format(FORMAT, lineno, m);
            let fields: Vec<&str> = line.split('#').next().unwrap_or("").split_whitespace().collect();
            let weight = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite() && *w >= 0.0)
                    .ok_or_else(|| err(format!("weight {s:?} is not a finite nonnegative number")))
            };
            match fields.as_slice() {
                [] => {}
                ["TRANS", a, b, w] => {
                    let (a, b) = (Tag::new(*a)?, Tag::new(*b)?);
                    if spec.transition.iter().any(|(x, y, _)| *x == a && *y == b) {
                        return Err(err(format!("duplicate transition bias {a} {b}")));
                    }
                    spec.transition.push((a, b, weight(w)?));
                }
                ["SYM", c, t, w] => {
                    let c: usize = c.parse().map_err(|_| err(format!("class id {c:?}")))?;
                    let t = Tag::new(*t)?;
                    if spec.symbol.iter().any(|(x, y, _)| *x == c && *y == t) {
                        return Err(err(format!("duplicate symbol bias {c} {t}")));
                    }
                    spec.symbol.push((c, t, weight(w)?));
                }
                _ => return Err(err("expected TRANS a b weight or SYM classId tag weight".into())),
            }
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (a, b, w) in &self.transition {
            s.push_str(&format!("TRANS {a} {b} {w}\n"));
        }
        for (c, t, w) in &self.symbol {
            s.push_str(&format!("SYM {c} {t} {w}\n"));
        }
        s
    }
}

/// Tags, classes and the three probability tables.
///
/// Row `t` of `emission` is a distribution over classes and is zero on every
/// class that does not contain tag `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    tags: Vec<Tag>,
    classes: Vec<EquivalenceClass>,
    initial: Array1<f64>,
    transition: Array2<f64>,
    emission: Array2<f64>,
    // derived
    log_initial: Array1<f64>,
    log_transition: Array2<f64>,
    log_emission: Array2<f64>,
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Invalid(format!("{what}: entries must be finite and nonnegative")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::Invalid(format!("{what}: sums to {sum}")));
    }
    Ok(())
}

fn normalized(row: &[f64]) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    row.iter().map(|x| x / sum).collect()
}

impl HmmModel {
    pub fn new(
        tags: Vec<Tag>,
        classes: Vec<EquivalenceClass>,
        initial: Array1<f64>,
        transition: Array2<f64>,
        emission: Array2<f64>,
    ) -> Result<Self> {
        let (t, c) = (tags.len(), classes.len());
        if t == 0 || c == 0 {
            return Err(Error::Invalid("model: no tags or no classes".into()));
        }
        if tags.iter().collect::<BTreeSet<_>>().len() != t {
            return Err(Error::Invalid("model: duplicate tag".into()));
        }
        if classes.iter().collect::<BTreeSet<_>>().len() != c {
            return Err(Error::Invalid("model: duplicate class".into()));
        }
        for class in &classes {
            if let Some(x) = class.tags.iter().find(|x| !tags.contains(x)) {
                return Err(Error::Invalid(format!("model: class {{{class}}} uses unknown tag {x}")));
            }
        }
        if initial.len() != t || transition.dim() != (t, t) || emission.dim() != (t, c) {
            return Err(Error::Invalid("model: table shapes do not match tag/class counts".into()));
        }
        check_distribution(initial.as_slice().expect("contiguous"), "initial distribution")?;
        for (i, row) in transition.rows().into_iter().enumerate() {
            check_distribution(&row.to_vec(), &format!("transition row {}", tags[i]))?;
        }
        for (i, row) in emission.rows().into_iter().enumerate() {
            check_distribution(&row.to_vec(), &format!("emission row {}", tags[i]))?;
            for (j, p) in row.iter().enumerate() {
                if *p != 0.0 && !classes[j].contains(&tags[i]) {
                    return Err(Error::Invalid(format!(
                        "model: tag {} emits class {{{}}} which does not contain it",
                        tags[i], classes[j]
                    )));
                }
            }
        }
        let log_initial = initial.mapv(f64::ln);
        let log_transition = transition.mapv(f64::ln);
        let log_emission = emission.mapv(f64::ln);
        Ok(HmmModel {
            tags,
            classes,
            initial,
            transition,
            emission,
            log_initial,
            log_transition,
            log_emission,
        })
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn classes(&self) -> &[EquivalenceClass] {
        &self.classes
    }

    pub fn initial(&self) -> &Array1<f64> {
        &self.initial
    }

    pub fn transition(&self) -> &Array2<f64> {
        &self.transition
    }

    pub fn emission(&self) -> &Array2<f64> {
        &self.emission
    }

    pub fn tag_index(&self, tag: &Tag) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn class_index(&self, class: &EquivalenceClass) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    fn check_observations(&self, observations: &[usize]) -> Result<()> {
        if observations.is_empty() {
            return Err(Error::Invalid("empty observation sequence".into()));
        }
        if let Some(c) = observations.iter().find(|&&c| c >= self.classes.len()) {
            return Err(Error::Invalid(format!("class id {c} out of range")));
        }
        Ok(())
    }

    /// Writes the `HMM v1` model file; numbers carry 17 significant digits.
    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        fn row(out: &mut impl Write, values: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
            let cells: Vec<String> = values.into_iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", cells.join(" "))
        }
        writeln!(out, "HMM v1")?;
        let tags: Vec<&str> = self.tags.iter().map(Tag::as_str).collect();
        writeln!(out, "TAGS {}", tags.join(" "))?;
        for (i, class) in self.classes.iter().enumerate() {
            writeln!(out, "CLASS {i}: {class}")?;
        }
        writeln!(out, "INIT")?;
        row(&mut out, self.initial.iter().copied())?;
        writeln!(out, "TRANS")?;
        for r in self.transition.rows() {
            row(&mut out, r.iter().copied())?;
        }
        writeln!(out, "EMIT")?;
        for r in self.emission.rows() {
            row(&mut out, r.iter().copied())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("model text is UTF-8")
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let mut cur = LineCursor { lines: &lines, pos: 0 };
        let (n, header) = cur.next("header")?;
        if header != "HMM v1" {
            return Err(Error::format(MODEL_FORMAT, n, "expected header \"HMM v1\""));
        }
        let (n, tag_line) = cur.next("TAGS line")?;
        let tags = tag_line
            .strip_prefix("TAGS ")
            .ok_or_else(|| Error::format(MODEL_FORMAT, n, "expected TAGS line"))?
            .split_whitespace()
            .map(Tag::new)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::format(MODEL_FORMAT, n, e.to_string()))?;
        let mut classes = Vec::new();
        loop {
            let (n, line) = cur.next("CLASS line or INIT")?;
            if line == "INIT" {
                break;
            }
            let (id, class_tags) = line
                .strip_prefix("CLASS ")
                .and_then(|r| r.split_once(": "))
                .ok_or_else(|| Error::format(MODEL_FORMAT, n, "expected CLASS id: tags"))?;
            if id.parse::<usize>().ok() != Some(classes.len()) {
                return Err(Error::format(MODEL_FORMAT, n, format!("expected class id {}", classes.len())));
            }
            let class = class_tags
                .split_whitespace()
                .map(Tag::new)
                .collect::<Result<Vec<_>>>()
                .and_then(EquivalenceClass::new)
                .map_err(|e| Error::format(MODEL_FORMAT, n, e.to_string()))?;
            classes.push(class);
        }
        let (t, c) = (tags.len(), classes.len());
        let initial = Array1::from(cur.numbers(t)?);
        cur.keyword("TRANS")?;
        let transition = cur.matrix(t, t)?;
        cur.keyword("EMIT")?;
        let emission = cur.matrix(t, c)?;
        if let Some((n, _)) = cur.lines.get(cur.pos).map(|l| (cur.pos + 1, l)) {
            return Err(Error::format(MODEL_FORMAT, n, "trailing content after EMIT rows"));
        }
        HmmModel::new(tags, classes, initial, transition, emission)
    }
}

const MODEL_FORMAT: &str = "model";

struct LineCursor<'a> {
    lines: &'a [String],
    pos: usize,
}

impl<'a> LineCursor<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self.lines.get(self.pos).ok_or_else(|| {
            Error::format(MODEL_FORMAT, self.pos + 1, format!("expected {what}, found end of file"))
        })?;
        self.pos += 1;
        Ok((self.pos, line.as_str()))
    }

    fn keyword(&mut self, want: &str) -> Result<()> {
        let (n, line) = self.next(want)?;
        if line != want {
            return Err(Error::format(MODEL_FORMAT, n, format!("expected {want}")));
        }
        Ok(())
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>> {
        let (n, line) = self.next("a row of numbers")?;
        let row = line
            .split(' ')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(MODEL_FORMAT, n, e.to_string()))?;
        if row.len() != count {
            return Err(Error::format(
                MODEL_FORMAT,
                n,
                format!("expected {count} numbers, found {}", row.len()),
            ));
        }
        Ok(row)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.numbers(cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("row lengths checked"))
    }
}

/// Builds the pre-training model: rows proportional to `1 + bias` over
/// admissible cells, uniform initial distribution.
pub fn init_model(tags: Vec<Tag>, classes: Vec<EquivalenceClass>, biases: &BiasSpec) -> Result<HmmModel> {
    let (t, c) = (tags.len(), classes.len());
    if let Some(tag) = tags.iter().find(|tag| !classes.iter().any(|cl| cl.contains(tag))) {
        return Err(Error::UnemittableTag(tag.to_string()));
    }
    let index = |tag: &Tag| {
        tags.iter()
            .position(|x| x == tag)
            .ok_or_else(|| Error::Invalid(format!("bias references unknown tag {tag}")))
    };
    let mut transition = Array2::from_elem((t, t), 1.0);
    for (a, b, w) in &biases.transition {
        transition[[index(a)?, index(b)?]] += w;
    }
    let mut emission = Array2::zeros((t, c));
    for (j, class) in classes.iter().enumerate() {
        for tag in class.tags() {
            emission[[index(tag)?, j]] = 1.0;
        }
    }
    for (class, tag, w) in &biases.symbol {
        let i = index(tag)?;
        match classes.get(*class) {
            Some(cl) if cl.contains(tag) => emission[[i, *class]] += w,
            Some(cl) => {
                return Err(Error::Invalid(format!(
                    "symbol bias: class {class} {{{cl}}} does not contain {tag}"
                )))
            }
            None => return Err(Error::Invalid(format!("symbol bias: unknown class {class}"))),
        }
    }
    for mut row in transition.rows_mut() {
        let n = normalized(row.as_slice().expect("contiguous"));
        row.assign(&Array1::from(n));
    }
    for mut row in emission.rows_mut() {
        let n = normalized(row.as_slice().expect("contiguous"));
        row.assign(&Array1::from(n));
    }
    let initial = Array1::from_elem(t, 1.0 / t as f64);
    HmmModel::new(tags, classes, initial, transition, emission)
}

/// Per-position tag posteriors and the sentence log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    /// `posteriors[i][t]` = P(tag t at position i | sentence).
    pub posteriors: Vec<Vec<f64>>,
    pub log_likelihood: f64,
}

/// Expected counts collected over some sentences.
#[derive(Debug, Clone)]
struct Counts {
    initial: Array1<f64>,
    transition: Array2<f64>,
    emission: Array2<f64>,
    log_likelihood: f64,
}

impl Counts {
    fn zeros(t: usize, c: usize) -> Self {
        Counts {
            initial: Array1::zeros(t),
            transition: Array2::zeros((t, t)),
            emission: Array2::zeros((t, c)),
            log_likelihood: 0.0,
        }
    }

    fn add(&mut self, other: &Counts) {
        self.initial += &other.initial;
        self.transition += &other.transition;
        self.emission += &other.emission;
        self.log_likelihood += other.log_likelihood;
    }
}

/// Scaled forward and backward tables of one sentence.
struct Lattice {
    alpha: Array2<f64>,
    beta: Array2<f64>,
    scale: Vec<f64>,
}

fn lattice(model: &HmmModel, obs: &[usize]) -> Result<Lattice> {
    let (n, t) = (obs.len(), model.tags.len());
    let mut alpha = Array2::zeros((n, t));
    let mut scale = vec![0.0; n];
    for i in 0..n {
        for s in 0..t {
            let prior = if i == 0 {
                model.initial[s]
            } else {
                (0..t).map(|u| alpha[[i - 1, u]] * model.transition[[u, s]]).sum()
            };
            alpha[[i, s]] = prior * model.emission[[s, obs[i]]];
        }
        let c: f64 = alpha.row(i).sum();
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::ImpossibleSequence);
        }
        alpha.row_mut(i).mapv_inplace(|a| a / c);
        scale[i] = c;
    }
    let mut beta = Array2::zeros((n, t));
    beta.row_mut(n - 1).fill(1.0);
    for i in (0..n - 1).rev() {
        for u in 0..t {
            beta[[i, u]] = (0..t)
                .map(|s| model.transition[[u, s]] * model.emission[[s, obs[i + 1]]] * beta[[i + 1, s]])
                .sum::<f64>()
                / scale[i + 1];
        }
    }
    Ok(Lattice { alpha, beta, scale })
}

impl Lattice {
    fn log_likelihood(&self) -> f64 {
        self.scale.iter().map(|c| c.ln()).sum()
    }

    fn posterior_row(&self, i: usize) -> Vec<f64> {
        let row: Vec<f64> = self
            .alpha
            .row(i)
            .iter()
            .zip(self.beta.row(i))
            .map(|(a, b)| a * b)
            .collect();
        normalized(&row)
    }
}

/// Scaled forward-backward over a sentence of class ids.
pub fn forward_backward(model: &HmmModel, observations: &[usize]) -> Result<Posteriors> {
    model.check_observations(observations)?;
    let lat = lattice(model, observations)?;
    Ok(Posteriors {
        posteriors: (0..observations.len()).map(|i| lat.posterior_row(i)).collect(),
        log_likelihood: lat.log_likelihood(),
    })
}

fn accumulate(model: &HmmModel, obs: &[usize], counts: &mut Counts) -> Result<()> {
    let lat = lattice(model, obs)?;
    let t = model.tags.len();
    for i in 0..obs.len() {
        let gamma = lat.posterior_row(i);
        for s in 0..t {
            if i == 0 {
                counts.initial[s] += gamma[s];
            }
            counts.emission[[s, obs[i]]] += gamma[s];
        }
        if i + 1 < obs.len() {
            for u in 0..t {
                let a = lat.alpha[[i, u]];
                if a == 0.0 {
                    continue;
                }
                for s in 0..t {
                    counts.transition[[u, s]] += a
                        * model.transition[[u, s]]
                        * model.emission[[s, obs[i + 1]]]
                        * lat.beta[[i + 1, s]]
                        / lat.scale[i + 1];
                }
            }
        }
    }
    counts.log_likelihood += lat.log_likelihood();
    Ok(())
}

/// Corpus log-likelihood under `model`.
pub fn corpus_log_likelihood(model: &HmmModel, corpus: &[Vec<usize>]) -> Result<f64> {
    corpus
        .iter()
        .map(|s| forward_backward(model, s).map(|p| p.log_likelihood))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingParams {
    pub iterations: usize,
    /// Sentences per accumulation block.
    pub block_size: usize,
    /// Stop once an iteration gains less log-likelihood than this.
    pub convergence_epsilon: f64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            iterations: 10,
            block_size: 64,
            convergence_epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: HmmModel,
    /// Corpus log-likelihood of the starting model and after every update.
    pub log_likelihoods: Vec<f64>,
    /// Re-estimation steps actually performed.
    pub updates: usize,
}

fn expected_counts(model: &HmmModel, corpus: &[Vec<usize>], block_size: usize) -> Result<Counts> {
    let (t, c) = (model.tags.len(), model.classes.len());
    // blocks are accumulated independently, then reduced in corpus order
    let blocks: Vec<Counts> = corpus
        .par_chunks(block_size)
        .map(|block| {
            let mut counts = Counts::zeros(t, c);
            for sentence in block {
                accumulate(model, sentence, &mut counts)?;
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let mut total = Counts::zeros(t, c);
    for b in &blocks {
        total.add(b);
    }
    Ok(total)
}

fn reestimate(model: &HmmModel, counts: &Counts) -> Result<HmmModel> {
    let renorm = |counts: &Array2<f64>, old: &Array2<f64>| {
        let mut out = old.clone();
        for (i, row) in counts.axis_iter(Axis(0)).enumerate() {
            let sum = row.sum();
            // rows of states never visited keep their old values
            if sum > 0.0 {
                out.row_mut(i).assign(&row.mapv(|x| x / sum));
            }
        }
        out
    };
    let initial = &counts.initial / counts.initial.sum();
    HmmModel::new(
        model.tags.clone(),
        model.classes.clone(),
        initial,
        renorm(&counts.transition, &model.transition),
        renorm(&counts.emission, &model.emission),
    )
}

/// Baum-Welch training on sentences of class ids.
pub fn train(model: &HmmModel, corpus: &[Vec<usize>], params: &TrainingParams) -> Result<TrainingOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if params.block_size == 0 || !(params.convergence_epsilon >= 0.0) {
        return Err(Error::Invalid("training parameters".into()));
    }
    for s in corpus {
        model.check_observations(s)?;
    }
    let mut current = model.clone();
    let mut history = Vec::new();
    let mut updates = 0;
    if params.iterations == 0 {
        return Ok(TrainingOutcome {
            model: current,
            log_likelihoods: history,
            updates,
        });
    }
    let mut counts = expected_counts(&current, corpus, params.block_size)?;
    history.push(counts.log_likelihood);
    for _ in 0..params.iterations {
        let next = reestimate(&current, &counts)?;
        let next_counts = expected_counts(&next, corpus, params.block_size)?;
        let gain = next_counts.log_likelihood - counts.log_likelihood;
        current = next;
        counts = next_counts;
        updates += 1;
        history.push(counts.log_likelihood);
        debug!("iteration {updates}: log-likelihood {:.6} (gain {gain:.3e})", counts.log_likelihood);
        if gain < params.convergence_epsilon {
            break;
        }
    }
    Ok(TrainingOutcome {
        model: current,
        log_likelihoods: history,
        updates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiPath {
    pub tags: Vec<usize>,
    pub log_probability: f64,
}

/// Most probable tag path. Ties go to the lowest tag index.
pub fn viterbi(model: &HmmModel, observations: &[usize]) -> Result<ViterbiPath> {
    model.check_observations(observations)?;
    let (n, t) = (observations.len(), model.tags.len());
    let mut delta = vec![f64::NEG_INFINITY; t];
    let mut back = vec![vec![0usize; t]; n];
    for s in 0..t {
        delta[s] = model.log_initial[s] + model.log_emission[[s, observations[0]]];
    }
    for (i, &o) in observations.iter().enumerate().skip(1) {
        let mut next = vec![f64::NEG_INFINITY; t];
        for s in 0..t {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for (u, d) in delta.iter().enumerate() {
                let score = d + model.log_transition[[u, s]];
                if score > best {
                    best = score;
                    arg = u;
                }
            }
            next[s] = best + model.log_emission[[s, o]];
            back[i][s] = arg;
        }
        delta = next;
    }
    let (mut best, mut last) = (f64::NEG_INFINITY, 0);
    for (s, d) in delta.iter().enumerate() {
        if *d > best {
            best = *d;
            last = s;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::ImpossibleSequence);
    }
    let mut tags = vec![last; n];
    for i in (1..n).rev() {
        tags[i - 1] = back[i][tags[i]];
    }
    Ok(ViterbiPath {
        tags,
        log_probability: best,
    })
}

/// A trained model together with the coarse lexicon and guesser that map
/// words onto its classes.
#[derive(Debug, Clone)]
pub struct HmmTagger {
    model: HmmModel,
    lexicon: Lexicon,
    guesser: GuesserConfig,
    class_ids: HashMap<EquivalenceClass, usize>,
}

impl HmmTagger {
    pub fn new(model: HmmModel, lexicon: Lexicon, guesser: GuesserConfig) -> Self {
        let class_ids = model
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        HmmTagger {
            model,
            lexicon,
            guesser,
            class_ids,
        }
    }

    /// An untrained model over every class the lexicon and guesser produce.
    pub fn initial_model(lexicon: &Lexicon, guesser: &GuesserConfig, biases: &BiasSpec) -> Result<HmmModel> {
        let classes = derive_classes(lexicon, guesser)?;
        let tags = derive_tags(&classes);
        init_model(tags, classes, biases)
    }

    pub fn model(&self) -> &HmmModel {
        &self.model
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn class_of(&self, word: &str) -> EquivalenceClass {
        classify(word, &self.lexicon, &self.guesser)
    }

    pub fn class_id(&self, word: &str) -> Result<usize> {
        let class = self.class_of(word);
        self.class_ids
            .get(&class)
            .copied()
            .ok_or_else(|| Error::UnknownClass {
                word: word.to_string(),
                tags: class.to_string(),
            })
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<usize>> {
        words.iter().map(|w| self.class_id(w.as_ref())).collect()
    }

    /// Decodes a sentence of words to coarse tags.
    pub fn tag<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<Tag>> {
        let obs = self.encode(words)?;
        let path = viterbi(&self.model, &obs)?;
        Ok(path.tags.into_iter().map(|t| self.model.tags[t].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn tag(s: &str) -> Tag {
        Tag::new(s).unwrap()
    }

    fn class(s: &str) -> EquivalenceClass {
        EquivalenceClass::new(s.split_whitespace().map(tag)).unwrap()
    }

    /// Tags a, b; classes {a}, {b}, {a b}.
    fn toy_model() -> HmmModel {
        HmmModel::new(
            vec![tag("a"), tag("b")],
            vec![class("a"), class("a b"), class("b")],
            array![0.6, 0.4],
            array![[0.7, 0.3], [0.2, 0.8]],
            array![[0.5, 0.5, 0.0], [0.0, 0.1, 0.9]],
        )
        .unwrap()
    }

    /// Enumerates every path; returns (sum, max, argmax, per-position marginals).
    fn brute_force(model: &HmmModel, obs: &[usize]) -> (f64, f64, Vec<usize>, Vec<Vec<f64>>) {
        let t = model.tags().len();
        let n = obs.len();
        let mut total = 0.0;
        let mut best = (-1.0, vec![]);
        let mut marg = vec![vec![0.0; t]; n];
        for code in 0..t.pow(n as u32) {
            let path: Vec<usize> = (0..n).map(|i| code / t.pow(i as u32) % t).collect();
            let mut p = model.initial()[path[0]] * model.emission()[[path[0], obs[0]]];
            for i in 1..n {
                p *= model.transition()[[path[i - 1], path[i]]] * model.emission()[[path[i], obs[i]]];
            }
            total += p;
            if p > best.0 {
                best = (p, path.clone());
            }
            for i in 0..n {
                marg[i][path[i]] += p;
            }
        }
        for row in &mut marg {
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        (total, best.0, best.1, marg)
    }

    #[test]
    fn forward_backward_matches_enumeration() {
        let m = toy_model();
        let obs = [1, 0, 1];
        let (total, _, _, marg) = brute_force(&m, &obs);
        let fb = forward_backward(&m, &obs).unwrap();
        assert!((fb.log_likelihood - total.ln()).abs() < 1e-12);
        for (row, want) in fb.posteriors.iter().zip(&marg) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (x, y) in row.iter().zip(want) {
                assert!((x - y).abs() < 1e-12, "{row:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn single_tag_class_has_certain_posterior() {
        let fb = forward_backward(&toy_model(), &[2]).unwrap();
        assert_eq!(fb.posteriors, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn viterbi_matches_enumeration() {
        let m = toy_model();
        for obs in [vec![1, 1, 1], vec![0, 1, 2, 1], vec![1]] {
            let (_, best, path, _) = brute_force(&m, &obs);
            let v = viterbi(&m, &obs).unwrap();
            assert_eq!(v.tags, path);
            assert!((v.log_probability - best.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn viterbi_forced_tags_for_unambiguous_classes() {
        assert_eq!(viterbi(&toy_model(), &[0, 2, 2, 0]).unwrap().tags, vec![0, 1, 1, 0]);
    }

    #[test]
    fn viterbi_ties_go_to_lowest_tag() {
        let m = init_model(vec![tag("a"), tag("b")], vec![class("a b")], &BiasSpec::default()).unwrap();
        assert_eq!(viterbi(&m, &[0]).unwrap().tags, vec![0]);
        assert_eq!(viterbi(&m, &[0, 0, 0]).unwrap().tags, vec![0, 0, 0]);
    }

    #[test]
    fn impossible_sequence_is_reported() {
        let m = HmmModel::new(
            vec![tag("a"), tag("b")],
            vec![class("a"), class("b")],
            array![1.0, 0.0],
            array![[1.0, 0.0], [0.0, 1.0]],
            array![[1.0, 0.0], [0.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(viterbi(&m, &[0, 1]), Err(Error::ImpossibleSequence)));
        assert!(matches!(forward_backward(&m, &[1]), Err(Error::ImpossibleSequence)));
        assert!(matches!(forward_backward(&m, &[]), Err(Error::Invalid(_))));
        assert!(matches!(viterbi(&m, &[5]), Err(Error::Invalid(_))));
    }

    #[test]
    fn init_without_biases_is_uniform() {
        let m = init_model(vec![tag("a"), tag("b")], vec![class("a"), class("b")], &BiasSpec::default()).unwrap();
        assert_eq!(m.transition(), &array![[0.5, 0.5], [0.5, 0.5]]);
        assert_eq!(m.initial(), &array![0.5, 0.5]);
        assert_eq!(m.emission(), &array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn transition_bias_is_a_pseudo_count() {
        let biases = BiasSpec {
            transition: vec![(tag("a"), tag("b"), 3.0)],
            symbol: vec![(1, tag("a"), 2.0)],
        };
        let m = init_model(vec![tag("a"), tag("b")], vec![class("a"), class("a b")], &biases).unwrap();
        assert_eq!(m.transition().row(0).to_vec(), vec![0.2, 0.8]);
        assert_eq!(m.transition().row(1).to_vec(), vec![0.5, 0.5]);
        // a: (1, 1+2) normalized; b only emits {a b}
        assert_eq!(m.emission().row(0).to_vec(), vec![0.25, 0.75]);
        assert_eq!(m.emission()[[1, 0]], 0.0);
    }

    #[test]
    fn unemittable_tag_is_rejected() {
        let err = init_model(vec![tag("a"), tag("z")], vec![class("a")], &BiasSpec::default()).unwrap_err();
        assert!(matches!(err, Error::UnemittableTag(ref t) if t == "z"));
        let bad = BiasSpec {
            symbol: vec![(0, tag("b"), 1.0)],
            ..Default::default()
        };
        assert!(init_model(vec![tag("a"), tag("b")], vec![class("a"), class("b")], &bad).is_err());
    }

    #[test]
    fn zero_iterations_returns_model_unchanged() {
        let m = toy_model();
        let out = train(&m, &[vec![1, 1]], &TrainingParams { iterations: 0, ..Default::default() }).unwrap();
        assert_eq!(out.model, m);
        assert_eq!(out.updates, 0);
    }

    #[test]
    fn training_keeps_structural_zeros_and_raises_likelihood() {
        let m = toy_model();
        let corpus = vec![vec![1, 1, 2], vec![0, 1], vec![1, 2, 2, 1, 0], vec![1]];
        let out = train(&m, &corpus, &TrainingParams { iterations: 15, block_size: 2, convergence_epsilon: 0.0 })
            .unwrap();
        for w in out.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", out.log_likelihoods);
        }
        assert_eq!(out.model.emission()[[0, 2]], 0.0);
        assert_eq!(out.model.emission()[[1, 0]], 0.0);
        let ll = corpus_log_likelihood(&out.model, &corpus).unwrap();
        assert!((ll - out.log_likelihoods.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn block_size_does_not_change_estimates() {
        let m = toy_model();
        let corpus: Vec<Vec<usize>> = (0..23).map(|i| vec![1, i % 3, 1, (i * 7) % 3]).collect();
        let params = |b| TrainingParams { iterations: 5, block_size: b, convergence_epsilon: 0.0 };
        let a = train(&m, &corpus, &params(1)).unwrap().model;
        let b = train(&m, &corpus, &params(100)).unwrap().model;
        for (x, y) in a.transition().iter().zip(b.transition()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.emission().iter().zip(b.emission()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn convergence_epsilon_stops_early() {
        let m = toy_model();
        let corpus = vec![vec![1, 1, 2], vec![0, 1]];
        let out = train(&m, &corpus, &TrainingParams { iterations: 500, block_size: 1, convergence_epsilon: 1e-3 })
            .unwrap();
        assert!(out.updates < 500);
        assert_eq!(out.log_likelihoods.len(), out.updates + 1);
    }

    #[test]
    fn det_context_steers_ambiguous_word_to_noun() {
        // {dt} is always followed by {vb nn}; the dt->nn bias seeds the choice
        let tags = vec![tag("dt"), tag("nn"), tag("vb")];
        let classes = vec![class("dt"), class("nn vb"), class("vb")];
        let biases = BiasSpec {
            transition: vec![(tag("dt"), tag("nn"), 5.0)],
            symbol: vec![],
        };
        let m = init_model(tags, classes, &biases).unwrap();
        let corpus: Vec<Vec<usize>> = (0..20).map(|_| vec![0, 1, 2]).collect();
        let out = train(&m, &corpus, &TrainingParams { iterations: 10, block_size: 4, convergence_epsilon: 0.0 })
            .unwrap();
        assert_eq!(viterbi(&out.model, &[0, 1, 2]).unwrap().tags, vec![0, 1, 2]);
    }

    #[test]
    fn classify_words() {
        let lex = Lexicon::parse("cook\tvb\ncook\tnn\nhas\thvz\n".as_bytes(), crate::corpus::Tagset::Coarse).unwrap();
        let g = GuesserConfig::parse("SUFFIX:ing\tvbg\nOPENCLASS\tnn\nOPENCLASS\tjj\n".as_bytes(), crate::corpus::Tagset::Coarse)
            .unwrap();
        assert_eq!(classify("cook", &lex, &g), class("vb nn"));
        assert_eq!(classify("has", &lex, &g), class("hvz"));
        assert_eq!(classify("blorting", &lex, &g), class("vbg"));
        assert_eq!(classify("zzqx", &lex, &g), class("nn jj"));
    }

    #[test]
    fn removing_a_lexicon_reading_removes_the_tag_from_output() {
        let fine = crate::corpus::Tagset::Coarse;
        let mut lex = Lexicon::parse("the\tat\nlive\tjj\nlive\tvb\nfish\tnn\n".as_bytes(), fine).unwrap();
        let g = GuesserConfig::parse("OPENCLASS\tnn\n".as_bytes(), fine).unwrap();
        let biases = BiasSpec {
            transition: vec![(tag("at"), tag("jj"), 9.0)],
            symbol: vec![],
        };
        let m = HmmTagger::initial_model(&lex, &g, &biases).unwrap();
        let tagger = HmmTagger::new(m, lex.clone(), g.clone());
        assert_eq!(tagger.tag(&["the", "live", "fish"]).unwrap()[1], tag("jj"));
        lex.remove("live", &Reading::parse("jj").unwrap());
        let m = HmmTagger::initial_model(&lex, &g, &BiasSpec::default()).unwrap();
        let tagger = HmmTagger::new(m, lex, g);
        assert_eq!(tagger.class_of("live"), class("vb"));
        assert_eq!(tagger.tag(&["the", "live", "fish"]).unwrap()[1], tag("vb"));
    }

    #[test]
    fn model_file_round_trip() {
        let m = toy_model();
        let text = m.to_text();
        assert!(text.starts_with("HMM v1\nTAGS a b\nCLASS 0: a\nCLASS 1: a b\nCLASS 2: b\nINIT\n5.9999999999999998e-1 4.0000000000000002e-1\n"));
        let back = HmmModel::parse(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn model_file_errors() {
        let text = toy_model().to_text();
        let broken = text.replace("TRANS", "TRANZ");
        assert!(matches!(HmmModel::parse(broken.as_bytes()), Err(Error::Format { line: 8, .. })));
        let short = text.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(matches!(HmmModel::parse(short.as_bytes()), Err(Error::Format { .. })));
        let not_stochastic = text.replace("5.9999999999999998e-1 4", "5.9999999999999998e-1 5");
        assert!(matches!(HmmModel::parse(not_stochastic.as_bytes()), Err(Error::Invalid(_))));
    }

    #[test]
    fn bias_file() {
        let b = BiasSpec::parse("# seed\nTRANS dt nn 5\nSYM 1 nn 0.5\n".as_bytes()).unwrap();
        assert_eq!(b.transition, vec![(tag("dt"), tag("nn"), 5.0)]);
        assert_eq!(b.to_text(), "TRANS dt nn 5\nSYM 1 nn 0.5\n");
        assert!(matches!(BiasSpec::parse("TRANS a b -1\n".as_bytes()), Err(Error::Format { line: 1, .. })));
        assert!(matches!(BiasSpec::parse("\nFOO\n".as_bytes()), Err(Error::Format { line: 2, .. })));
    }
}
