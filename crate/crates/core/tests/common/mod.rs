//! Random instance generators and brute-force oracles shared by the
//! property and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

use hytag::cg::{Action, ConstraintRule, ContextTest, Grammar, Tier};
use hytag::combine::{DecisionList, TagMapping};
use hytag::hmm::{EquivalenceClass, HmmModel};
use hytag::{Cohort, Reading, Sentence, Tag};

pub fn tag(s: &str) -> Tag {
    Tag::new(s).unwrap()
}

pub fn reading(s: &str) -> Reading {
    Reading::parse(s).unwrap()
}

fn positive_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// A model with 1-5 tags and 1-5 distinct classes covering every tag.
/// Initial and transition probabilities are strictly positive; emission
/// zeros are exactly the structural ones.
pub fn random_model(rng: &mut impl Rng) -> HmmModel {
    let t = rng.gen_range(1..=5usize);
    let full = (1u32 << t) - 1;
    let max_c = 5.min(full as usize);
    let masks: Vec<u32> = loop {
        let c = rng.gen_range(1..=max_c);
        let mut set = BTreeSet::new();
        while set.len() < c {
            set.insert(rng.gen_range(1..=full));
        }
        if set.iter().fold(0, |a, m| a | m) == full {
            let mut v: Vec<u32> = set.into_iter().collect();
            v.shuffle(rng);
            break v;
        }
    };
    let tags: Vec<Tag> = (0..t).map(|i| tag(&format!("t{i}"))).collect();
    let classes: Vec<EquivalenceClass> = masks
        .iter()
        .map(|m| EquivalenceClass::new((0..t).filter(|i| m >> i & 1 == 1).map(|i| tags[i].clone())).unwrap())
        .collect();
    let initial = Array1::from(positive_row(rng, t));
    let mut transition = Array2::zeros((t, t));
    for i in 0..t {
        for (j, p) in positive_row(rng, t).into_iter().enumerate() {
            transition[[i, j]] = p;
        }
    }
    let mut emission = Array2::zeros((t, masks.len()));
    for i in 0..t {
        let members: Vec<usize> = (0..masks.len()).filter(|&c| masks[c] >> i & 1 == 1).collect();
        for (&c, p) in members.iter().zip(positive_row(rng, members.len())) {
            emission[[i, c]] = p;
        }
    }
    HmmModel::new(tags, classes, initial, transition, emission).unwrap()
}

pub fn path_probability(model: &HmmModel, obs: &[usize], path: &[usize]) -> f64 {
    let mut p = model.initial()[path[0]] * model.emission()[[path[0], obs[0]]];
    for i in 1..obs.len() {
        p *= model.transition()[[path[i - 1], path[i]]] * model.emission()[[path[i], obs[i]]];
    }
    p
}

/// Sums over every tag path of positive emission probability.
pub struct Enumeration {
    pub total: f64,
    pub best: f64,
    pub marginals: Vec<Vec<f64>>,
}

pub fn enumerate_paths(model: &HmmModel, obs: &[usize]) -> Enumeration {
    let t = model.tags().len();
    let n = obs.len();
    let mut out = Enumeration {
        total: 0.0,
        best: 0.0,
        marginals: vec![vec![0.0; t]; n],
    };
    let mut path = vec![0usize; n];
    fn rec(model: &HmmModel, obs: &[usize], path: &mut Vec<usize>, pos: usize, out: &mut Enumeration) {
        if pos == obs.len() {
            let p = path_probability(model, obs, path);
            out.total += p;
            if p > out.best {
                out.best = p;
            }
            for (i, &s) in path.iter().enumerate() {
                out.marginals[i][s] += p;
            }
            return;
        }
        for s in 0..model.tags().len() {
            if model.emission()[[s, obs[pos]]] > 0.0 {
                path[pos] = s;
                rec(model, obs, path, pos + 1, out);
            }
        }
    }
    rec(model, obs, &mut path, 0, &mut out);
    for row in &mut out.marginals {
        for x in row.iter_mut() {
            *x /= out.total;
        }
    }
    out
}

/// Every class-id sequence of length 1..=max_len over `classes` symbols.
pub fn all_sequences(classes: usize, max_len: usize) -> impl Iterator<Item = Vec<usize>> {
    (1..=max_len).flat_map(move |n| {
        (0..classes.pow(n as u32)).map(move |code| (0..n).map(|i| code / classes.pow(i as u32) % classes).collect())
    })
}

fn sample(rng: &mut impl Rng, row: impl Iterator<Item = f64>) -> usize {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in row.enumerate() {
        if p > 0.0 {
            last = i;
            acc += p;
            if x < acc {
                return i;
            }
        }
    }
    last
}

/// Class-id sentences drawn from the model itself.
pub fn sample_corpus(model: &HmmModel, rng: &mut impl Rng, sentences: usize, max_len: usize) -> Vec<Vec<usize>> {
    (0..sentences)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            let mut s = sample(rng, model.initial().iter().copied());
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                if i > 0 {
                    s = sample(rng, model.transition().row(s).iter().copied());
                }
                out.push(sample(rng, model.emission().row(s).iter().copied()));
            }
            out
        })
        .collect()
}

pub const CG_TAGS: [&str; 5] = ["A", "B", "C", "D", "E"];

fn random_tags(rng: &mut impl Rng, max: usize) -> Vec<Tag> {
    let n = rng.gen_range(1..=max);
    let mut names: Vec<&str> = CG_TAGS.to_vec();
    names.shuffle(rng);
    names[..n].iter().map(|s| tag(s)).collect()
}

fn random_readings(rng: &mut impl Rng, max: usize) -> Vec<Reading> {
    let want = rng.gen_range(1..=max);
    let mut out: Vec<Reading> = Vec::new();
    for _ in 0..4 * want {
        if out.len() == want {
            break;
        }
        let r = Reading::new(random_tags(rng, 2)).unwrap();
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

pub fn random_cg_sentence(rng: &mut impl Rng) -> Sentence {
    let n = rng.gen_range(1..=6);
    let cohorts = (0..n)
        .map(|i| Cohort::new(format!("w{i}"), random_readings(rng, 4)).unwrap())
        .collect();
    Sentence::new(cohorts).unwrap()
}

pub fn random_grammar(rng: &mut impl Rng) -> Grammar {
    let n = rng.gen_range(1..=6);
    let rules = (0..n)
        .map(|_| {
            let action = if rng.gen_bool(0.5) { Action::Remove } else { Action::Select };
            let tier = if rng.gen_bool(0.5) { Tier::Grammar } else { Tier::Heuristic };
            let tests = (0..rng.gen_range(0..=2))
                .map(|_| {
                    ContextTest::new(rng.gen_range(-2..=2), rng.gen_bool(0.3), rng.gen_bool(0.3), random_tags(rng, 2))
                        .unwrap()
                })
                .collect();
            ConstraintRule::new(action, random_tags(rng, 2), tests, tier).unwrap()
        })
        .collect();
    Grammar::new(rules)
}

/// True when every cohort of `a` keeps a subset of the readings of the
/// corresponding cohort of `b`.
pub fn readings_subset(a: &Sentence, b: &Sentence) -> bool {
    a.len() == b.len()
        && a.cohorts()
            .iter()
            .zip(b.cohorts())
            .all(|(x, y)| x.surface() == y.surface() && x.readings().iter().all(|r| y.contains(r)))
}

pub const MAP_READINGS: [&str; 6] = ["R0", "R1", "R2 X", "R3", "R4 Y", "R5"];
pub const MAP_TAGS: [&str; 3] = ["T0", "T1", "T2"];

pub fn random_mapping(rng: &mut impl Rng) -> TagMapping {
    let present: Vec<&str> = MAP_TAGS.iter().copied().filter(|_| rng.gen_bool(0.8)).collect();
    let lists = present
        .iter()
        .map(|t| {
            let mut pool = MAP_READINGS.to_vec();
            pool.shuffle(rng);
            let k = rng.gen_range(1..=4);
            let entries = pool[..k].iter().map(|r| (reading(r), rng.gen_range(1..=20u64))).collect();
            DecisionList::new(tag(t), entries).unwrap()
        })
        .collect::<Vec<_>>();
    TagMapping::new(lists).unwrap()
}

pub fn random_map_cohort(rng: &mut impl Rng) -> Cohort {
    let mut pool = MAP_READINGS.to_vec();
    pool.push("PCP1");
    pool.shuffle(rng);
    let k = rng.gen_range(1..=4);
    Cohort::new("w", pool[..k].iter().map(|r| reading(r)).collect()).unwrap()
}

/// Fresh random parameters over the tags and classes of `model`.
pub fn reparameterize(model: &HmmModel, rng: &mut impl Rng) -> HmmModel {
    let (t, c) = (model.tags().len(), model.classes().len());
    let mut transition = Array2::zeros((t, t));
    let mut emission = Array2::zeros((t, c));
    for i in 0..t {
        for (j, p) in positive_row(rng, t).into_iter().enumerate() {
            transition[[i, j]] = p;
        }
        let members: Vec<usize> = (0..c).filter(|&k| model.emission()[[i, k]] > 0.0).collect();
        for (&k, p) in members.iter().zip(positive_row(rng, members.len())) {
            emission[[i, k]] = p;
        }
    }
    HmmModel::new(
        model.tags().to_vec(),
        model.classes().to_vec(),
        Array1::from(positive_row(rng, t)),
        transition,
        emission,
    )
    .unwrap()
}
