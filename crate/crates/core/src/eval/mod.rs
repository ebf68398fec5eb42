//! Evaluation protocol: entity vectors by averaging tweet vectors, a
//! linear hinge-loss classifier tuned over a penalty grid, F1 scoring,
//! and a synthetic corpus generator for desk-scale experiments.

mod linear;
mod synthetic;

pub use linear::{fit_hinge, train_linear, LinearModel, PENALTY_GRID};
pub use synthetic::{generate_synthetic, RelevancePattern, SyntheticCorpus, SyntheticSpec};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::Error;
use crate::tensor::Matrix;
use crate::Result;

/// Train/validation/test membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// One labeled entity: a set of tweets, a binary label and its split.
#[derive(Debug, Clone)]
pub struct EntityInstance {
    pub entity_id: String,
    pub tweet_ids: Vec<String>,
    pub label: bool,
    pub split: Split,
}

/// Raw label-file record before split assignment.
#[derive(Debug, Clone)]
pub struct LabelRecord {
    pub entity_id: String,
    pub label: bool,
    pub tweet_ids: Vec<String>,
}

/// Parses a label file: `entity_id<TAB>label(0|1)<TAB>comma-separated
/// tweet_ids`, one entity per line.
pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_label_line(&line, line_no)?);
    }
    Ok(records)
}

pub fn parse_label_line(line: &str, line_no: usize) -> Result<LabelRecord> {
    let malformed = |msg: String| Error::MalformedLine { line: line_no, msg };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(malformed(
            "expected `entity_id<TAB>label<TAB>tweet_ids`".to_string(),
        ));
    }
    let label = match fields[1] {
        "0" => false,
        "1" => true,
        other => return Err(malformed(format!("label must be 0 or 1, found `{other}`"))),
    };
    let tweet_ids: Vec<String> = fields[2]
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if tweet_ids.is_empty() {
        return Err(malformed("entity has no tweet ids".to_string()));
    }
    Ok(LabelRecord {
        entity_id: fields[0].to_string(),
        label,
        tweet_ids,
    })
}

/// Assigns splits per user (all entities of one user share a split) using
/// a seeded 70-10-20 partition. An entity's user is resolved through its
/// first tweet id.
pub fn assign_splits(
    records: Vec<LabelRecord>,
    corpus: &Corpus,
    seed: u64,
) -> Result<Vec<EntityInstance>> {
    let user_of = |record: &LabelRecord| -> Result<usize> {
        let first = &record.tweet_ids[0];
        let tweet = corpus.tweet_index(first).ok_or_else(|| {
            Error::Data(format!(
                "entity `{}` references unknown tweet `{first}`",
                record.entity_id
            ))
        })?;
        Ok(corpus.tweets[tweet].user_index)
    };

    let mut users: Vec<usize> = records.iter().map(user_of).collect::<Result<Vec<_>>>()?;
    let mut distinct = users.clone();
    distinct.sort_unstable();
    distinct.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distinct.shuffle(&mut rng);
    let n = distinct.len();
    let n_valid = ((n as f64 * 0.1).round() as usize).max(1).min(n);
    let n_test = ((n as f64 * 0.2).round() as usize).max(1).min(n - n_valid);
    let split_of_user = |user: usize| {
        let pos = distinct.iter().position(|&u| u == user).unwrap();
        if pos < n - n_valid - n_test {
            Split::Train
        } else if pos < n - n_test {
            Split::Valid
        } else {
            Split::Test
        }
    };

    Ok(records
        .into_iter()
        .zip(users.drain(..))
        .map(|(r, user)| EntityInstance {
            split: split_of_user(user),
            entity_id: r.entity_id,
            tweet_ids: r.tweet_ids,
            label: r.label,
        })
        .collect())
}

/// Arithmetic mean of the tweet vectors backing an entity.
pub fn entity_vector(tweet_indices: &[usize], tweet_vectors: &Matrix) -> Vec<f64> {
    assert!(!tweet_indices.is_empty(), "entity needs at least one tweet");
    let mut mean = vec![0.0; tweet_vectors.cols()];
    for &t in tweet_indices {
        for (m, cell) in mean.iter_mut().zip(tweet_vectors.row(t)) {
            *m += cell.get();
        }
    }
    let scale = 1.0 / tweet_indices.len() as f64;
    for m in mean.iter_mut() {
        *m *= scale;
    }
    mean
}

/// F1 of the positive class; zero when precision and recall are both
/// undefined or zero.
pub fn f1(predictions: &[bool], labels: &[bool]) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fne = 0.0;
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fne += 1.0,
            (false, false) => {}
        }
    }
    if 2.0 * tp + fp + fne == 0.0 {
        return 0.0;
    }
    2.0 * tp / (2.0 * tp + fp + fne)
}

/// Outcome of one evaluation run, serialized as the results JSON.
#[derive(Debug, Clone, Serialize)]
pub struct EvalResults {
    pub penalty: f64,
    pub valid_f1: f64,
    pub test_f1: f64,
    pub config_hash: String,
}

/// Full protocol: entity vectors from the trained tweet table, split by
/// user, penalty tuned on the validation split, F1 reported on the test
/// split.
pub fn evaluate(
    tweet_vectors: &Matrix,
    corpus: &Corpus,
    records: Vec<LabelRecord>,
    seed: u64,
    config_hash: u64,
) -> Result<EvalResults> {
    let instances = assign_splits(records, corpus, seed)?;
    let mut features = Vec::with_capacity(instances.len());
    for inst in &instances {
        let indices: Vec<usize> = inst
            .tweet_ids
            .iter()
            .map(|id| {
                corpus.tweet_index(id).ok_or_else(|| {
                    Error::Data(format!(
                        "entity `{}` references unknown tweet `{id}`",
                        inst.entity_id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        features.push(entity_vector(&indices, tweet_vectors));
    }

    let (model, valid_f1) = train_linear(&features, &instances, &PENALTY_GRID)?;
    let test: Vec<usize> = (0..instances.len())
        .filter(|&i| instances[i].split == Split::Test)
        .collect();
    let predictions: Vec<bool> = test.iter().map(|&i| model.predict(&features[i])).collect();
    let labels: Vec<bool> = test.iter().map(|&i| instances[i].label).collect();
    Ok(EvalResults {
        penalty: model.penalty,
        valid_f1,
        test_f1: f1(&predictions, &labels),
        config_hash: format!("{config_hash:016x}"),
    })
}
