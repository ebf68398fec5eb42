//! Deterministic synthetic-corpus generator. Tweets draw their tokens
//! from per-topic vocabularies with disjoint word sets, topics arrive in
//! consecutive blocks along each timeline, and entities collect each
//! user's tweets per topic, giving a separable classification task whose
//! temporal structure is controlled by the relevance pattern.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Which context offsets share the target's topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevancePattern {
    /// Same-topic runs of `block_len` consecutive tweets: every in-block
    /// offset is informative, block topics are drawn independently.
    Blocks,
    /// Only the immediate neighbours share the target's topic: timelines
    /// are built from two-tweet blocks with independently drawn topics, so
    /// an offset at distance two or more lands in a foreign block and
    /// matches the target's topic only at chance level.
    NearestNeighbor,
}

impl std::str::FromStr for RelevancePattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "blocks" => Ok(RelevancePattern::Blocks),
            "nearest" => Ok(RelevancePattern::NearestNeighbor),
            other => Err(format!("unknown relevance pattern `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub users: usize,
    pub tweets_per_user: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub tokens_per_tweet: usize,
    pub block_len: usize,
    pub relevance: RelevancePattern,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users: 20,
            tweets_per_user: 50,
            topics: 2,
            words_per_topic: 50,
            tokens_per_tweet: 8,
            block_len: 5,
            relevance: RelevancePattern::Blocks,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.users == 0 || self.tweets_per_user == 0 {
            return Err(Error::Config(
                "synthetic corpus needs at least one user and one tweet".to_string(),
            ));
        }
        if self.topics < 2 {
            return Err(Error::Config("need at least two topics".to_string()));
        }
        if self.words_per_topic == 0 || self.tokens_per_tweet == 0 {
            return Err(Error::Config(
                "topic vocabulary and tweet length must be positive".to_string(),
            ));
        }
        if self.block_len == 0 {
            return Err(Error::Config("block length must be positive".to_string()));
        }
        Ok(())
    }
}

/// Generated corpus and label files as in-memory text.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus_tsv: String,
    pub labels_tsv: String,
}

impl SyntheticCorpus {
    /// Writes `corpus.tsv` and `labels.tsv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus_path = dir.join("corpus.tsv");
        let labels_path = dir.join("labels.tsv");
        std::fs::write(&corpus_path, &self.corpus_tsv).map_err(|e| Error::io(&corpus_path, e))?;
        std::fs::write(&labels_path, &self.labels_tsv).map_err(|e| Error::io(&labels_path, e))?;
        Ok((corpus_path, labels_path))
    }
}

fn topic_sequence(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut topics = Vec::with_capacity(spec.tweets_per_user);
    match spec.relevance {
        RelevancePattern::Blocks => {
            while topics.len() < spec.tweets_per_user {
                let topic = rng.random_range(0..spec.topics);
                for _ in 0..spec.block_len.min(spec.tweets_per_user - topics.len()) {
                    topics.push(topic);
                }
            }
        }
        RelevancePattern::NearestNeighbor => {
            while topics.len() < spec.tweets_per_user {
                let topic = rng.random_range(0..spec.topics);
                for _ in 0..2.min(spec.tweets_per_user - topics.len()) {
                    topics.push(topic);
                }
            }
        }
    }
    topics
}

/// Generates corpus and label files for `spec`. Output is a pure function
/// of the spec, including its seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut corpus = String::new();
    let mut labels = String::new();

    for user in 0..spec.users {
        let topics = topic_sequence(spec, &mut rng);
        let mut per_topic: Vec<Vec<String>> = vec![Vec::new(); spec.topics];
        for (seq, &topic) in topics.iter().enumerate() {
            let tweet_id = format!("u{user}_t{seq}");
            let words: Vec<String> = (0..spec.tokens_per_tweet)
                .map(|_| format!("t{topic}w{}", rng.random_range(0..spec.words_per_topic)))
                .collect();
            writeln!(corpus, "u{user}\t{tweet_id}\t{seq}\t{}", words.join(" ")).unwrap();
            per_topic[topic].push(tweet_id);
        }
        for (topic, ids) in per_topic.iter().enumerate() {
            if ids.is_empty() {
                continue;
            }
            let label = u8::from(topic == 0);
            writeln!(labels, "u{user}_e{topic}\t{label}\t{}", ids.join(",")).unwrap();
        }
    }

    Ok(SyntheticCorpus {
        corpus_tsv: corpus,
        labels_tsv: labels,
    })
}
