//! Corpus ingestion: timeline records, tokenization, vocabulary and the
//! binary coding trees backing hierarchical softmax.

mod ingest;
mod tokenize;
mod tree;

pub use ingest::{ingest, ingest_reader, CorpusFormat, IngestConfig, TimelineRecord};
pub use tokenize::{tokenize, TokenizerConfig};
pub use tree::{build_balanced, build_huffman, CodingTree, NodeRef};

use std::collections::HashMap;

/// One encoded tweet. `tokens` holds vocabulary indices; out-of-vocabulary
/// tokens were dropped at encoding time, so the sequence may be empty. Empty
/// tweets keep their tweet vector and still serve as temporal context.
#[derive(Debug, Clone)]
pub struct Tweet {
    pub tweet_id: String,
    pub user_index: usize,
    pub tokens: Vec<usize>,
}

/// One user with tweet indices in timeline order.
#[derive(Debug, Clone)]
pub struct User {
    pub user_id: String,
    pub tweets: Vec<usize>,
}

/// Word-level vocabulary with stable indices. Only words whose corpus
/// frequency reaches `min_count` are retained; the index maps are mutually
/// inverse bijections.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    word_to_index: HashMap<String, usize>,
    words: Vec<String>,
    counts: Vec<u64>,
    min_count: u64,
}

impl Vocabulary {
    /// Builds the vocabulary from raw (word, frequency) counts, dropping
    /// words below `min_count`. Retained words are ordered by descending
    /// frequency, ties by the word itself, so indices are deterministic.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Self {
        let mut retained: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut vocab = Vocabulary {
            min_count,
            ..Default::default()
        };
        for (word, count) in retained {
            vocab.word_to_index.insert(word.clone(), vocab.words.len());
            vocab.words.push(word);
            vocab.counts.push(count);
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.word_to_index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }
}

/// Fully encoded corpus: vocabulary, tweet table and user table. Immutable
/// after construction and safe to share across training workers.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub tweets: Vec<Tweet>,
    pub users: Vec<User>,
    tweet_id_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn tweet_index(&self, tweet_id: &str) -> Option<usize> {
        self.tweet_id_index.get(tweet_id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Coding trees for the three hierarchical-softmax heads: Huffman over
    /// word frequencies, balanced trees over tweets and users (each tweet
    /// and user label occurs exactly once, so Huffman would be arbitrary
    /// there).
    pub fn build_trees(&self) -> Trees {
        Trees {
            word: if self.vocab.is_empty() {
                CodingTree::empty()
            } else {
                build_huffman(self.vocab.counts())
            },
            tweet: build_balanced(self.tweets.len()),
            user: build_balanced(self.users.len()),
        }
    }
}

/// The three coding trees used by training.
#[derive(Debug, Clone)]
pub struct Trees {
    pub word: CodingTree,
    pub tweet: CodingTree,
    pub user: CodingTree,
}
