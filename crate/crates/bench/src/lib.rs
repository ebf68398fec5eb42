//! Shared fixtures for the benchmark targets.

use std::io::BufReader;

use tle_core::corpus::{ingest_reader, IngestConfig, Trees};
use tle_core::eval::{generate_synthetic, SyntheticSpec};
use tle_core::params::{ParameterStore, Shapes};
use tle_core::{Corpus, TrainConfig};

pub fn synthetic_corpus(users: usize, tweets_per_user: usize, seed: u64) -> Corpus {
    let spec = SyntheticSpec {
        users,
        tweets_per_user,
        seed,
        ..Default::default()
    };
    let files = generate_synthetic(&spec).expect("generator works");
    ingest_reader(
        BufReader::new(files.corpus_tsv.as_bytes()),
        &IngestConfig::default(),
    )
    .expect("synthetic corpus ingests")
}

pub fn model_fixture(corpus: &Corpus, config: &TrainConfig) -> (ParameterStore, Trees) {
    let shapes = Shapes {
        vocab: corpus.vocab.len(),
        tweets: corpus.tweets.len(),
        users: corpus.users.len(),
        dim: config.dim,
        cw: config.cw,
        ct: config.ct,
    };
    let store = ParameterStore::init(shapes, config.seed, None).expect("store initializes");
    (store, corpus.build_trees())
}
