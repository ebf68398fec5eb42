//! Joint training loop over the four objective terms, with per-epoch loss
//! and attention diagnostics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Trees};
use crate::error::Error;
use crate::params::{AdamHyper, AdamState, ParameterStore, PretrainedWords, Shapes};
use crate::tweetctx::{temporal_term, user_term, AttentionVector, TemporalSample};
use crate::wordctx::{tweet_from_words_term, word_term, WordContextSample};
use crate::Result;

pub use crate::tweetctx::AttentionMode;

/// Temporal context sizes tried in the reference experiments.
pub const CT_GRID: [usize; 9] = [1, 2, 4, 6, 8, 10, 12, 14, 16];

/// Stable 64-bit digest of any serializable configuration value: the
/// first eight bytes of the SHA-256 of its canonical JSON.
pub fn config_digest<T: Serialize>(value: &T) -> u64 {
    let json = serde_json::to_string(value).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Per-term multipliers on the joint objective. The objective is an
/// unweighted sum by default.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TermWeights {
    pub word: f64,
    pub tweet_from_words: f64,
    pub temporal: f64,
    pub user: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        TermWeights {
            word: 1.0,
            tweet_from_words: 1.0,
            temporal: 1.0,
            user: 1.0,
        }
    }
}

/// Update application contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Single writer; bitwise reproducible from the seed.
    Deterministic,
    /// Users partitioned across workers updating without mutual
    /// exclusion; lost updates accepted, reports merged at epoch barriers.
    Throughput,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub cw: usize,
    pub ct: usize,
    pub epochs: usize,
    pub hyper: AdamHyper,
    pub use_user: bool,
    pub attention_mode: AttentionMode,
    pub seed: u64,
    pub term_weights: TermWeights,
    pub mode: TrainMode,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 200,
            cw: 10,
            ct: 2,
            epochs: 5,
            hyper: AdamHyper::default(),
            use_user: true,
            attention_mode: AttentionMode::Learned,
            seed: 42,
            term_weights: TermWeights::default(),
            mode: TrainMode::Deterministic,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ct < 1 {
            return Err(Error::Config("C_T must be at least 1".to_string()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".to_string()));
        }
        if self.dim < 1 {
            return Err(Error::Config("dimension must be at least 1".to_string()));
        }
        if self.cw < 1 {
            return Err(Error::Config("C_W must be at least 1".to_string()));
        }
        if self.workers < 1 {
            return Err(Error::Config("worker count must be at least 1".to_string()));
        }
        if self.mode == TrainMode::Deterministic && self.workers != 1 {
            return Err(Error::Config(
                "deterministic mode uses a single worker".to_string(),
            ));
        }
        Ok(())
    }

    /// Stable 64-bit digest of the resolved configuration.
    pub fn config_hash(&self) -> u64 {
        config_digest(self)
    }

    pub fn shapes_for(&self, corpus: &Corpus) -> Shapes {
        Shapes {
            vocab: corpus.vocab.len(),
            tweets: corpus.tweets.len(),
            users: corpus.users.len(),
            dim: self.dim,
            cw: self.cw,
            ct: self.ct,
        }
    }
}

/// The four objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Word,
    TweetFromWords,
    Temporal,
    User,
}

impl Term {
    pub const ALL: [Term; 4] = [Term::Word, Term::TweetFromWords, Term::Temporal, Term::User];

    pub fn name(self) -> &'static str {
        match self {
            Term::Word => "word",
            Term::TweetFromWords => "tweet_from_words",
            Term::Temporal => "temporal",
            Term::User => "user",
        }
    }
}

/// Mean attention per (epoch, offset). `mean`/`count` aggregate every
/// sample where the offset was available; `full_mean`/`full_count`
/// restrict to samples whose context window was fully available.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRow {
    pub epoch: usize,
    pub offset: i64,
    pub mean: f64,
    pub count: u64,
    pub full_mean: f64,
    pub full_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionReport {
    pub ct: usize,
    pub rows: Vec<AttentionRow>,
}

impl AttentionReport {
    /// CSV over all samples where each offset was available:
    /// `epoch,offset,mean_attention,sample_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,offset,mean_attention,sample_count\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch, r.offset, r.mean, r.count
            ));
        }
        out
    }

    /// Same layout, restricted to samples with a fully available window.
    pub fn full_context_csv(&self) -> String {
        let mut out = String::from("epoch,offset,mean_attention,sample_count\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch, r.offset, r.full_mean, r.full_count
            ));
        }
        out
    }

    pub fn epoch_rows(&self, epoch: usize) -> impl Iterator<Item = &AttentionRow> {
        self.rows.iter().filter(move |r| r.epoch == epoch)
    }
}

/// Mean loss per (epoch, term), plus a `total` row per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub rows: Vec<LossRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub epoch: usize,
    pub term: String,
    pub mean_loss: f64,
}

impl LossCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,term,mean_loss\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.epoch, r.term, r.mean_loss));
        }
        out
    }

    /// The per-epoch mean over all samples of all terms.
    pub fn epoch_totals(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.term == "total")
            .map(|r| r.mean_loss)
            .collect()
    }
}

/// Everything produced by a training run.
#[derive(Debug)]
pub struct TrainOutput {
    pub store: ParameterStore,
    pub adam: AdamState,
    pub trees: Trees,
    pub attention: AttentionReport,
    pub losses: LossCurve,
}

#[derive(Clone)]
struct EpochStats {
    loss_sums: [f64; 4],
    loss_counts: [u64; 4],
    att_sums: Vec<f64>,
    att_counts: Vec<u64>,
    att_full_sums: Vec<f64>,
    att_full_counts: Vec<u64>,
}

impl EpochStats {
    fn new(ct: usize) -> Self {
        EpochStats {
            loss_sums: [0.0; 4],
            loss_counts: [0; 4],
            att_sums: vec![0.0; 2 * ct],
            att_counts: vec![0; 2 * ct],
            att_full_sums: vec![0.0; 2 * ct],
            att_full_counts: vec![0; 2 * ct],
        }
    }

    fn add_loss(&mut self, term: Term, loss: f64) {
        let i = term as usize;
        self.loss_sums[i] += loss;
        self.loss_counts[i] += 1;
    }

    fn record_attention(&mut self, sample: &TemporalSample, attention: &AttentionVector) {
        let full = sample.available() == sample.slots.len();
        for (slot, tweet) in sample.slots.iter().enumerate() {
            if tweet.is_some() {
                self.att_sums[slot] += attention.weights[slot];
                self.att_counts[slot] += 1;
                if full {
                    self.att_full_sums[slot] += attention.weights[slot];
                    self.att_full_counts[slot] += 1;
                }
            }
        }
    }

    fn merge(&mut self, other: &EpochStats) {
        for i in 0..4 {
            self.loss_sums[i] += other.loss_sums[i];
            self.loss_counts[i] += other.loss_counts[i];
        }
        for i in 0..self.att_sums.len() {
            self.att_sums[i] += other.att_sums[i];
            self.att_counts[i] += other.att_counts[i];
            self.att_full_sums[i] += other.att_full_sums[i];
            self.att_full_counts[i] += other.att_full_counts[i];
        }
    }
}

fn check_finite(loss: f64, term: Term, epoch: usize, user: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            term: term.name(),
            epoch,
            user: user.to_string(),
        })
    }
}

/// Shared read-only state of one training epoch.
#[derive(Clone, Copy)]
struct EpochContext<'a> {
    corpus: &'a Corpus,
    trees: &'a Trees,
    store: &'a ParameterStore,
    adam: &'a AdamState,
    config: &'a TrainConfig,
    epoch: usize,
}

/// Runs all four terms for one user and applies the updates.
fn process_user(ctx: EpochContext<'_>, user_index: usize, stats: &mut EpochStats) -> Result<()> {
    let EpochContext {
        corpus,
        trees,
        store,
        adam,
        config,
        epoch,
    } = ctx;
    let user = &corpus.users[user_index];
    let w = config.term_weights;
    for (pos, &tweet_index) in user.tweets.iter().enumerate() {
        let tweet = &corpus.tweets[tweet_index];
        for sample in WordContextSample::for_tweet(tweet_index, &tweet.tokens, config.cw) {
            let grads = word_term(store, &trees.word, &sample, w.word);
            check_finite(grads.loss, Term::Word, epoch, &user.user_id)?;
            grads.apply(store, adam);
            stats.add_loss(Term::Word, grads.loss);
        }

        if let Some(grads) = tweet_from_words_term(
            store,
            &trees.tweet,
            tweet_index,
            &tweet.tokens,
            w.tweet_from_words,
        ) {
            check_finite(grads.loss, Term::TweetFromWords, epoch, &user.user_id)?;
            grads.apply(store, adam);
            stats.add_loss(Term::TweetFromWords, grads.loss);
        }

        if let Some(sample) = TemporalSample::at(user_index, &user.tweets, pos, config.ct) {
            let result = temporal_term(
                store,
                &trees.tweet,
                &sample,
                config.attention_mode,
                config.use_user,
                w.temporal,
            );
            check_finite(result.grads.loss, Term::Temporal, epoch, &user.user_id)?;
            result.grads.apply(store, adam);
            stats.add_loss(Term::Temporal, result.grads.loss);
            stats.record_attention(&sample, &result.attention);
        }
    }

    if let Some(grads) = user_term(store, &trees.user, user_index, &user.tweets, w.user) {
        check_finite(grads.loss, Term::User, epoch, &user.user_id)?;
        grads.apply(store, adam);
        stats.add_loss(Term::User, grads.loss);
    }
    Ok(())
}

/// Trains the joint objective for `config.epochs` epochs. Users are
/// visited in a freshly shuffled order each epoch; within a tweet the
/// terms run in a fixed order (word samples, tweet-from-words, temporal),
/// and the user term runs once per user after its timeline.
pub fn train(
    corpus: &Corpus,
    config: &TrainConfig,
    pretrained: Option<&PretrainedWords>,
) -> Result<TrainOutput> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Data("cannot train on an empty corpus".to_string()));
    }

    let shapes = config.shapes_for(corpus);
    let store = ParameterStore::init(shapes, config.seed, pretrained)?;
    if let Some(p) = pretrained {
        store.apply_pretrained(corpus.vocab.words(), p);
    }
    let adam = AdamState::new(shapes, config.hyper);
    let trees = corpus.build_trees();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.users.len()).collect();

    let mut attention = AttentionReport {
        ct: config.ct,
        rows: Vec::new(),
    };
    let mut losses = LossCurve::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut stats = EpochStats::new(config.ct);
        let ctx = EpochContext {
            corpus,
            trees: &trees,
            store: &store,
            adam: &adam,
            config,
            epoch,
        };

        match config.mode {
            TrainMode::Deterministic => {
                for &user_index in &order {
                    process_user(ctx, user_index, &mut stats)?;
                }
            }
            TrainMode::Throughput => {
                let chunk = order.len().div_ceil(config.workers);
                let results: Vec<Result<EpochStats>> = std::thread::scope(|scope| {
                    let handles: Vec<_> = order
                        .chunks(chunk.max(1))
                        .map(|part| {
                            scope.spawn(move || {
                                let mut local = EpochStats::new(config.ct);
                                for &user_index in part {
                                    process_user(ctx, user_index, &mut local)?;
                                }
                                Ok(local)
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("worker panicked"))
                        .collect()
                });
                for result in results {
                    stats.merge(&result?);
                }
            }
        }

        push_epoch_rows(&mut losses, &mut attention, &stats, epoch, config.ct);
    }

    Ok(TrainOutput {
        store,
        adam,
        trees,
        attention,
        losses,
    })
}

fn push_epoch_rows(
    losses: &mut LossCurve,
    attention: &mut AttentionReport,
    stats: &EpochStats,
    epoch: usize,
    ct: usize,
) {
    let mut total_sum = 0.0;
    let mut total_count = 0u64;
    for term in Term::ALL {
        let i = term as usize;
        let mean = if stats.loss_counts[i] > 0 {
            stats.loss_sums[i] / stats.loss_counts[i] as f64
        } else {
            0.0
        };
        total_sum += stats.loss_sums[i];
        total_count += stats.loss_counts[i];
        losses.rows.push(LossRow {
            epoch,
            term: term.name().to_string(),
            mean_loss: mean,
        });
    }
    losses.rows.push(LossRow {
        epoch,
        term: "total".to_string(),
        mean_loss: if total_count > 0 {
            total_sum / total_count as f64
        } else {
            0.0
        },
    });

    for slot in 0..2 * ct {
        let mean = if stats.att_counts[slot] > 0 {
            stats.att_sums[slot] / stats.att_counts[slot] as f64
        } else {
            0.0
        };
        let full_mean = if stats.att_full_counts[slot] > 0 {
            stats.att_full_sums[slot] / stats.att_full_counts[slot] as f64
        } else {
            0.0
        };
        attention.rows.push(AttentionRow {
            epoch,
            offset: TemporalSample::slot_offset(slot, ct),
            mean,
            count: stats.att_counts[slot],
            full_mean,
            full_count: stats.att_full_counts[slot],
        });
    }
}

/// Per-term loss sums of an evaluation-only pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossReport {
    pub word: f64,
    pub tweet_from_words: f64,
    pub temporal: f64,
    pub user: f64,
    pub total: f64,
}

/// Evaluates the joint objective without applying any update. Pure in
/// `(store, corpus, config)`; an empty corpus reports zero.
pub fn loss_report(
    store: &ParameterStore,
    trees: &Trees,
    corpus: &Corpus,
    config: &TrainConfig,
) -> LossReport {
    let w = config.term_weights;
    let mut report = LossReport::default();
    for (user_index, user) in corpus.users.iter().enumerate() {
        for (pos, &tweet_index) in user.tweets.iter().enumerate() {
            let tweet = &corpus.tweets[tweet_index];
            for sample in WordContextSample::for_tweet(tweet_index, &tweet.tokens, config.cw) {
                let loss = word_term(store, &trees.word, &sample, w.word).loss;
                report.word += loss;
                report.total += loss;
            }
            if let Some(grads) = tweet_from_words_term(
                store,
                &trees.tweet,
                tweet_index,
                &tweet.tokens,
                w.tweet_from_words,
            ) {
                report.tweet_from_words += grads.loss;
                report.total += grads.loss;
            }
            if let Some(sample) = TemporalSample::at(user_index, &user.tweets, pos, config.ct) {
                let result = temporal_term(
                    store,
                    &trees.tweet,
                    &sample,
                    config.attention_mode,
                    config.use_user,
                    w.temporal,
                );
                report.temporal += result.grads.loss;
                report.total += result.grads.loss;
            }
        }
        if let Some(grads) = user_term(store, &trees.user, user_index, &user.tweets, w.user) {
            report.user += grads.loss;
            report.total += grads.loss;
        }
    }
    report
}
