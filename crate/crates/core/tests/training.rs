//! End-to-end behaviour of the training loop: loss descent, report
//! invariants, determinism, failure modes and the throughput contract.

use std::io::BufReader;

use tle_core::corpus::{ingest_reader, IngestConfig};
use tle_core::eval::{generate_synthetic, SyntheticSpec};
use tle_core::params::{save_checkpoint, AdamHyper, ParameterStore, Slot, TermGrads};
use tle_core::trainer::{loss_report, train, TrainMode};
use tle_core::tweetctx::{temporal_term, user_term, TemporalSample};
use tle_core::wordctx::{tweet_from_words_term, word_term, WordContextSample};
use tle_core::{AdamState, AttentionMode, Corpus, TrainConfig};

fn small_corpus(seed: u64) -> Corpus {
    let spec = SyntheticSpec {
        users: 8,
        tweets_per_user: 20,
        words_per_topic: 20,
        tokens_per_tweet: 5,
        block_len: 4,
        seed,
        ..Default::default()
    };
    let files = generate_synthetic(&spec).unwrap();
    ingest_reader(
        BufReader::new(files.corpus_tsv.as_bytes()),
        &IngestConfig::default(),
    )
    .unwrap()
}

fn small_config() -> TrainConfig {
    TrainConfig {
        dim: 12,
        cw: 2,
        ct: 2,
        epochs: 3,
        hyper: AdamHyper::with_lr(0.01),
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn epoch_loss_decreases() {
    let corpus = small_corpus(1);
    let out = train(&corpus, &small_config(), None).unwrap();
    let totals = out.losses.epoch_totals();
    assert_eq!(totals.len(), 3);
    for pair in totals.windows(2) {
        assert!(pair[1] < pair[0], "epoch loss did not decrease: {totals:?}");
    }
    assert!(out.store.all_finite());
}

#[test]
fn deterministic_runs_are_bitwise_identical() {
    let corpus = small_corpus(2);
    let config = small_config();
    let a = train(&corpus, &config, None).unwrap();
    let b = train(&corpus, &config, None).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let hash = config.config_hash();
    let path_a = dir.path().join("a.tle");
    let path_b = dir.path().join("b.tle");
    save_checkpoint(&a.store, &a.adam, config.seed, hash, &path_a).unwrap();
    save_checkpoint(&b.store, &b.adam, config.seed, hash, &path_b).unwrap();
    assert_eq!(
        std::fs::read(&path_a).unwrap(),
        std::fs::read(&path_b).unwrap()
    );

    assert_eq!(a.losses.to_csv(), b.losses.to_csv());
    assert_eq!(a.attention.to_csv(), b.attention.to_csv());
    assert_eq!(
        a.attention.full_context_csv(),
        b.attention.full_context_csv()
    );
}

#[test]
fn different_seed_changes_the_run() {
    let corpus = small_corpus(2);
    let config = small_config();
    let other = TrainConfig {
        seed: 6,
        ..config.clone()
    };
    let a = train(&corpus, &config, None).unwrap();
    let b = train(&corpus, &other, None).unwrap();
    assert_ne!(a.losses.to_csv(), b.losses.to_csv());
}

#[test]
fn uniform_mode_reports_uniform_attention() {
    let corpus = small_corpus(3);
    let config = TrainConfig {
        attention_mode: AttentionMode::Uniform,
        ..small_config()
    };
    let out = train(&corpus, &config, None).unwrap();
    for row in &out.attention.rows {
        assert!(row.full_count > 0);
        // Full-context samples in uniform mode weigh every slot 1/(2*C_T).
        assert_eq!(
            row.full_mean, 0.25,
            "offset {} epoch {}",
            row.offset, row.epoch
        );
    }
}

#[test]
fn attention_report_reconstructs_sample_count() {
    let corpus = small_corpus(4);
    let out = train(&corpus, &small_config(), None).unwrap();
    // Each tweet of a user with at least two tweets yields one temporal
    // sample per epoch.
    let expected: u64 = corpus
        .users
        .iter()
        .map(|u| {
            if u.tweets.len() >= 2 {
                u.tweets.len() as u64
            } else {
                0
            }
        })
        .sum();
    for epoch in 1..=3 {
        let mass: f64 = out
            .attention
            .epoch_rows(epoch)
            .map(|r| r.mean * r.count as f64)
            .sum();
        assert!(
            (mass - expected as f64).abs() < 1e-6,
            "epoch {epoch}: attention mass {mass} vs {expected} samples"
        );
    }
}

#[test]
fn loss_report_is_pure_and_decomposes() {
    let corpus = small_corpus(5);
    let config = small_config();
    let out = train(&corpus, &config, None).unwrap();
    let r1 = loss_report(&out.store, &out.trees, &corpus, &config);
    let r2 = loss_report(&out.store, &out.trees, &corpus, &config);
    assert_eq!(r1.total, r2.total);
    let sum = r1.word + r1.tweet_from_words + r1.temporal + r1.user;
    assert!(
        (sum - r1.total).abs() < 1e-9,
        "terms {sum} vs total {}",
        r1.total
    );
}

#[test]
fn loss_report_empty_corpus_is_zero() {
    let corpus = ingest_reader(BufReader::new("".as_bytes()), &IngestConfig::default()).unwrap();
    let config = small_config();
    let shapes = config.shapes_for(&corpus);
    let store = tle_core::ParameterStore::init(shapes, 1, None).unwrap();
    let trees = corpus.build_trees();
    let report = loss_report(&store, &trees, &corpus, &config);
    assert_eq!(report.total, 0.0);
}

#[test]
fn training_lowers_the_joint_objective() {
    let corpus = small_corpus(6);
    let config = small_config();
    let shapes = config.shapes_for(&corpus);
    let store = tle_core::ParameterStore::init(shapes, config.seed, None).unwrap();
    let trees = corpus.build_trees();
    let before = loss_report(&store, &trees, &corpus, &config).total;
    let out = train(&corpus, &config, None).unwrap();
    let after = loss_report(&out.store, &out.trees, &corpus, &config).total;
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn single_term_step_descends() {
    // One Adam application on one word sample must lower that sample's
    // loss.
    let corpus = small_corpus(7);
    let config = small_config();
    let shapes = config.shapes_for(&corpus);
    let store = tle_core::ParameterStore::init(shapes, 3, None).unwrap();
    let adam = tle_core::AdamState::new(shapes, AdamHyper::with_lr(0.01));
    let trees = corpus.build_trees();
    let tweet = &corpus.tweets[0];
    let sample = WordContextSample::at(0, &tweet.tokens, 1, config.cw).unwrap();
    let before = word_term(&store, &trees.word, &sample, 1.0);
    before.apply(&store, &adam);
    let after = word_term(&store, &trees.word, &sample, 1.0);
    assert!(
        after.loss < before.loss,
        "step did not descend: {} -> {}",
        before.loss,
        after.loss
    );
}

#[test]
fn non_finite_loss_aborts_with_term_name() {
    let corpus = small_corpus(8);
    let config = TrainConfig {
        hyper: AdamHyper::with_lr(1e200),
        epochs: 1,
        ..small_config()
    };
    let err = train(&corpus, &config, None).unwrap_err();
    assert!(err.is_numerical_error(), "unexpected error {err}");
    let msg = err.to_string();
    assert!(msg.contains("non-finite loss"), "{msg}");
    assert!(
        ["word", "tweet_from_words", "temporal", "user"]
            .iter()
            .any(|t| msg.contains(t)),
        "{msg}"
    );
}

#[test]
fn throughput_mode_runs_and_merges_reports() {
    let corpus = small_corpus(9);
    let det = small_config();
    let thr = TrainConfig {
        mode: TrainMode::Throughput,
        workers: 3,
        ..det.clone()
    };
    let a = train(&corpus, &det, None).unwrap();
    let b = train(&corpus, &thr, None).unwrap();
    assert!(b.store.all_finite());
    // Sample counts are structural and must agree between contracts even
    // though parameter values may differ.
    let counts = |out: &tle_core::trainer::TrainOutput| -> Vec<u64> {
        out.attention.rows.iter().map(|r| r.count).collect()
    };
    assert_eq!(counts(&a), counts(&b));
    assert_eq!(a.losses.rows.len(), b.losses.rows.len());
}

#[test]
fn empty_corpus_cannot_train() {
    let corpus = ingest_reader(BufReader::new("".as_bytes()), &IngestConfig::default()).unwrap();
    assert!(train(&corpus, &small_config(), None).is_err());
}

#[test]
fn throughput_single_worker_matches_deterministic() {
    // With one worker the throughput path processes the same samples in
    // the same order, so the two contracts must coincide bitwise.
    let corpus = small_corpus(10);
    let det = small_config();
    let thr = TrainConfig {
        mode: TrainMode::Throughput,
        ..det.clone()
    };
    let a = train(&corpus, &det, None).unwrap();
    let b = train(&corpus, &thr, None).unwrap();
    for slot in Slot::ALL {
        let (ma, mb) = (a.store.matrix(slot), b.store.matrix(slot));
        assert!(ma
            .iter()
            .zip(mb.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(a.losses.to_csv(), b.losses.to_csv());
    assert_eq!(a.attention.to_csv(), b.attention.to_csv());
}

/// Replays the documented epoch loop with learned attention while
/// withholding updates to the attention matrix. Starting from the zero
/// initialization this must track the uniform-attention mode exactly,
/// loss for loss and parameter for parameter.
#[test]
fn frozen_zero_attention_run_equals_uniform_run() {
    let corpus = small_corpus(12);
    let config = small_config();
    let shapes = config.shapes_for(&corpus);
    let trees = corpus.build_trees();
    let w = config.term_weights;

    let replay = |mode: AttentionMode, freeze_attention: bool| -> (ParameterStore, Vec<f64>) {
        let store = ParameterStore::init(shapes, config.seed, None).unwrap();
        let adam = AdamState::new(shapes, config.hyper);
        let apply = |grads: &TermGrads| {
            let t = adam.next_step();
            for (slot, row, grad) in grads.rows() {
                if freeze_attention && slot == Slot::Attention {
                    continue;
                }
                adam.apply_row(&store, slot, row, grad, t);
            }
        };
        let mut losses = Vec::new();
        for _ in 0..config.epochs {
            for (user_index, user) in corpus.users.iter().enumerate() {
                for (pos, &tweet_index) in user.tweets.iter().enumerate() {
                    let tweet = &corpus.tweets[tweet_index];
                    for sample in
                        WordContextSample::for_tweet(tweet_index, &tweet.tokens, config.cw)
                    {
                        let grads = word_term(&store, &trees.word, &sample, w.word);
                        apply(&grads);
                        losses.push(grads.loss);
                    }
                    if let Some(grads) = tweet_from_words_term(
                        &store,
                        &trees.tweet,
                        tweet_index,
                        &tweet.tokens,
                        w.tweet_from_words,
                    ) {
                        apply(&grads);
                        losses.push(grads.loss);
                    }
                    if let Some(sample) =
                        TemporalSample::at(user_index, &user.tweets, pos, config.ct)
                    {
                        let result =
                            temporal_term(&store, &trees.tweet, &sample, mode, false, w.temporal);
                        apply(&result.grads);
                        losses.push(result.grads.loss);
                    }
                }
                if let Some(grads) = user_term(&store, &trees.user, user_index, &user.tweets, w.user)
                {
                    apply(&grads);
                    losses.push(grads.loss);
                }
            }
        }
        (store, losses)
    };

    let (frozen_store, frozen_losses) = replay(AttentionMode::Learned, true);
    let (uniform_store, uniform_losses) = replay(AttentionMode::Uniform, false);

    assert_eq!(frozen_losses.len(), uniform_losses.len());
    for (a, b) in frozen_losses.iter().zip(&uniform_losses) {
        assert!((a - b).abs() < 1e-12, "sample losses diverge: {a} vs {b}");
    }
    for slot in Slot::ALL {
        let (ma, mb) = (frozen_store.matrix(slot), uniform_store.matrix(slot));
        let close = ma
            .iter()
            .zip(mb.iter())
            .all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close, "{slot:?} diverged between frozen and uniform runs");
    }
}

#[test]
fn adam_second_moments_stay_nonnegative() {
    let corpus = small_corpus(13);
    let config = TrainConfig {
        epochs: 2,
        ..small_config()
    };
    let out = train(&corpus, &config, None).unwrap();
    for slot in Slot::ALL {
        let (_, v) = out.adam.moments(slot);
        assert!(v.iter().all(|x| x >= 0.0), "{slot:?} has a negative moment");
    }
}
