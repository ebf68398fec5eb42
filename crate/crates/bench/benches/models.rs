use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tle_bench::{model_fixture, synthetic_corpus};
use tle_core::trainer::train;
use tle_core::tweetctx::{temporal_term, AttentionMode, TemporalSample};
use tle_core::wordctx::{hs_loss_grad, word_term, WordContextSample};
use tle_core::TrainConfig;

fn reference_config() -> TrainConfig {
    TrainConfig {
        dim: 200,
        cw: 10,
        ct: 2,
        epochs: 1,
        seed: 3,
        ..Default::default()
    }
}

fn bench_terms(c: &mut Criterion) {
    let corpus = synthetic_corpus(20, 50, 3);
    let config = reference_config();
    let (store, trees) = model_fixture(&corpus, &config);

    let tweet = &corpus.tweets[3];
    let word_sample = WordContextSample::at(3, &tweet.tokens, 2, config.cw).unwrap();
    c.bench_function("word_term_n200", |b| {
        b.iter(|| word_term(black_box(&store), &trees.word, &word_sample, 1.0))
    });

    let timeline = &corpus.users[0].tweets;
    let temporal_sample = TemporalSample::at(0, timeline, 10, config.ct).unwrap();
    c.bench_function("temporal_term_n200_ct2", |b| {
        b.iter(|| {
            temporal_term(
                black_box(&store),
                &trees.tweet,
                &temporal_sample,
                AttentionMode::Learned,
                true,
                1.0,
            )
        })
    });

    let input: Vec<f64> = (0..config.dim).map(|i| (i as f64).sin() * 0.05).collect();
    c.bench_function("hs_loss_grad_1000_leaves", |b| {
        b.iter(|| {
            hs_loss_grad(
                black_box(&input),
                black_box(371),
                &trees.tweet,
                &store.tweet_tree_nodes,
            )
        })
    });
}

fn bench_epoch(c: &mut Criterion) {
    let corpus = synthetic_corpus(10, 20, 5);
    let config = TrainConfig {
        dim: 50,
        cw: 3,
        ct: 2,
        epochs: 1,
        seed: 5,
        ..Default::default()
    };
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("epoch_200_tweets_n50", |b| {
        b.iter(|| train(black_box(&corpus), &config, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_terms, bench_epoch);
criterion_main!(benches);
