//! Property tests over the corpus encodings, coding trees, hierarchical
//! softmax normalization and attention invariants.

use std::io::BufReader;

use proptest::prelude::*;

use tle_core::corpus::{build_balanced, build_huffman, ingest_reader, IngestConfig};
use tle_core::corpus::{tokenize, TokenizerConfig};
use tle_core::tweetctx::masked_softmax;
use tle_core::wordctx::hs_loss;
use tle_core::Matrix;

fn word_strategy() -> impl Strategy<Value = String> {
    "[a-z#@][a-z0-9]{0,6}"
}

proptest! {
    #[test]
    fn vocabulary_roundtrip_identity(words in prop::collection::vec(word_strategy(), 1..40)) {
        let text = words.join(" ");
        let tsv = format!("u1\tt1\t0\t{text}\n");
        let corpus = ingest_reader(BufReader::new(tsv.as_bytes()), &IngestConfig::default()).unwrap();
        for i in 0..corpus.vocab.len() {
            prop_assert_eq!(corpus.vocab.index_of(corpus.vocab.word(i)), Some(i));
        }
        // Every retained token decodes back to itself through the maps.
        for tok in tokenize(&text, &TokenizerConfig::default()) {
            if let Some(idx) = corpus.vocab.index_of(&tok) {
                prop_assert_eq!(corpus.vocab.word(idx), tok.as_str());
            }
        }
    }

    #[test]
    fn tokenize_is_pure(text in ".{0,80}") {
        let cfg = TokenizerConfig::default();
        prop_assert_eq!(tokenize(&text, &cfg), tokenize(&text, &cfg));
    }

    #[test]
    fn every_code_walks_to_its_leaf(weights in prop::collection::vec(1u64..50, 1..24)) {
        let tree = build_huffman(&weights);
        for leaf in 0..tree.leaf_count() {
            prop_assert_eq!(tree.walk(tree.code(leaf)), Some(leaf));
            prop_assert_eq!(tree.code(leaf).len(), tree.path(leaf).len());
        }
    }

    #[test]
    fn hs_probabilities_sum_to_one(
        weights in prop::collection::vec(1u64..20, 1..64),
        seed in 0u64..1000,
        balanced in any::<bool>(),
    ) {
        let leaves = weights.len();
        let tree = if balanced { build_balanced(leaves) } else { build_huffman(&weights) };
        let dim = 3;
        let nodes = Matrix::zeros(tree.internal_node_count(), dim);
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64 * 2.0 - 1.0
        };
        for r in 0..nodes.rows() {
            for c in 0..dim {
                nodes.set(r, c, next());
            }
        }
        let input: Vec<f64> = (0..dim).map(|_| next()).collect();
        let total: f64 = (0..leaves).map(|l| (-hs_loss(&input, l, &tree, &nodes)).exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn masked_softmax_invariants(
        logits in prop::collection::vec(-30.0f64..30.0, 1..12),
        mask_bits in prop::collection::vec(any::<bool>(), 1..12),
    ) {
        let len = logits.len().min(mask_bits.len());
        let logits = &logits[..len];
        let mut mask = mask_bits[..len].to_vec();
        if mask.iter().all(|&m| !m) {
            mask[0] = true;
        }
        let weights = masked_softmax(logits, &mask);
        let total: f64 = weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (w, m) in weights.iter().zip(&mask) {
            if *m {
                prop_assert!(*w >= 0.0);
            } else {
                prop_assert_eq!(*w, 0.0);
            }
        }
    }
}
