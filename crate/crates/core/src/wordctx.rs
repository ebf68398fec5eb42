//! Word context model: predicts each word of a tweet from its surrounding
//! words plus the tweet vector, and predicts the tweet's own identity from
//! the mean of its word vectors. Both heads share the hierarchical-softmax
//! primitives defined here.

use crate::corpus::CodingTree;
use crate::params::{ParameterStore, Slot, TermGrads};
use crate::tensor::Matrix;

/// Logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + exp(x))`, stable for large |x|.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Loss and exact analytic gradients of one hierarchical-softmax
/// prediction.
#[derive(Debug)]
pub struct HsGrads {
    pub loss: f64,
    pub grad_input: Vec<f64>,
    /// Sparse gradients for the internal nodes on the target's path.
    pub node_grads: Vec<(usize, Vec<f64>)>,
}

/// Negative log-probability of `target_leaf` under the tree factorization:
/// at every internal node on the path the code bit picks the sigmoid sign,
/// so the loss is the sum of `softplus(-sign * <input, node>)` terms.
pub fn hs_loss(input: &[f64], target_leaf: usize, tree: &CodingTree, nodes: &Matrix) -> f64 {
    tree.path(target_leaf)
        .iter()
        .zip(tree.code(target_leaf))
        .map(|(&node, &bit)| {
            let z = nodes.row_dot(node as usize, input);
            let sign = if bit { 1.0 } else { -1.0 };
            softplus(-sign * z)
        })
        .sum()
}

/// [`hs_loss`] plus gradients with respect to the input vector and every
/// node vector on the path. `d loss / d z = sigmoid(z) - bit` at each
/// level.
pub fn hs_loss_grad(
    input: &[f64],
    target_leaf: usize,
    tree: &CodingTree,
    nodes: &Matrix,
) -> HsGrads {
    let mut loss = 0.0;
    let mut grad_input = vec![0.0; input.len()];
    let path = tree.path(target_leaf);
    let mut node_grads = Vec::with_capacity(path.len());
    for (&node, &bit) in path.iter().zip(tree.code(target_leaf)) {
        let node = node as usize;
        let z = nodes.row_dot(node, input);
        let sign = if bit { 1.0 } else { -1.0 };
        loss += softplus(-sign * z);
        let dz = sigmoid(z) - f64::from(bit);
        for (g, cell) in grad_input.iter_mut().zip(nodes.row(node)) {
            *g += dz * cell.get();
        }
        node_grads.push((node, input.iter().map(|&x| dz * x).collect()));
    }
    HsGrads {
        loss,
        grad_input,
        node_grads,
    }
}

/// One word-prediction sample: a target position inside a tweet together
/// with the surrounding word indices. The window clips at tweet
/// boundaries, so the context may be shorter than `2 * C_W`.
#[derive(Debug, Clone)]
pub struct WordContextSample {
    pub tweet_index: usize,
    pub target_pos: usize,
    pub target_word: usize,
    pub context: Vec<usize>,
}

impl WordContextSample {
    /// Builds the sample for one target position, or `None` when the tweet
    /// has fewer than two tokens (no context, and the target cannot
    /// condition on itself).
    pub fn at(tweet_index: usize, tokens: &[usize], target_pos: usize, cw: usize) -> Option<Self> {
        if tokens.len() < 2 {
            return None;
        }
        let lo = target_pos.saturating_sub(cw);
        let hi = (target_pos + cw).min(tokens.len() - 1);
        let context = (lo..=hi)
            .filter(|&p| p != target_pos)
            .map(|p| tokens[p])
            .collect();
        Some(WordContextSample {
            tweet_index,
            target_pos,
            target_word: tokens[target_pos],
            context,
        })
    }

    /// All samples of a tweet, one per token position.
    pub fn for_tweet(tweet_index: usize, tokens: &[usize], cw: usize) -> Vec<Self> {
        (0..tokens.len())
            .filter_map(|pos| Self::at(tweet_index, tokens, pos, cw))
            .collect()
    }
}

/// Forward/backward of the word context model on one sample. The input is
/// the sum of the context word vectors plus the tweet vector; the target
/// word's leaf is predicted in the word tree. Gradients flow equally into
/// every contributing word vector, the tweet vector and the touched tree
/// nodes. `weight` scales the term's contribution to the joint objective.
pub fn word_term(
    store: &ParameterStore,
    word_tree: &CodingTree,
    sample: &WordContextSample,
    weight: f64,
) -> TermGrads {
    let dim = store.shapes.dim;
    let mut input = store.tweet_vectors.row_vec(sample.tweet_index);
    debug_assert_eq!(input.len(), dim);
    for &word in &sample.context {
        for (x, cell) in input.iter_mut().zip(store.word_vectors.row(word)) {
            *x += cell.get();
        }
    }

    let hs = hs_loss_grad(
        &input,
        sample.target_word,
        word_tree,
        &store.word_tree_nodes,
    );
    let mut grads = TermGrads::new(weight * hs.loss);
    for &word in &sample.context {
        grads.accumulate(Slot::WordVec, word, weight, &hs.grad_input);
    }
    grads.accumulate(Slot::TweetVec, sample.tweet_index, weight, &hs.grad_input);
    for (node, g) in &hs.node_grads {
        grads.accumulate(Slot::WordNode, *node, weight, g);
    }
    grads
}

/// Forward/backward of the tweet-from-words term: the mean of the tweet's
/// word vectors predicts the tweet's own leaf in the tweet tree. Returns
/// `None` for tweets left empty by vocabulary filtering.
pub fn tweet_from_words_term(
    store: &ParameterStore,
    tweet_tree: &CodingTree,
    tweet_index: usize,
    tokens: &[usize],
    weight: f64,
) -> Option<TermGrads> {
    if tokens.is_empty() {
        return None;
    }
    let dim = store.shapes.dim;
    let scale = 1.0 / tokens.len() as f64;
    let mut input = vec![0.0; dim];
    for &word in tokens {
        for (x, cell) in input.iter_mut().zip(store.word_vectors.row(word)) {
            *x += cell.get();
        }
    }
    for x in input.iter_mut() {
        *x *= scale;
    }

    let hs = hs_loss_grad(&input, tweet_index, tweet_tree, &store.tweet_tree_nodes);
    let mut grads = TermGrads::new(weight * hs.loss);
    for &word in tokens {
        grads.accumulate(Slot::WordVec, word, weight * scale, &hs.grad_input);
    }
    for (node, g) in &hs.node_grads {
        grads.accumulate(Slot::TweetNode, *node, weight, g);
    }
    Some(grads)
}
