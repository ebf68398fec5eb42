//! Temporal context model: predicts a tweet from the attention-weighted
//! sum of its chronological neighbours, optionally conditioned on the
//! author's user vector, plus the user-from-tweets term.

use crate::corpus::CodingTree;
use crate::params::{ParameterStore, Slot, TermGrads};
use crate::tensor::Matrix;
use crate::wordctx::hs_loss_grad;

/// One temporal prediction sample: the target tweet and its context slots
/// at offsets `-C_T..-1, +1..+C_T` within the same user's timeline. Slots
/// falling outside the timeline are `None`.
#[derive(Debug, Clone)]
pub struct TemporalSample {
    pub target_tweet: usize,
    pub user_index: usize,
    pub slots: Vec<Option<usize>>,
}

impl TemporalSample {
    /// Builds the sample for `timeline[pos]`, or `None` when no context
    /// slot is available (the user has a single tweet).
    pub fn at(user_index: usize, timeline: &[usize], pos: usize, ct: usize) -> Option<Self> {
        let mut slots = Vec::with_capacity(2 * ct);
        for slot in 0..2 * ct {
            let offset = Self::slot_offset(slot, ct);
            let neighbour = pos as i64 + offset;
            if neighbour >= 0 && (neighbour as usize) < timeline.len() {
                slots.push(Some(timeline[neighbour as usize]));
            } else {
                slots.push(None);
            }
        }
        if slots.iter().all(Option::is_none) {
            return None;
        }
        Some(TemporalSample {
            target_tweet: timeline[pos],
            user_index,
            slots,
        })
    }

    /// Signed timeline offset of a slot index: slots are ordered
    /// `-C_T, ..., -1, +1, ..., +C_T`.
    pub fn slot_offset(slot: usize, ct: usize) -> i64 {
        let s = slot as i64 - ct as i64;
        if s < 0 {
            s
        } else {
            s + 1
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.slots.iter().map(Option::is_some).collect()
    }

    pub fn available(&self) -> usize {
        self.slots.iter().flatten().count()
    }
}

/// Per-slot attention weights. Weights over available slots sum to one;
/// unavailable slots carry exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionVector {
    pub weights: Vec<f64>,
}

/// Softmax over the unmasked entries of `logits`; masked entries get
/// exactly zero weight.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    debug_assert_eq!(logits.len(), mask.len());
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut weights = vec![0.0; logits.len()];
    let mut total = 0.0;
    for i in 0..logits.len() {
        if mask[i] {
            weights[i] = (logits[i] - max).exp();
            total += weights[i];
        }
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    weights
}

/// Context tweet vectors concatenated in slot order, zeros in masked
/// slots, together with the availability mask.
pub struct ContextBlock {
    pub concat: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ContextBlock {
    pub fn gather(store: &ParameterStore, sample: &TemporalSample) -> Self {
        let dim = store.shapes.dim;
        let mut concat = vec![0.0; sample.slots.len() * dim];
        for (slot, tweet) in sample.slots.iter().enumerate() {
            if let Some(t) = tweet {
                store
                    .tweet_vectors
                    .load_row(*t, &mut concat[slot * dim..(slot + 1) * dim]);
            }
        }
        ContextBlock {
            concat,
            mask: sample.mask(),
        }
    }
}

/// Learned attention: logits are the attention matrix applied to the
/// concatenated context block, masked-softmaxed over available slots.
pub fn attention_weights(context: &ContextBlock, attention: &Matrix) -> AttentionVector {
    let logits: Vec<f64> = (0..attention.rows())
        .map(|row| {
            if context.mask[row] {
                attention.row_dot(row, &context.concat)
            } else {
                0.0
            }
        })
        .collect();
    AttentionVector {
        weights: masked_softmax(&logits, &context.mask),
    }
}

/// Uniform attention over available slots (the equal-weight baseline).
pub fn uniform_attention(mask: &[bool]) -> AttentionVector {
    let available = mask.iter().filter(|&&m| m).count();
    let w = 1.0 / available as f64;
    AttentionVector {
        weights: mask.iter().map(|&m| if m { w } else { 0.0 }).collect(),
    }
}

/// Simple-distance attention: weight inversely proportional to the slot's
/// timeline distance from the target, normalized over available slots.
pub fn sd_attention(sample: &TemporalSample) -> AttentionVector {
    let ct = sample.slots.len() / 2;
    let mut weights: Vec<f64> = (0..sample.slots.len())
        .map(|slot| {
            if sample.slots[slot].is_some() {
                1.0 / TemporalSample::slot_offset(slot, ct).unsigned_abs() as f64
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    AttentionVector { weights }
}

/// How context attention is produced during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMode {
    /// Weights from the trained attention matrix.
    Learned,
    /// Equal weights over available slots.
    Uniform,
    /// Inverse-distance weights.
    Sd,
}

impl std::str::FromStr for AttentionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "learned" => Ok(AttentionMode::Learned),
            "uniform" => Ok(AttentionMode::Uniform),
            "sd" => Ok(AttentionMode::Sd),
            other => Err(format!("unknown attention mode `{other}`")),
        }
    }
}

impl std::fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttentionMode::Learned => "learned",
            AttentionMode::Uniform => "uniform",
            AttentionMode::Sd => "sd",
        })
    }
}

/// Loss, gradients and the attention weights actually used for one
/// temporal sample.
pub struct TemporalResult {
    pub grads: TermGrads,
    pub attention: AttentionVector,
}

/// Forward/backward of the temporal context model. The input to the
/// hierarchical-softmax head is the attention-weighted sum of available
/// context tweet vectors, plus the user vector when `use_user` is set.
/// In learned mode gradients also flow through the softmax into the
/// attention matrix and back into the context vectors through it.
pub fn temporal_term(
    store: &ParameterStore,
    tweet_tree: &CodingTree,
    sample: &TemporalSample,
    mode: AttentionMode,
    use_user: bool,
    weight: f64,
) -> TemporalResult {
    let dim = store.shapes.dim;
    let context = ContextBlock::gather(store, sample);
    let attention = match mode {
        AttentionMode::Learned => attention_weights(&context, &store.attention),
        AttentionMode::Uniform => uniform_attention(&context.mask),
        AttentionMode::Sd => sd_attention(sample),
    };

    let mut input = vec![0.0; dim];
    for (slot, alpha) in attention.weights.iter().enumerate() {
        if context.mask[slot] {
            for (x, v) in input
                .iter_mut()
                .zip(&context.concat[slot * dim..(slot + 1) * dim])
            {
                *x += alpha * v;
            }
        }
    }
    if use_user {
        for (x, cell) in input
            .iter_mut()
            .zip(store.user_vectors.row(sample.user_index))
        {
            *x += cell.get();
        }
    }

    let hs = hs_loss_grad(
        &input,
        sample.target_tweet,
        tweet_tree,
        &store.tweet_tree_nodes,
    );
    let mut grads = TermGrads::new(weight * hs.loss);
    for (node, g) in &hs.node_grads {
        grads.accumulate(Slot::TweetNode, *node, weight, g);
    }
    if use_user {
        grads.accumulate(Slot::UserVec, sample.user_index, weight, &hs.grad_input);
    }
    // Direct path: d input / d t(l) = alpha(l).
    for (slot, tweet) in sample.slots.iter().enumerate() {
        if let Some(t) = tweet {
            grads.accumulate(
                Slot::TweetVec,
                *t,
                weight * attention.weights[slot],
                &hs.grad_input,
            );
        }
    }

    if mode == AttentionMode::Learned {
        // d loss / d alpha(l) = <grad_input, t(l)>.
        let grad_alpha: Vec<f64> = (0..sample.slots.len())
            .map(|slot| {
                if context.mask[slot] {
                    hs.grad_input
                        .iter()
                        .zip(&context.concat[slot * dim..(slot + 1) * dim])
                        .map(|(g, v)| g * v)
                        .sum()
                } else {
                    0.0
                }
            })
            .collect();
        let weighted_mean: f64 = attention
            .weights
            .iter()
            .zip(&grad_alpha)
            .map(|(a, g)| a * g)
            .sum();
        // Softmax backward, restricted to available slots.
        let grad_logits: Vec<f64> = attention
            .weights
            .iter()
            .zip(&grad_alpha)
            .map(|(a, g)| a * (g - weighted_mean))
            .collect();

        let mut row_grad = vec![0.0; context.concat.len()];
        for (slot, &dlogit) in grad_logits.iter().enumerate() {
            if !context.mask[slot] {
                continue;
            }
            // d logits(slot) / d A[slot, :] = concat.
            for (rg, v) in row_grad.iter_mut().zip(&context.concat) {
                *rg = dlogit * v;
            }
            grads.accumulate(Slot::Attention, slot, weight, &row_grad);
            // d logits(slot) / d concat = A[slot, :]; only segments of
            // available slots belong to real tweets.
            let a_row = store.attention.row(slot);
            for (seg, tweet) in sample.slots.iter().enumerate() {
                if let Some(t) = tweet {
                    let seg_grad: Vec<f64> = a_row[seg * dim..(seg + 1) * dim]
                        .iter()
                        .map(|cell| dlogit * cell.get())
                        .collect();
                    grads.accumulate(Slot::TweetVec, *t, weight, &seg_grad);
                }
            }
        }
    }

    TemporalResult { grads, attention }
}

/// Forward/backward of the user-from-tweets term: the mean of the user's
/// tweet vectors predicts the user's leaf in the user tree. Returns `None`
/// when the user has no tweets; a single-user corpus has a one-leaf tree
/// and contributes zero loss and no gradients.
pub fn user_term(
    store: &ParameterStore,
    user_tree: &CodingTree,
    user_index: usize,
    tweet_indices: &[usize],
    weight: f64,
) -> Option<TermGrads> {
    if tweet_indices.is_empty() {
        return None;
    }
    if user_tree.path(user_index).is_empty() {
        return Some(TermGrads::new(0.0));
    }
    let dim = store.shapes.dim;
    let scale = 1.0 / tweet_indices.len() as f64;
    let mut input = vec![0.0; dim];
    for &t in tweet_indices {
        for (x, cell) in input.iter_mut().zip(store.tweet_vectors.row(t)) {
            *x += cell.get();
        }
    }
    for x in input.iter_mut() {
        *x *= scale;
    }

    let hs = hs_loss_grad(&input, user_index, user_tree, &store.user_tree_nodes);
    let mut grads = TermGrads::new(weight * hs.loss);
    for &t in tweet_indices {
        grads.accumulate(Slot::TweetVec, t, weight * scale, &hs.grad_input);
    }
    for (node, g) in &hs.node_grads {
        grads.accumulate(Slot::UserNode, *node, weight, g);
    }
    Some(grads)
}
