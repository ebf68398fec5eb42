//! Trainable parameters and optimizer state: initialization, Adam updates,
//! checkpointing and embedding export.

mod checkpoint;
mod export;
mod pretrained;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use export::{export_embeddings, ExportKind};
pub use pretrained::{load_pretrained_words, PretrainedWords};

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::tensor::{Cell, Matrix};
use crate::Result;

/// Identifies one of the trainable tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    WordVec,
    TweetVec,
    UserVec,
    WordNode,
    TweetNode,
    UserNode,
    Attention,
}

impl Slot {
    pub const ALL: [Slot; 7] = [
        Slot::WordVec,
        Slot::TweetVec,
        Slot::UserVec,
        Slot::WordNode,
        Slot::TweetNode,
        Slot::UserNode,
        Slot::Attention,
    ];
}

/// Tensor shapes of one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shapes {
    pub vocab: usize,
    pub tweets: usize,
    pub users: usize,
    pub dim: usize,
    pub cw: usize,
    pub ct: usize,
}

impl Shapes {
    fn of(&self, slot: Slot) -> (usize, usize) {
        match slot {
            Slot::WordVec => (self.vocab, self.dim),
            Slot::TweetVec => (self.tweets, self.dim),
            Slot::UserVec => (self.users, self.dim),
            Slot::WordNode => (self.vocab.saturating_sub(1), self.dim),
            Slot::TweetNode => (self.tweets.saturating_sub(1), self.dim),
            Slot::UserNode => (self.users.saturating_sub(1), self.dim),
            Slot::Attention => (2 * self.ct, 2 * self.ct * self.dim),
        }
    }
}

/// All trainable parameters. Embedding tables hold one row per word, tweet
/// or user; the `*_node` tables hold the hierarchical-softmax internal-node
/// vectors realizing the dense output matrices of the two prediction heads;
/// `attention` is the (2*C_T) x (2*C_T*n) weight matrix producing context
/// attention logits.
#[derive(Debug)]
pub struct ParameterStore {
    pub shapes: Shapes,
    pub word_vectors: Matrix,
    pub tweet_vectors: Matrix,
    pub user_vectors: Matrix,
    pub word_tree_nodes: Matrix,
    pub tweet_tree_nodes: Matrix,
    pub user_tree_nodes: Matrix,
    pub attention: Matrix,
}

impl ParameterStore {
    fn zeros(shapes: Shapes) -> Self {
        let m = |slot| {
            let (r, c) = shapes.of(slot);
            Matrix::zeros(r, c)
        };
        ParameterStore {
            shapes,
            word_vectors: m(Slot::WordVec),
            tweet_vectors: m(Slot::TweetVec),
            user_vectors: m(Slot::UserVec),
            word_tree_nodes: m(Slot::WordNode),
            tweet_tree_nodes: m(Slot::TweetNode),
            user_tree_nodes: m(Slot::UserNode),
            attention: m(Slot::Attention),
        }
    }

    /// Initializes a store: tweet, user and (unmatched) word vectors are
    /// drawn uniformly from (-0.5/n, +0.5/n) by a seeded generator; tree
    /// nodes and the attention matrix start at zero, so the first-epoch
    /// attention distribution is exactly uniform.
    pub fn init(
        shapes: Shapes,
        seed: u64,
        pretrained: Option<&pretrained::PretrainedWords>,
    ) -> Result<Self> {
        if let Some(p) = pretrained {
            if p.dim != shapes.dim {
                return Err(Error::Shape(format!(
                    "pretrained word vectors have dimension {} but the model uses {}",
                    p.dim, shapes.dim
                )));
            }
        }

        let store = ParameterStore::zeros(shapes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / shapes.dim as f64;
        let mut fill = |m: &Matrix| {
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    m.set(r, c, rng.random_range(-half..half));
                }
            }
        };
        fill(&store.word_vectors);
        fill(&store.tweet_vectors);
        fill(&store.user_vectors);
        Ok(store)
    }

    /// Copies pretrained vectors over the rows of words present in `words`.
    pub fn apply_pretrained(&self, words: &[String], pretrained: &pretrained::PretrainedWords) {
        for (row, word) in words.iter().enumerate() {
            if let Some(vec) = pretrained.vectors.get(word) {
                for (c, &v) in vec.iter().enumerate() {
                    self.word_vectors.set(row, c, v);
                }
            }
        }
    }

    pub fn matrix(&self, slot: Slot) -> &Matrix {
        match slot {
            Slot::WordVec => &self.word_vectors,
            Slot::TweetVec => &self.tweet_vectors,
            Slot::UserVec => &self.user_vectors,
            Slot::WordNode => &self.word_tree_nodes,
            Slot::TweetNode => &self.tweet_tree_nodes,
            Slot::UserNode => &self.user_tree_nodes,
            Slot::Attention => &self.attention,
        }
    }

    /// True when no parameter is NaN or infinite.
    pub fn all_finite(&self) -> bool {
        Slot::ALL.iter().all(|&s| self.matrix(s).all_finite())
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper {
            lr,
            ..Default::default()
        }
    }
}

/// Per-parameter Adam moment estimates plus the shared step counter. The
/// counter advances once per training term; all rows touched by that term
/// share the same bias-correction step.
#[derive(Debug)]
pub struct AdamState {
    pub hyper: AdamHyper,
    step: AtomicU64,
    first: ParameterStore,
    second: ParameterStore,
}

impl AdamState {
    pub fn new(shapes: Shapes, hyper: AdamHyper) -> Self {
        AdamState {
            hyper,
            step: AtomicU64::new(0),
            first: ParameterStore::zeros(shapes),
            second: ParameterStore::zeros(shapes),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step.load(Ordering::Relaxed)
    }

    pub(crate) fn set_step_count(&self, t: u64) {
        self.step.store(t, Ordering::Relaxed);
    }

    /// Advances the step counter and returns the new (1-based) step.
    pub fn next_step(&self) -> u64 {
        self.step.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub fn moments(&self, slot: Slot) -> (&Matrix, &Matrix) {
        (self.first.matrix(slot), self.second.matrix(slot))
    }

    /// Applies one bias-corrected Adam update to a parameter row. The loss
    /// is the negative log-likelihood, so descent here is ascent on the
    /// objective.
    pub fn apply_row(&self, store: &ParameterStore, slot: Slot, row: usize, grad: &[f64], t: u64) {
        let params = store.matrix(slot).row(row);
        let (m, v) = self.moments(slot);
        adam_step(params, grad, m.row(row), v.row(row), &self.hyper, t);
    }
}

/// Gradients of one objective term, grouped by parameter row. Rows are
/// unique within a term; repeated touches (the same context word appearing
/// twice) are accumulated before any update, so updates do not depend on
/// visit order.
#[derive(Debug, Default)]
pub struct TermGrads {
    pub loss: f64,
    rows: Vec<(Slot, usize, Vec<f64>)>,
}

impl TermGrads {
    pub fn new(loss: f64) -> Self {
        TermGrads {
            loss,
            rows: Vec::new(),
        }
    }

    /// Adds `scale * grad` into the accumulator for `(slot, row)`.
    pub fn accumulate(&mut self, slot: Slot, row: usize, scale: f64, grad: &[f64]) {
        if let Some((_, _, acc)) = self
            .rows
            .iter_mut()
            .find(|(s, r, _)| *s == slot && *r == row)
        {
            for (a, g) in acc.iter_mut().zip(grad) {
                *a += scale * g;
            }
        } else {
            self.rows
                .push((slot, row, grad.iter().map(|g| scale * g).collect()));
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (Slot, usize, &[f64])> {
        self.rows.iter().map(|(s, r, g)| (*s, *r, g.as_slice()))
    }

    /// Looks up the accumulated gradient for one row, if touched.
    pub fn grad_for(&self, slot: Slot, row: usize) -> Option<&[f64]> {
        self.rows
            .iter()
            .find(|(s, r, _)| *s == slot && *r == row)
            .map(|(_, _, g)| g.as_slice())
    }

    /// Applies every accumulated row with one shared Adam step.
    pub fn apply(&self, store: &ParameterStore, adam: &AdamState) {
        let t = adam.next_step();
        for (slot, row, grad) in self.rows() {
            adam.apply_row(store, slot, row, grad, t);
        }
    }
}

/// One Adam update over a parameter slice. `t` is the 1-based step used
/// for bias correction.
pub fn adam_step(params: &[Cell], grad: &[f64], m: &[Cell], v: &[Cell], h: &AdamHyper, t: u64) {
    debug_assert_eq!(params.len(), grad.len());
    let correction1 = 1.0 - h.beta1.powi(t as i32);
    let correction2 = 1.0 - h.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grad[i];
        let m_i = h.beta1 * m[i].get() + (1.0 - h.beta1) * g;
        let v_i = h.beta2 * v[i].get() + (1.0 - h.beta2) * g * g;
        m[i].set(m_i);
        v[i].set(v_i);
        let m_hat = m_i / correction1;
        let v_hat = v_i / correction2;
        params[i].add(-h.lr * m_hat / (v_hat.sqrt() + h.epsilon));
    }
}
