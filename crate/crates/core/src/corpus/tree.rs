use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// A child pointer inside a [`CodingTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    Internal(u32),
    Leaf(u32),
}

/// Binary prefix-code tree for hierarchical softmax. Every leaf carries a
/// bit code and the list of internal nodes visited from the root; the two
/// sequences always have equal length. A tree with `n` leaves has `n - 1`
/// internal nodes (none for `n <= 1`).
#[derive(Debug, Clone)]
pub struct CodingTree {
    codes: Vec<Vec<bool>>,
    paths: Vec<Vec<u32>>,
    children: Vec<[NodeRef; 2]>,
    root: Option<NodeRef>,
}

impl CodingTree {
    pub fn empty() -> Self {
        CodingTree {
            codes: Vec::new(),
            paths: Vec::new(),
            children: Vec::new(),
            root: None,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.codes.len()
    }

    pub fn internal_node_count(&self) -> usize {
        self.children.len()
    }

    /// Code bits of a leaf, one per tree level on the root-to-leaf walk.
    pub fn code(&self, leaf: usize) -> &[bool] {
        &self.codes[leaf]
    }

    /// Internal-node indices visited from the root down to `leaf`.
    pub fn path(&self, leaf: usize) -> &[u32] {
        &self.paths[leaf]
    }

    pub fn root(&self) -> Option<NodeRef> {
        self.root
    }

    /// Children of an internal node, indexed by code bit.
    pub fn child(&self, internal: u32, bit: bool) -> NodeRef {
        self.children[internal as usize][usize::from(bit)]
    }

    /// Follows `bits` from the root; returns the leaf reached, or `None`
    /// if the walk ends on an internal node or runs past a leaf.
    pub fn walk(&self, bits: &[bool]) -> Option<usize> {
        let mut node = self.root?;
        for &bit in bits {
            match node {
                NodeRef::Internal(i) => node = self.child(i, bit),
                NodeRef::Leaf(_) => return None,
            }
        }
        match node {
            NodeRef::Leaf(l) => Some(l as usize),
            NodeRef::Internal(_) => None,
        }
    }

    /// Total weighted code length under `weights` (one weight per leaf).
    pub fn weighted_length(&self, weights: &[u64]) -> u64 {
        self.codes
            .iter()
            .zip(weights)
            .map(|(code, w)| code.len() as u64 * w)
            .sum()
    }

    fn from_parents(
        leaf_count: usize,
        parents: &[(usize, bool)],
        children: Vec<[NodeRef; 2]>,
    ) -> Self {
        // parents[k] = (internal parent id, bit) for merged element k, where
        // elements 0..leaf_count are leaves and leaf_count.. are internal
        // nodes in creation order. The root has no entry.
        let mut codes = Vec::with_capacity(leaf_count);
        let mut paths = Vec::with_capacity(leaf_count);
        for leaf in 0..leaf_count {
            let mut code = Vec::new();
            let mut path = Vec::new();
            let mut element = leaf;
            while element < parents.len() {
                let (parent, bit) = parents[element];
                code.push(bit);
                path.push(parent as u32);
                element = leaf_count + parent;
            }
            code.reverse();
            path.reverse();
            codes.push(code);
            paths.push(path);
        }
        let root = if leaf_count == 0 {
            None
        } else if leaf_count == 1 {
            Some(NodeRef::Leaf(0))
        } else {
            Some(NodeRef::Internal(children.len() as u32 - 1))
        };
        CodingTree {
            codes,
            paths,
            children,
            root,
        }
    }
}

/// Builds a Huffman tree over per-leaf frequencies. Ties are broken by
/// taking the element created earliest (original leaves in index order
/// first), which makes the construction deterministic.
///
/// # Panics
/// Panics if `counts` is empty or contains a zero.
pub fn build_huffman(counts: &[u64]) -> CodingTree {
    assert!(!counts.is_empty(), "huffman tree needs at least one leaf");
    assert!(
        counts.iter().all(|&c| c > 0),
        "leaf frequencies must be > 0"
    );

    let n = counts.len();
    if n == 1 {
        return CodingTree::from_parents(1, &[], Vec::new());
    }

    // Min-heap on (weight, creation order). Element ids: 0..n leaves,
    // n..2n-1 internal nodes in creation order.
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| Reverse((c, i)))
        .collect();

    let mut parents = vec![(usize::MAX, false); 2 * n - 2];
    let mut children = Vec::with_capacity(n - 1);
    while heap.len() > 1 {
        let Reverse((w0, e0)) = heap.pop().unwrap();
        let Reverse((w1, e1)) = heap.pop().unwrap();
        let internal = children.len();
        parents[e0] = (internal, false);
        parents[e1] = (internal, true);
        let as_ref = |e: usize| {
            if e < n {
                NodeRef::Leaf(e as u32)
            } else {
                NodeRef::Internal((e - n) as u32)
            }
        };
        children.push([as_ref(e0), as_ref(e1)]);
        heap.push(Reverse((w0 + w1, n + internal)));
    }

    CodingTree::from_parents(n, &parents, children)
}

/// Builds a complete binary tree over `leaf_count` uniformly weighted
/// leaves: every level is full except possibly the last, and code lengths
/// differ by at most one.
pub fn build_balanced(leaf_count: usize) -> CodingTree {
    if leaf_count == 0 {
        return CodingTree::empty();
    }
    if leaf_count == 1 {
        return CodingTree::from_parents(1, &[], Vec::new());
    }

    // Heap layout over 2n-1 nodes: node i has children 2i+1 and 2i+2;
    // nodes 0..n-1 are internal, n-1..2n-1 are the leaves in order.
    let n = leaf_count;
    let total = 2 * n - 1;
    let as_ref = |node: usize| {
        if node < n - 1 {
            NodeRef::Internal(node as u32)
        } else {
            NodeRef::Leaf((node - (n - 1)) as u32)
        }
    };
    let children: Vec<[NodeRef; 2]> = (0..n - 1)
        .map(|i| [as_ref(2 * i + 1), as_ref(2 * i + 2)])
        .collect();

    let mut codes = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for leaf in 0..n {
        let mut code = Vec::new();
        let mut path = Vec::new();
        let mut node = n - 1 + leaf;
        debug_assert!(node < total);
        while node > 0 {
            let parent = (node - 1) / 2;
            code.push(node == 2 * parent + 2);
            path.push(parent as u32);
            node = parent;
        }
        code.reverse();
        path.reverse();
        codes.push(code);
        paths.push(path);
    }

    CodingTree {
        codes,
        paths,
        children,
        root: Some(NodeRef::Internal(0)),
    }
}
