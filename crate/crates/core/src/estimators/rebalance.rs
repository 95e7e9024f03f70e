use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{budget_hit, Asker, EstimatorError};
use crate::coding::{balanced_split, MergeItem, VertexId};
use crate::oracle::ClassSet;

#[derive(Debug, Clone)]
struct Node {
    parent: Option<VertexId>,
    children: Option<(VertexId, VertexId)>,
    class: Option<usize>,
}

/// Search tree over the live classes. Unlike [`crate::coding::CodeTree`]
/// it carries no counts: below a partition block the per-class counts are
/// never learned.
#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
    free: Vec<VertexId>,
    root: VertexId,
    m: usize,
}

impl SearchTree {
    /// Left-complete tree over `classes`, which must be non-empty and lie in
    /// `0..m`.
    pub fn balanced(classes: &[usize], m: usize) -> Self {
        assert!(!classes.is_empty(), "search tree needs a class");
        let mut t = Self {
            nodes: Vec::new(),
            free: Vec::new(),
            root: 0,
            m,
        };
        let mut sorted = classes.to_vec();
        sorted.sort_unstable();
        t.root = t.build(&sorted);
        t
    }

    fn build(&mut self, classes: &[usize]) -> VertexId {
        if classes.len() == 1 {
            assert!(classes[0] < self.m, "class outside universe");
            return self.alloc(Node {
                parent: None,
                children: None,
                class: Some(classes[0]),
            });
        }
        let split = balanced_split(classes.len());
        let l = self.build(&classes[..split]);
        let r = self.build(&classes[split..]);
        self.join(l, r)
    }

    fn alloc(&mut self, node: Node) -> VertexId {
        if let Some(id) = self.free.pop() {
            self.nodes[id] = node;
            id
        } else {
            self.nodes.push(node);
            self.nodes.len() - 1
        }
    }

    fn join(&mut self, l: VertexId, r: VertexId) -> VertexId {
        let id = self.alloc(Node {
            parent: None,
            children: Some((l, r)),
            class: None,
        });
        self.nodes[l].parent = Some(id);
        self.nodes[r].parent = Some(id);
        id
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn num_classes(&self) -> usize {
        self.m
    }

    pub fn children(&self, v: VertexId) -> Option<(VertexId, VertexId)> {
        self.nodes[v].children
    }

    pub fn class_of(&self, v: VertexId) -> Option<usize> {
        self.nodes[v].class
    }

    pub fn depth(&self, v: VertexId) -> usize {
        let mut d = 0;
        let mut u = v;
        while let Some(p) = self.nodes[u].parent {
            d += 1;
            u = p;
        }
        d
    }

    pub fn classes_under(&self, v: VertexId, set: &mut ClassSet) {
        set.clear();
        self.for_leaves(v, |c| set.insert(c));
    }

    /// Classes under `v`, ascending.
    pub fn class_list(&self, v: VertexId) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_leaves(v, |c| out.push(c));
        out.sort_unstable();
        out
    }

    fn for_leaves(&self, v: VertexId, mut f: impl FnMut(usize)) {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            match self.nodes[u].children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => f(self.nodes[u].class.expect("leaf has class")),
            }
        }
    }

    /// Classes still in the tree, ascending.
    pub fn live_classes(&self) -> Vec<usize> {
        self.class_list(self.root)
    }

    /// Replaces everything above `keep` with a Huffman merge of the kept
    /// blocks on their counts; subtrees outside `keep` are discarded.
    ///
    /// Returns the vertex of every merge item (kept blocks first, then one
    /// per merge) and the merges themselves.
    pub(crate) fn rebuild_top(
        &mut self,
        keep: &[(VertexId, u64)],
    ) -> (Vec<VertexId>, Vec<(usize, usize)>) {
        assert!(!keep.is_empty(), "at least one block must survive");
        let mut kept = vec![false; self.nodes.len()];
        for &(v, _) in keep {
            kept[v] = true;
        }
        // Free every reachable vertex that is not inside a kept subtree.
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            if kept[u] {
                continue;
            }
            if let Some((l, r)) = self.nodes[u].children {
                stack.push(l);
                stack.push(r);
            }
            self.nodes[u] = Node {
                parent: None,
                children: None,
                class: None,
            };
            self.free.push(u);
        }
        for &(v, _) in keep {
            self.nodes[v].parent = None;
        }

        let items: Vec<MergeItem> = keep
            .iter()
            .map(|&(v, count)| match self.nodes[v].class {
                Some(c) => MergeItem {
                    value: count,
                    is_leaf: true,
                    key: c,
                },
                None => MergeItem {
                    value: count,
                    is_leaf: false,
                    key: v,
                },
            })
            .collect();
        let merges = crate::coding::merge_items(&items);
        let mut handles: Vec<VertexId> = keep.iter().map(|&(v, _)| v).collect();
        for &(a, b) in &merges {
            let v = self.join(handles[a], handles[b]);
            handles.push(v);
        }
        self.root = *handles.last().expect("non-empty");
        self.nodes[self.root].parent = None;
        (handles, merges)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Member classes, ascending.
    pub classes: Vec<usize>,
    pub count: u64,
    pub vertex: VertexId,
    pub depth: usize,
}

/// Disjoint blocks covering the live classes, with their counts over `n`
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub blocks: Vec<Block>,
    pub n: u64,
}

impl Partition {
    /// Builds a partition from explicit blocks and per-class counts; vertex
    /// ids and depths are left at zero.
    pub fn from_classes(blocks: &[Vec<usize>], counts: &[u64]) -> Self {
        let blocks: Vec<Block> = blocks
            .iter()
            .map(|b| {
                let mut classes = b.clone();
                classes.sort_unstable();
                Block {
                    count: classes.iter().map(|&c| counts[c]).sum(),
                    classes,
                    vertex: 0,
                    depth: 0,
                }
            })
            .collect();
        let n = blocks.iter().map(|b| b.count).sum();
        Self { blocks, n }
    }

    /// Block containing `class`.
    pub fn block_of(&self, class: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.classes.binary_search(&class).is_ok())
    }
}

/// η-admissibility over `n` samples.
///
/// (a) every block of maximal count is a singleton; (b) every block of mass
/// at least `eta` is a singleton; (c) at most one block has mass below
/// `eta/2`. For `eta ≤ 0` only (a) is checked.
pub fn is_admissible(partition: &Partition, n: u64, eta: f64) -> bool {
    let Some(max) = partition.blocks.iter().map(|b| b.count).max() else {
        return false;
    };
    let singleton_at_max = partition
        .blocks
        .iter()
        .filter(|b| b.count == max)
        .all(|b| b.classes.len() == 1);
    if !singleton_at_max {
        return false;
    }
    if eta <= 0.0 {
        return true;
    }
    let level = eta * n as f64;
    let heavy_ok = partition
        .blocks
        .iter()
        .filter(|b| b.count as f64 >= level)
        .all(|b| b.classes.len() == 1);
    let light = partition
        .blocks
        .iter()
        .filter(|b| (b.count as f64) < level / 2.0)
        .count();
    heavy_ok && light <= 1
}

/// Result of one batch rebalancing pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceOutcome {
    pub partition: Partition,
    pub mode: usize,
    /// `γ·N(ŷ)/n − ε`.
    pub eta: f64,
    pub queries: u64,
    /// False when the query budget ran out mid-pass; the tree is then left
    /// unchanged.
    pub completed: bool,
}

struct Entry {
    count: u64,
    is_leaf: bool,
    key: usize,
    vertex: VertexId,
    samples: Vec<usize>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // Max-heap: larger count first, nodes before leaves, then lower key.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| self.is_leaf.cmp(&other.is_leaf).reverse())
            .then_with(|| other.key.cmp(&self.key))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Splits the heaviest blocks of `tree` on the given samples until every
/// remaining non-singleton block is lighter than `γ·N(ŷ) − ε·n`, then
/// rebuilds the top of the tree with Huffman's scheme.
///
/// `ŷ` is the first leaf to reach the top of the heap. Splitting a block
/// costs one query per sample in it. The returned partition is the set of
/// blocks alive when the two lightest first sum to at least `η·n`.
pub(crate) fn rebalance(
    asker: &mut Asker<'_>,
    tree: &mut SearchTree,
    samples: &[usize],
    gamma: f64,
    eps: f64,
) -> Result<RebalanceOutcome, EstimatorError> {
    assert!(!samples.is_empty(), "rebalancing needs samples");
    let n = samples.len() as u64;
    let start = asker.issued();
    let mut set = ClassSet::new(tree.m);
    let entry = |tree: &SearchTree, v: VertexId, samples: Vec<usize>| {
        let class = tree.class_of(v);
        Entry {
            count: samples.len() as u64,
            is_leaf: class.is_some(),
            key: class.unwrap_or(v),
            vertex: v,
            samples,
        }
    };

    let mut heap = BinaryHeap::new();
    heap.push(entry(tree, tree.root, samples.to_vec()));
    let mut done: Vec<Entry> = Vec::new();
    let mut mode = None;
    let mut eta = f64::NEG_INFINITY;
    while let Some(top) = heap.peek() {
        if mode.is_some() && (top.count as f64) < eta * n as f64 {
            break;
        }
        let e = heap.pop().expect("peeked");
        if e.is_leaf {
            if mode.is_none() {
                mode = Some(e.key);
                eta = gamma * e.count as f64 / n as f64 - eps;
            }
            done.push(e);
            continue;
        }
        let (l, r) = tree.children(e.vertex).expect("node has children");
        tree.classes_under(r, &mut set);
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &j in &e.samples {
            match budget_hit(asker.ask(j, &set))? {
                Some(true) => right.push(j),
                Some(false) => left.push(j),
                None => {
                    return Ok(RebalanceOutcome {
                        partition: Partition {
                            blocks: Vec::new(),
                            n,
                        },
                        mode: mode.unwrap_or(0),
                        eta,
                        queries: asker.issued() - start,
                        completed: false,
                    })
                }
            }
        }
        heap.push(entry(tree, l, left));
        heap.push(entry(tree, r, right));
    }
    let mode = mode.expect("a leaf always reaches the top of the heap");

    done.extend(heap.into_vec());
    let keep: Vec<(VertexId, u64)> = done.iter().map(|e| (e.vertex, e.count)).collect();
    let (handles, merges) = tree.rebuild_top(&keep);

    // Blocks alive just before the first merge reaching η·n.
    let level = eta * n as f64;
    let mut counts: Vec<u64> = keep.iter().map(|&(_, c)| c).collect();
    let mut alive = vec![true; keep.len() + merges.len()];
    for (k, &(a, b)) in merges.iter().enumerate() {
        if (counts[a] + counts[b]) as f64 >= level {
            alive.truncate(keep.len() + k);
            break;
        }
        alive[a] = false;
        alive[b] = false;
        counts.push(counts[a] + counts[b]);
    }
    let blocks = alive
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(i, _)| Block {
            classes: tree.class_list(handles[i]),
            count: counts[i],
            vertex: handles[i],
            depth: tree.depth(handles[i]),
        })
        .collect();

    Ok(RebalanceOutcome {
        partition: Partition { blocks, n },
        mode,
        eta,
        queries: asker.issued() - start,
        completed: true,
    })
}

/// Public entry point for one rebalancing pass over `samples`, which are
/// assumed to lie in the tree's classes.
pub fn batch_tree_rebalance(
    oracle: &mut crate::oracle::QueryOracle,
    tree: &mut SearchTree,
    samples: &[usize],
    gamma: f64,
    eps: f64,
) -> Result<RebalanceOutcome, EstimatorError> {
    if !(gamma > 0.0 && gamma <= 1.0) || !(eps >= 0.0) {
        return Err(EstimatorError::InvalidParameter(format!(
            "need gamma in (0,1] and eps >= 0, got {gamma}, {eps}"
        )));
    }
    if samples.is_empty() {
        return Err(EstimatorError::NoData);
    }
    let mut asker = Asker::new(oracle);
    rebalance(&mut asker, tree, samples, gamma, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::QueryOracle;

    fn replay(m: usize, counts: &[usize]) -> (QueryOracle, Vec<usize>) {
        let samples: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
            .collect();
        let idx = (0..samples.len()).collect();
        (QueryOracle::replay(m, samples).unwrap(), idx)
    }

    #[test]
    fn worked_counts_give_admissible_partition() {
        let (mut o, idx) = replay(4, &[5, 3, 1, 1]);
        let mut t = SearchTree::balanced(&[0, 1, 2, 3], 4);
        let out = batch_tree_rebalance(&mut o, &mut t, &idx, 1.0, 0.0).unwrap();
        assert_eq!(out.mode, 0);
        assert!((out.eta - 0.5).abs() < 1e-12);
        assert!(is_admissible(&out.partition, 10, out.eta));
        assert_eq!(out.queries, o.query_count());
        let mut classes: Vec<usize> =
            out.partition.blocks.iter().flat_map(|b| b.classes.clone()).collect();
        classes.sort_unstable();
        assert_eq!(classes, vec![0, 1, 2, 3]);
        assert_eq!(out.partition.block_of(0).unwrap().classes, vec![0]);
    }

    #[test]
    fn single_class_costs_nothing() {
        let (mut o, idx) = replay(3, &[0, 4]);
        let mut t = SearchTree::balanced(&[1], 3);
        let out = batch_tree_rebalance(&mut o, &mut t, &idx, 1.0, 0.0).unwrap();
        assert_eq!(out.mode, 1);
        assert_eq!(out.queries, 0);
        assert_eq!(out.partition.blocks.len(), 1);
    }

    #[test]
    fn large_slack_splits_everything() {
        let (mut o, idx) = replay(4, &[5, 3, 1, 1]);
        let mut t = SearchTree::balanced(&[0, 1, 2, 3], 4);
        let out = batch_tree_rebalance(&mut o, &mut t, &idx, 1.0, 1.0).unwrap();
        assert!(out.eta <= 0.0);
        assert_eq!(out.partition.blocks.len(), 4);
        assert!(is_admissible(&out.partition, 10, out.eta));
    }

    #[test]
    fn rebuilt_top_is_huffman_on_blocks() {
        let (mut o, idx) = replay(4, &[12, 2, 1, 1]);
        let mut t = SearchTree::balanced(&[0, 1, 2, 3], 4);
        batch_tree_rebalance(&mut o, &mut t, &idx, 1.0, 0.0).unwrap();
        let root = t.root();
        let (l, r) = t.children(root).unwrap();
        // The heavy class ends up alone on one side of the root.
        let sides = [t.class_list(l), t.class_list(r)];
        assert!(sides.contains(&vec![0]));
    }

    #[test]
    fn admissibility_examples() {
        let masses = [50, 30, 20, 0];
        let p = Partition::from_classes(&[vec![0], vec![1], vec![2, 3]], &masses);
        assert!(is_admissible(&p, 100, 0.5));
        let p = Partition::from_classes(&[vec![0, 1], vec![2, 3]], &[40, 40, 10, 10]);
        assert!(!is_admissible(&p, 100, 0.5));
        let p = Partition::from_classes(&[vec![0], vec![1], vec![2], vec![3]], &[40, 30, 20, 10]);
        assert!(!is_admissible(&p, 100, 0.45));
        // Tied singletons at the maximum are fine; a tied pooled block is not.
        let p = Partition::from_classes(&[vec![0], vec![1]], &[5, 5]);
        assert!(is_admissible(&p, 10, 0.5));
        let p = Partition::from_classes(&[vec![0], vec![1, 2]], &[5, 3, 2]);
        assert!(!is_admissible(&p, 10, -0.1));
    }
}
