use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{CodeTree, CodingError};

/// An item entering a Huffman merge. `key` breaks residual ties: the class
/// index for leaves, the creation id for internal vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct MergeItem {
    pub value: u64,
    pub is_leaf: bool,
    pub key: usize,
}

impl Ord for MergeItem {
    // The node ordering: smaller value first; on equal value a leaf comes
    // before a node; then the lower key.
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .cmp(&other.value)
            .then_with(|| other.is_leaf.cmp(&self.is_leaf))
            .then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialOrd for MergeItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs Huffman's scheme over `items` and returns the merges in pop order.
///
/// Merge `k` creates item `items.len() + k` from `(left, right)`, where
/// `left` is the first (smallest) pop. New internal items get keys above
/// every key in `items`, so earlier merges win residual ties.
pub fn huffman_merge_order(values: &[(u64, bool, usize)]) -> Vec<(usize, usize)> {
    let items: Vec<MergeItem> = values
        .iter()
        .map(|&(value, is_leaf, key)| MergeItem { value, is_leaf, key })
        .collect();
    merge_items(&items)
}

pub(crate) fn merge_items(items: &[MergeItem]) -> Vec<(usize, usize)> {
    let mut next_key = items
        .iter()
        .filter(|it| !it.is_leaf)
        .map(|it| it.key + 1)
        .max()
        .unwrap_or(0);
    let mut heap: BinaryHeap<Reverse<(MergeItem, usize)>> = items
        .iter()
        .enumerate()
        .map(|(i, &it)| Reverse((it, i)))
        .collect();
    let mut merges = Vec::with_capacity(items.len().saturating_sub(1));
    let mut next_index = items.len();
    while heap.len() > 1 {
        let Reverse((a, ia)) = heap.pop().expect("len > 1");
        let Reverse((b, ib)) = heap.pop().expect("len > 1");
        merges.push((ia, ib));
        let parent = MergeItem {
            value: a.value + b.value,
            is_leaf: false,
            key: next_key,
        };
        next_key += 1;
        heap.push(Reverse((parent, next_index)));
        next_index += 1;
    }
    merges
}

impl CodeTree {
    /// Huffman tree over `(class, count)` pairs; every count must be positive.
    ///
    /// The two smallest vertices under the node ordering are merged, the
    /// first pop becoming the left child.
    pub fn huffman<I>(counts: I) -> Result<Self, CodingError>
    where
        I: IntoIterator<Item = (usize, u64)>,
    {
        let counts: Vec<(usize, u64)> = counts.into_iter().collect();
        if counts.is_empty() {
            return Err(CodingError::EmptyInput);
        }
        if let Some(&(class, _)) = counts.iter().find(|(_, c)| *c == 0) {
            return Err(CodingError::NonPositiveCount { class });
        }
        Self::from_observed(&counts, &[])
    }

    /// Huffman tree over observed `(class, count)` pairs plus a not-yet-observed
    /// vertex (value 0) holding `unobserved`. Either side may be empty, but
    /// not both.
    pub fn from_observed(
        observed: &[(usize, u64)],
        unobserved: &[usize],
    ) -> Result<Self, CodingError> {
        if observed.is_empty() && unobserved.is_empty() {
            return Err(CodingError::EmptyInput);
        }
        let max_class = observed
            .iter()
            .map(|&(c, _)| c)
            .chain(unobserved.iter().copied())
            .max()
            .expect("non-empty");
        let mut seen = vec![false; max_class + 1];
        for c in observed.iter().map(|&(c, _)| c).chain(unobserved.iter().copied()) {
            if std::mem::replace(&mut seen[c], true) {
                return Err(CodingError::DuplicateClass { class: c });
            }
        }
        if let Some(&(class, _)) = observed.iter().find(|(_, c)| *c == 0) {
            return Err(CodingError::NonPositiveCount { class });
        }

        let mut tree = CodeTree::empty(max_class + 1);
        // Heap items: observed leaves first, then the NYT vertex.
        let mut handles = Vec::with_capacity(observed.len() * 2 + 1);
        let mut items = Vec::with_capacity(observed.len() + 1);
        for &(class, count) in observed {
            let v = tree.alloc_leaf(class, count);
            tree.set_observed(class, true);
            handles.push(v);
            items.push(MergeItem {
                value: count,
                is_leaf: true,
                key: class,
            });
        }
        if !unobserved.is_empty() {
            let mut classes = unobserved.to_vec();
            classes.sort_unstable();
            let nyt = tree.build_nyt(&classes);
            handles.push(nyt);
            // The NYT vertex sorts as the lightest leaf.
            items.push(MergeItem {
                value: 0,
                is_leaf: true,
                key: 0,
            });
        }

        let merges = merge_items(&items);
        let mut order = Vec::with_capacity(handles.len() * 2);
        for &(a, b) in &merges {
            let (left, right) = (handles[a], handles[b]);
            order.push(left);
            order.push(right);
            let parent = tree.alloc_internal(left, right);
            handles.push(parent);
        }
        let root = *handles.last().expect("at least one vertex");
        order.push(root);
        tree.set_root(root);
        tree.set_order(order);
        Ok(tree)
    }

    /// A tree in which every class of `0..m` is still unobserved.
    pub fn unobserved(m: usize) -> Result<Self, CodingError> {
        let classes: Vec<usize> = (0..m).collect();
        Self::from_observed(&[], &classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_ordering_puts_leaves_first_on_ties() {
        let leaf = MergeItem { value: 5, is_leaf: true, key: 9 };
        let node = MergeItem { value: 5, is_leaf: false, key: 0 };
        assert!(leaf < node);
        let smaller = MergeItem { value: 4, is_leaf: false, key: 0 };
        assert!(smaller < leaf);
    }

    #[test]
    fn merge_order_on_worked_example() {
        // 69, 14, 8, 6, 3 → (3,6), (8,9), (14,17), (31,69)
        let merges = huffman_merge_order(&[
            (69, true, 0),
            (14, true, 1),
            (8, true, 2),
            (6, true, 3),
            (3, true, 4),
        ]);
        assert_eq!(merges, vec![(4, 3), (2, 5), (1, 6), (7, 0)]);
    }

    #[test]
    fn errors() {
        assert_eq!(CodeTree::huffman(Vec::new()).unwrap_err(), CodingError::EmptyInput);
        assert_eq!(
            CodeTree::huffman(vec![(0, 3), (1, 0)]).unwrap_err(),
            CodingError::NonPositiveCount { class: 1 }
        );
        assert_eq!(
            CodeTree::huffman(vec![(2, 3), (2, 1)]).unwrap_err(),
            CodingError::DuplicateClass { class: 2 }
        );
    }
}
