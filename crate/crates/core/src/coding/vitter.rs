use super::tree::Slot;
use super::{CodeTree, CodingError, VertexId};

impl CodeTree {
    /// Records one more observation of `class`: inserts it if it is still
    /// unobserved, otherwise increments its count.
    pub fn observe(&mut self, class: usize) -> Result<(), CodingError> {
        if self.is_observed(class) {
            self.vitter_increment(class)
        } else {
            self.insert_new_symbol(class)
        }
    }

    /// Adds one to the count of an observed class and restores the numbering.
    pub fn vitter_increment(&mut self, class: usize) -> Result<(), CodingError> {
        let q = self.leaf(class).ok_or(CodingError::UnknownClass { class })?;
        if !self.is_observed(class) {
            return Err(CodingError::NotYetObserved { class });
        }
        self.increment_from(q);
        Ok(())
    }

    /// Moves `class` out of the not-yet-observed subtree with count one.
    ///
    /// The unobserved vertex is replaced by an internal vertex whose left
    /// child is a fresh left-complete subtree over the remaining unobserved
    /// classes and whose right child is the new leaf.
    pub fn insert_new_symbol(&mut self, class: usize) -> Result<(), CodingError> {
        if self.leaf(class).is_none() {
            return Err(CodingError::UnknownClass { class });
        }
        if self.is_observed(class) {
            return Err(CodingError::AlreadyObserved { class });
        }
        let nyt = self.nyt().expect("an unobserved class implies an unobserved vertex");
        let remaining: Vec<usize> = self
            .unobserved_classes()
            .into_iter()
            .filter(|&c| c != class)
            .collect();
        self.set_observed(class, true);
        if remaining.is_empty() {
            self.set_nyt(None);
            self.increment_from(nyt);
            return Ok(());
        }

        let slot = self.slot_of(nyt);
        let pos = self.rank(nyt);
        self.release_subtree(nyt);
        let new_nyt = self.build_nyt(&remaining);
        let leaf = self.alloc_leaf(class, 0);
        let internal = self.alloc_internal(new_nyt, leaf);
        self.place(internal, slot);

        let mut order = Vec::with_capacity(self.order().len() + 2);
        order.push(new_nyt);
        order.push(leaf);
        order.extend_from_slice(self.order());
        order[pos + 2] = internal;
        self.set_order(order);

        self.increment_from(leaf);
        Ok(())
    }

    fn increment_from(&mut self, leaf: VertexId) {
        let q = leaf;
        let leader = self.block_leader(q);
        if leader != q {
            self.swap_vertices(q, leader);
        }
        // A leaf next to the unobserved vertex has a parent of equal value;
        // the parent goes first so the leaf never overtakes it.
        let beside_nyt = match (self.nyt(), self.parent(q)) {
            (Some(n), Some(p)) => {
                let (l, r) = self.children(p).expect("parent has children");
                l == n || r == n
            }
            _ => false,
        };
        let mut cur = if beside_nyt { self.parent(q) } else { Some(q) };
        while let Some(v) = cur {
            cur = self.slide_and_increment(v);
        }
        if beside_nyt {
            self.slide_and_increment(q);
        }
    }

    fn block_leader(&self, v: VertexId) -> VertexId {
        let key = self.key(v);
        let order = self.order();
        let mut j = self.rank(v);
        while j + 1 < order.len() && self.key(order[j + 1]) == key {
            j += 1;
        }
        order[j]
    }

    fn swap_vertices(&mut self, a: VertexId, b: VertexId) {
        let (sa, sb) = (self.slot_of(a), self.slot_of(b));
        self.place(a, sb);
        self.place(b, sa);
        let (ra, rb) = (self.rank(a), self.rank(b));
        let (order, rank) = self.order_mut();
        order.swap(ra, rb);
        rank[a] = rb;
        rank[b] = ra;
    }

    /// Moves `v` past every later vertex lighter than its incremented key,
    /// increments it, and returns the vertex whose value must grow next.
    fn slide_and_increment(&mut self, v: VertexId) -> Option<VertexId> {
        let (wt, internal) = self.key(v);
        let new_key = (wt + 1, internal);
        let i = self.rank(v);
        let mut j = i;
        let mut lighter = 0;
        {
            let order = self.order();
            while j + 1 < order.len() && self.key(order[j + 1]) < new_key {
                j += 1;
                if self.value(order[j]) == wt {
                    lighter += 1;
                }
            }
        }
        if j > i {
            let moved: Vec<VertexId> = self.order()[i..=j].to_vec();
            debug_assert!(!moved.iter().any(|&u| Some(u) == self.parent(v)));
            let slots: Vec<Slot> = moved.iter().map(|&u| self.slot_of(u)).collect();
            for k in 0..moved.len() {
                let target = if k == 0 { slots[moved.len() - 1] } else { slots[k - 1] };
                self.place(moved[k], target);
            }
            let (order, rank) = self.order_mut();
            order[i..=j].rotate_left(1);
            for (pos, &u) in order.iter().enumerate().take(j + 1).skip(i) {
                rank[u] = pos;
            }
        }
        *self.value_mut(v) += 1;
        // Exactly one slot in the moved range now holds one more unit.
        let gained = self.order()[i + lighter];
        self.parent(gained)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rebuild_cost(t: &CodeTree) -> u128 {
        CodeTree::from_observed(&t.observed_counts(), &t.unobserved_classes())
            .unwrap()
            .weighted_depth()
    }

    fn check(t: &CodeTree) {
        t.check_invariants().unwrap();
        assert_eq!(t.weighted_depth(), rebuild_cost(t));
        assert!(t.is_order_compatible(), "{}", t.render());
    }

    #[test]
    fn increments_on_worked_example() {
        let mut t = CodeTree::huffman(vec![(0, 69), (1, 14), (2, 8), (3, 6), (4, 3)]).unwrap();
        for c in [4, 4, 4, 4, 3, 2, 4, 4, 1, 0] {
            t.vitter_increment(c).unwrap();
            check(&t);
        }
        assert_eq!(t.value(t.root()), 110);
    }

    #[test]
    fn inserts_from_empty() {
        let mut t = CodeTree::unobserved(6).unwrap();
        for c in [3, 3, 1, 5, 3, 0, 0, 2, 4, 1, 1, 1, 1] {
            t.observe(c).unwrap();
            check(&t);
        }
        assert!(t.nyt().is_none());
        assert_eq!(t.observed_counts(), vec![(0, 2), (1, 5), (2, 1), (3, 3), (4, 1), (5, 1)]);
    }

    #[test]
    fn single_class_tree() {
        let mut t = CodeTree::unobserved(1).unwrap();
        t.observe(0).unwrap();
        t.observe(0).unwrap();
        assert_eq!(t.value(t.root()), 2);
        t.check_invariants().unwrap();
    }

    #[test]
    fn error_cases() {
        let mut t = CodeTree::unobserved(3).unwrap();
        assert_eq!(t.vitter_increment(1), Err(CodingError::NotYetObserved { class: 1 }));
        t.insert_new_symbol(1).unwrap();
        assert_eq!(t.insert_new_symbol(1), Err(CodingError::AlreadyObserved { class: 1 }));
        assert_eq!(t.observe(7), Err(CodingError::UnknownClass { class: 7 }));
    }
}
