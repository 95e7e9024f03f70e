use std::fmt;
use std::str::FromStr;

use super::CodingError;
use crate::oracle::ClassSet;

pub type VertexId = usize;

#[derive(Debug, Clone)]
struct Vertex {
    parent: Option<VertexId>,
    children: Option<(VertexId, VertexId)>,
    value: u64,
    class: Option<usize>,
}

/// Root-to-vertex path: `false` is a left step (`0`), `true` a right step (`1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VertexCode {
    bits: Vec<bool>,
}

impl VertexCode {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl fmt::Display for VertexCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for VertexCode {
    type Err = CodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(CodingError::BadCode(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(VertexCode::new)
    }
}

/// Number of leaves in the left subtree of a left-complete tree with `k`
/// leaves.
pub fn balanced_split(k: usize) -> usize {
    assert!(k >= 2, "split needs at least two leaves");
    let p = 1usize << (usize::BITS - 1 - k.leading_zeros());
    if k == p {
        k / 2
    } else {
        p / 2 + (k - p).min(p / 2)
    }
}

/// Binary prefix-code tree with integer vertex values.
///
/// Besides the links, the tree keeps an explicit numbering of its vertices
/// (`order`) in which values never decrease, leaves precede internal
/// vertices of equal value, and siblings are adjacent. Vertices strictly
/// inside the not-yet-observed subtree are not numbered.
#[derive(Debug, Clone)]
pub struct CodeTree {
    vertices: Vec<Vertex>,
    free: Vec<VertexId>,
    root: VertexId,
    leaf_of_class: Vec<Option<VertexId>>,
    observed: Vec<bool>,
    nyt: Option<VertexId>,
    order: Vec<VertexId>,
    rank: Vec<usize>,
}

const UNRANKED: usize = usize::MAX;

/// Position a vertex hangs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Slot {
    Root,
    Left(VertexId),
    Right(VertexId),
}

impl CodeTree {
    pub(super) fn empty(num_classes: usize) -> Self {
        Self {
            vertices: Vec::new(),
            free: Vec::new(),
            root: 0,
            leaf_of_class: vec![None; num_classes],
            observed: vec![false; num_classes],
            nyt: None,
            order: Vec::new(),
            rank: Vec::new(),
        }
    }

    fn alloc(&mut self, v: Vertex) -> VertexId {
        if let Some(id) = self.free.pop() {
            self.vertices[id] = v;
            self.rank[id] = UNRANKED;
            id
        } else {
            self.vertices.push(v);
            self.rank.push(UNRANKED);
            self.vertices.len() - 1
        }
    }

    pub(super) fn alloc_leaf(&mut self, class: usize, value: u64) -> VertexId {
        let id = self.alloc(Vertex {
            parent: None,
            children: None,
            value,
            class: Some(class),
        });
        if class >= self.leaf_of_class.len() {
            self.leaf_of_class.resize(class + 1, None);
            self.observed.resize(class + 1, false);
        }
        self.leaf_of_class[class] = Some(id);
        id
    }

    pub(super) fn alloc_internal(&mut self, left: VertexId, right: VertexId) -> VertexId {
        let value = self.vertices[left].value + self.vertices[right].value;
        let id = self.alloc(Vertex {
            parent: None,
            children: Some((left, right)),
            value,
            class: None,
        });
        self.vertices[left].parent = Some(id);
        self.vertices[right].parent = Some(id);
        id
    }

    pub(super) fn set_observed(&mut self, class: usize, yes: bool) {
        self.observed[class] = yes;
    }

    pub(super) fn set_root(&mut self, root: VertexId) {
        self.root = root;
        self.vertices[root].parent = None;
    }

    pub(super) fn set_order(&mut self, order: Vec<VertexId>) {
        for (i, &v) in order.iter().enumerate() {
            self.rank[v] = i;
        }
        self.order = order;
    }

    /// Builds a left-complete zero-valued subtree over `classes` (sorted) and
    /// marks its root as the not-yet-observed vertex.
    pub(super) fn build_nyt(&mut self, classes: &[usize]) -> VertexId {
        let v = self.build_complete(classes);
        self.nyt = Some(v);
        v
    }

    fn build_complete(&mut self, classes: &[usize]) -> VertexId {
        if classes.len() == 1 {
            return self.alloc_leaf(classes[0], 0);
        }
        let split = balanced_split(classes.len());
        let left = self.build_complete(&classes[..split]);
        let right = self.build_complete(&classes[split..]);
        self.alloc_internal(left, right)
    }

    pub(super) fn release_subtree(&mut self, v: VertexId) {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if let Some((l, r)) = self.vertices[u].children {
                stack.push(l);
                stack.push(r);
            }
            if let Some(c) = self.vertices[u].class {
                if self.leaf_of_class[c] == Some(u) {
                    self.leaf_of_class[c] = None;
                }
            }
            self.vertices[u] = Vertex {
                parent: None,
                children: None,
                value: 0,
                class: None,
            };
            self.rank[u] = UNRANKED;
            self.free.push(u);
        }
    }

    pub(super) fn slot_of(&self, v: VertexId) -> Slot {
        match self.vertices[v].parent {
            None => Slot::Root,
            Some(p) => {
                let (l, _) = self.vertices[p].children.expect("parent has children");
                if l == v {
                    Slot::Left(p)
                } else {
                    Slot::Right(p)
                }
            }
        }
    }

    pub(super) fn place(&mut self, v: VertexId, slot: Slot) {
        match slot {
            Slot::Root => {
                self.root = v;
                self.vertices[v].parent = None;
            }
            Slot::Left(p) => {
                let c = self.vertices[p].children.as_mut().expect("parent has children");
                c.0 = v;
                self.vertices[v].parent = Some(p);
            }
            Slot::Right(p) => {
                let c = self.vertices[p].children.as_mut().expect("parent has children");
                c.1 = v;
                self.vertices[v].parent = Some(p);
            }
        }
    }

    /// Builds a tree from explicit leaf codes, which must form a complete
    /// prefix code. The result need not be a Huffman tree, so incremental
    /// updates on it carry no optimality guarantee.
    pub fn from_leaf_codes(leaves: &[(usize, u64, VertexCode)]) -> Result<Self, CodingError> {
        if leaves.is_empty() {
            return Err(CodingError::EmptyInput);
        }
        let max_class = leaves.iter().map(|l| l.0).max().expect("non-empty");
        let mut t = CodeTree::empty(max_class + 1);
        let root = t.alloc(Vertex {
            parent: None,
            children: None,
            value: 0,
            class: None,
        });
        t.root = root;
        let bad = |code: &VertexCode| CodingError::BadCode(code.to_string());
        for (class, count, code) in leaves {
            if t.leaf(*class).is_some() {
                return Err(CodingError::DuplicateClass { class: *class });
            }
            let mut v = root;
            for &bit in code.bits() {
                if t.vertices[v].class.is_some() {
                    return Err(bad(code));
                }
                let (l, r) = match t.vertices[v].children {
                    Some(c) => c,
                    None => {
                        let blank = Vertex {
                            parent: Some(v),
                            children: None,
                            value: 0,
                            class: None,
                        };
                        let l = t.alloc(blank.clone());
                        let r = t.alloc(blank);
                        t.vertices[v].children = Some((l, r));
                        (l, r)
                    }
                };
                v = if bit { r } else { l };
            }
            if t.vertices[v].children.is_some() || t.vertices[v].class.is_some() {
                return Err(bad(code));
            }
            t.vertices[v].class = Some(*class);
            t.vertices[v].value = *count;
            t.leaf_of_class[*class] = Some(v);
            t.observed[*class] = *count > 0;
        }
        // Every vertex must be a labelled leaf or have two children; fill
        // internal values bottom-up.
        let mut post = Vec::new();
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            post.push(v);
            if let Some((l, r)) = t.vertices[v].children {
                stack.push(l);
                stack.push(r);
            }
        }
        for &v in post.iter().rev() {
            match t.vertices[v].children {
                Some((l, r)) => t.vertices[v].value = t.vertices[l].value + t.vertices[r].value,
                None if t.vertices[v].class.is_none() => {
                    return Err(CodingError::BadCode(t.code_of_vertex(v).to_string()))
                }
                None => {}
            }
        }
        t.order = post;
        let level = t.level_order();
        t.set_order(level);
        Ok(t)
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.vertices[v].parent
    }

    pub fn children(&self, v: VertexId) -> Option<(VertexId, VertexId)> {
        self.vertices[v].children
    }

    pub fn value(&self, v: VertexId) -> u64 {
        self.vertices[v].value
    }

    pub(super) fn value_mut(&mut self, v: VertexId) -> &mut u64 {
        &mut self.vertices[v].value
    }

    /// Class carried by `v` when it is a leaf.
    pub fn class_of(&self, v: VertexId) -> Option<usize> {
        self.vertices[v].class
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.vertices[v].children.is_none()
    }

    /// Leaf carrying `class`, observed or not.
    pub fn leaf(&self, class: usize) -> Option<VertexId> {
        self.leaf_of_class.get(class).copied().flatten()
    }

    /// Root of the not-yet-observed subtree, if any class is unobserved.
    pub fn nyt(&self) -> Option<VertexId> {
        self.nyt
    }

    pub(super) fn set_nyt(&mut self, v: Option<VertexId>) {
        self.nyt = v;
    }

    pub fn is_observed(&self, class: usize) -> bool {
        self.observed.get(class).copied().unwrap_or(false)
    }

    /// Classes still under the not-yet-observed vertex, ascending.
    pub fn unobserved_classes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(n) = self.nyt {
            self.leaves_under(n, &mut |c| out.push(c));
        }
        out.sort_unstable();
        out
    }

    /// Observed classes with their counts, ascending by class.
    pub fn observed_counts(&self) -> Vec<(usize, u64)> {
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(c, _)| (c, self.vertices[self.leaf(c).expect("observed leaf")].value))
            .collect()
    }

    /// Number of classes with a leaf.
    pub fn num_leaves(&self) -> usize {
        self.leaf_of_class.iter().filter(|l| l.is_some()).count()
    }

    pub fn depth(&self, v: VertexId) -> usize {
        let mut d = 0;
        let mut u = v;
        while let Some(p) = self.vertices[u].parent {
            d += 1;
            u = p;
        }
        d
    }

    pub fn code_of_vertex(&self, v: VertexId) -> VertexCode {
        let mut bits = Vec::new();
        let mut u = v;
        while let Some(p) = self.vertices[u].parent {
            let (_, r) = self.vertices[p].children.expect("parent has children");
            bits.push(r == u);
            u = p;
        }
        bits.reverse();
        VertexCode::new(bits)
    }

    pub fn code_of(&self, class: usize) -> Result<VertexCode, CodingError> {
        self.leaf(class)
            .map(|v| self.code_of_vertex(v))
            .ok_or(CodingError::UnknownClass { class })
    }

    /// Vertex reached by following `code` from the root.
    pub fn vertex_at(&self, code: &VertexCode) -> Option<VertexId> {
        let mut v = self.root;
        for &b in code.bits() {
            let (l, r) = self.vertices[v].children?;
            v = if b { r } else { l };
        }
        Some(v)
    }

    /// Class of the leaf reached by `code`, if `code` ends at a leaf.
    pub fn decode(&self, code: &VertexCode) -> Option<usize> {
        self.vertex_at(code).and_then(|v| self.vertices[v].class)
    }

    pub(super) fn leaves_under(&self, v: VertexId, f: &mut impl FnMut(usize)) {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            match self.vertices[u].children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => f(self.vertices[u].class.expect("leaf has class")),
            }
        }
    }

    /// Writes the classes under `v` into `set`, clearing it first.
    pub fn classes_under(&self, v: VertexId, set: &mut ClassSet) {
        set.clear();
        self.leaves_under(v, &mut |c| set.insert(c));
    }

    /// Sum over observed leaves of count × depth.
    pub fn weighted_depth(&self) -> u128 {
        self.observed_counts()
            .into_iter()
            .map(|(c, n)| n as u128 * self.depth(self.leaf(c).expect("leaf")) as u128)
            .sum()
    }

    /// Explicit numbering, lightest first.
    pub fn order(&self) -> &[VertexId] {
        &self.order
    }

    pub(super) fn order_mut(&mut self) -> (&mut Vec<VertexId>, &mut Vec<usize>) {
        (&mut self.order, &mut self.rank)
    }

    pub(super) fn rank(&self, v: VertexId) -> usize {
        self.rank[v]
    }

    /// Ordering key: value, then leaves (and the not-yet-observed vertex)
    /// before internal vertices.
    pub(super) fn key(&self, v: VertexId) -> (u64, bool) {
        let internal = self.vertices[v].children.is_some() && Some(v) != self.nyt;
        (self.vertices[v].value, internal)
    }

    /// Numbered vertices sorted deepest first, then by code.
    pub fn level_order(&self) -> Vec<VertexId> {
        let mut vs: Vec<(usize, VertexCode, VertexId)> = self
            .order
            .iter()
            .map(|&v| (self.depth(v), self.code_of_vertex(v), v))
            .collect();
        vs.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        vs.into_iter().map(|(_, _, v)| v).collect()
    }

    /// True when the level order never places a strictly heavier vertex
    /// (value, then internal after leaf) before a lighter one.
    pub fn is_order_compatible(&self) -> bool {
        let lv = self.level_order();
        lv.windows(2).all(|w| self.key(w[0]) <= self.key(w[1]))
    }

    /// Checks that every vertex with positive value sits at depth at most
    /// `c · ⌈log₂(root / value)⌉`.
    pub fn check_balanced(&self, c: f64) -> Result<bool, CodingError> {
        let total = self.vertices[self.root].value;
        if total == 0 {
            return Err(CodingError::ZeroRootValue);
        }
        let mut stack = vec![(self.root, 0usize)];
        while let Some((v, d)) = stack.pop() {
            let val = self.vertices[v].value;
            if val > 0 {
                let bound = c * ceil_log2_ratio(total, val) as f64;
                if d as f64 > bound {
                    return Ok(false);
                }
            }
            if let Some((l, r)) = self.vertices[v].children {
                stack.push((l, d + 1));
                stack.push((r, d + 1));
            }
        }
        Ok(true)
    }

    /// Verifies links, sums, leaf index and the numbering. Returns a
    /// description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = 0usize;
        let mut stack = vec![self.root];
        if self.vertices[self.root].parent.is_some() {
            return Err("root has a parent".into());
        }
        while let Some(v) = stack.pop() {
            seen += 1;
            let vx = &self.vertices[v];
            match vx.children {
                Some((l, r)) => {
                    if vx.class.is_some() {
                        return Err(format!("internal vertex {v} carries a class"));
                    }
                    for c in [l, r] {
                        if self.vertices[c].parent != Some(v) {
                            return Err(format!("child {c} of {v} has wrong parent"));
                        }
                    }
                    let sum = self.vertices[l].value + self.vertices[r].value;
                    if sum != vx.value {
                        return Err(format!("vertex {v} value {} != {sum}", vx.value));
                    }
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    let c = vx.class.ok_or_else(|| format!("leaf {v} has no class"))?;
                    if self.leaf_of_class.get(c).copied().flatten() != Some(v) {
                        return Err(format!("leaf index for class {c} is stale"));
                    }
                }
            }
        }
        if seen + self.free.len() != self.vertices.len() {
            return Err("unreachable vertices outside the free list".into());
        }
        if let Some(n) = self.nyt {
            if self.vertices[n].value != 0 {
                return Err("not-yet-observed vertex has positive value".into());
            }
            let mut bad = None;
            self.leaves_under(n, &mut |c| {
                if self.observed[c] {
                    bad = Some(c);
                }
            });
            if let Some(c) = bad {
                return Err(format!("observed class {c} under the unobserved vertex"));
            }
        }
        for (c, &o) in self.observed.iter().enumerate() {
            if o {
                let leaf = self.leaf(c).ok_or_else(|| format!("observed {c} has no leaf"))?;
                if self.vertices[leaf].value == 0 {
                    return Err(format!("observed class {c} has zero count"));
                }
            }
        }
        // Numbering: covers exactly the vertices outside the unobserved
        // subtree, keys nondecrease, siblings adjacent.
        let mut numbered = 0usize;
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            numbered += 1;
            if self.order.get(self.rank[v]) != Some(&v) {
                return Err(format!("vertex {v} missing from the numbering"));
            }
            if Some(v) == self.nyt {
                continue;
            }
            if let Some((l, r)) = self.vertices[v].children {
                if self.rank[r] != self.rank[l] + 1 {
                    return Err(format!("children of {v} are not adjacent"));
                }
                stack.push(l);
                stack.push(r);
            }
        }
        if numbered != self.order.len() {
            return Err("numbering has extra entries".into());
        }
        for w in self.order.windows(2) {
            if self.key(w[0]) > self.key(w[1]) {
                return Err(format!("numbering decreases at {} -> {}", w[0], w[1]));
            }
        }
        Ok(())
    }

    /// Indented pre-order listing, left child first.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(self.root, 0usize)];
        while let Some((v, d)) = stack.pop() {
            let code = self.code_of_vertex(v);
            let code = if code.is_empty() { "-".to_string() } else { code.to_string() };
            for _ in 0..d {
                out.push_str("  ");
            }
            if Some(v) == self.nyt {
                let mut classes = Vec::new();
                self.leaves_under(v, &mut |c| classes.push(c.to_string()));
                out.push_str(&format!("nyt {code} {{{}}}\n", classes.join(",")));
                continue;
            }
            match (self.vertices[v].children, self.vertices[v].class) {
                (Some((l, r)), _) => {
                    out.push_str(&format!("node {code} {}\n", self.vertices[v].value));
                    stack.push((r, d + 1));
                    stack.push((l, d + 1));
                }
                (None, Some(c)) => {
                    out.push_str(&format!("leaf {code} {} y{c}\n", self.vertices[v].value));
                }
                (None, None) => unreachable!("leaf without class"),
            }
        }
        out
    }
}

/// Smallest `k ≥ 0` with `value · 2^k ≥ total`.
fn ceil_log2_ratio(total: u64, value: u64) -> u32 {
    let mut k = 0;
    let mut v = value as u128;
    while v < total as u128 {
        v <<= 1;
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> CodeTree {
        CodeTree::huffman(vec![(0, 69), (1, 14), (2, 8), (3, 6), (4, 3)]).unwrap()
    }

    #[test]
    fn worked_example_codes() {
        let t = worked_example();
        let codes: Vec<String> = (0..5).map(|c| t.code_of(c).unwrap().to_string()).collect();
        assert_eq!(codes, ["1", "00", "010", "0111", "0110"]);
        t.check_invariants().unwrap();
        assert!(t.is_order_compatible());
        assert_eq!(t.level_order(), t.order());
    }

    #[test]
    fn decode_inverts_code() {
        let t = worked_example();
        for c in 0..5 {
            assert_eq!(t.decode(&t.code_of(c).unwrap()), Some(c));
        }
        assert_eq!(t.decode(&"01".parse().unwrap()), None);
        assert_eq!(t.vertex_at(&"11".parse().unwrap()), None);
        assert!("012".parse::<VertexCode>().is_err());
    }

    #[test]
    fn render_is_stable() {
        let expected = "\
node - 100
  node 0 31
    leaf 00 14 y1
    node 01 17
      leaf 010 8 y2
      node 011 9
        leaf 0110 3 y4
        leaf 0111 6 y3
  leaf 1 69 y0
";
        assert_eq!(worked_example().render(), expected);
    }

    #[test]
    fn split_is_left_complete() {
        let table: Vec<usize> = (2..=9).map(balanced_split).collect();
        assert_eq!(table, [1, 2, 2, 3, 4, 4, 4, 5]);
    }

    #[test]
    fn unobserved_tree_depths() {
        let t = CodeTree::unobserved(5).unwrap();
        let depths: Vec<usize> = (0..5).map(|c| t.depth(t.leaf(c).unwrap())).collect();
        assert_eq!(depths, [3, 3, 2, 2, 2]);
        assert_eq!(t.order(), &[t.nyt().unwrap()]);
        assert_eq!(t.unobserved_classes(), vec![0, 1, 2, 3, 4]);
        t.check_invariants().unwrap();
    }

    #[test]
    fn balance_check() {
        let t = worked_example();
        assert!(t.check_balanced(1.0).unwrap());
        assert_eq!(ceil_log2_ratio(100, 3), 6);
        assert_eq!(ceil_log2_ratio(100, 100), 0);
        assert_eq!(ceil_log2_ratio(8, 1), 3);
        // Leaf 3 sits at depth 4 against a ceiling of 6.
        assert!(!t.check_balanced(0.5).unwrap());
        let chain = CodeTree::huffman(vec![(0, 1), (1, 1), (2, 2), (3, 4), (4, 8), (5, 16)]).unwrap();
        assert!(chain.check_balanced(1.0).unwrap());
        let t = CodeTree::unobserved(4).unwrap();
        assert_eq!(t.check_balanced(1.0).unwrap_err(), CodingError::ZeroRootValue);
    }
}
