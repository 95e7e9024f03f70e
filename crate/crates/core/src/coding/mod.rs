//! Prefix-code trees used as adaptive search procedures.
//!
//! A [`CodeTree`] is an arena of vertices. Walking from the root, reading a
//! `1` moves to the right child and a `0` to the left child, so each leaf's
//! path is its code and its depth is the number of membership queries needed
//! to identify the class it carries.
//!
//! Trees are built with Huffman's scheme ([`CodeTree::huffman`]) and kept
//! Huffman-optimal under unit count increments with a block-sliding update
//! ([`CodeTree::vitter_increment`]). Classes that have never been observed
//! live under a single zero-count "not yet observed" vertex, kept as a
//! left-complete subtree.

mod huffman;
mod tree;
mod vitter;

pub use huffman::huffman_merge_order;
pub(crate) use huffman::{merge_items, MergeItem};
pub use tree::{balanced_split, CodeTree, VertexCode, VertexId};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodingError {
    #[error("no classes to build a tree from")]
    EmptyInput,
    #[error("class {class} has non-positive count")]
    NonPositiveCount { class: usize },
    #[error("class {class} appears more than once")]
    DuplicateClass { class: usize },
    #[error("class {class} has no leaf in this tree")]
    UnknownClass { class: usize },
    #[error("class {class} has already been observed")]
    AlreadyObserved { class: usize },
    #[error("class {class} is still under the not-yet-observed vertex")]
    NotYetObserved { class: usize },
    #[error("root value is zero; balance is undefined")]
    ZeroRootValue,
    #[error("malformed code string {0:?}")]
    BadCode(String),
}
