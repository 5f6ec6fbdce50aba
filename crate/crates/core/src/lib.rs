//! Explainable k-medians under `l_p` norms with randomized threshold trees.
//!
//! A threshold tree splits space with axis-aligned cuts until every leaf holds
//! exactly one center; a point is assigned to the center of the leaf it
//! reaches. [`static_builder`] builds such trees from a fixed center set,
//! [`dynamic_tree`] maintains one under center insertions and deletions with
//! bounded recourse, and [`harness`] holds the generators, reference
//! clusterings and experiments used to evaluate both.

pub mod cli;
pub mod cost;
pub mod cut_stream;
pub mod dynamic_tree;
pub mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod static_builder;
pub mod validate;

pub use cost::{cost_tree, cost_unconstrained, lp_distance};
pub use cut_stream::{CutEvent, EarliestCutIndex, Normalizer};
pub use dynamic_tree::{DynamicConfig, DynamicTree, Request, RequestStats};
pub use error::{Error, Result};
pub use model::{CenterId, CenterSet, Cut, Instance, Point, Sign, ThresholdTree, TreeNode};
pub use rng::RngHandle;
pub use static_builder::{build_tree_static, get_anchor, partition_leaf_static};
pub use validate::{validate_tree, ValidationReport};
