//! Structural checks for threshold trees.

use std::collections::HashMap;
use std::fmt;

use crate::model::{CenterId, CenterSet, Cut, ThresholdTree, TreeNode};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A center sits in a subtree on the wrong side of an ancestor cut.
    Side { path: String, center: CenterId, cut: Cut },
    DuplicateLeaf { path: String, center: CenterId },
    UnknownLeaf { path: String, center: CenterId },
    MissingCenter { center: CenterId },
    NodeCount { expected: usize, actual: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Side { path, center, cut } => write!(
                f,
                "side violation at '{path}': center {center} vs cut x[{}] < {}",
                cut.coordinate, cut.threshold
            ),
            Violation::DuplicateLeaf { path, center } => write!(f, "duplicate leaf at '{path}': center {center}"),
            Violation::UnknownLeaf { path, center } => write!(f, "unknown center {center} at '{path}'"),
            Violation::MissingCenter { center } => write!(f, "center {center} has no leaf"),
            Violation::NodeCount { expected, actual } => {
                write!(f, "node count {actual}, expected {expected}")
            }
        }
    }
}

/// Diagnostic report; an empty violation list means the tree is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks leaf/center bijection, node count `2k - 1`, and that every center
/// lies on the side of each ancestor cut that its path takes.
pub fn validate_tree(tree: &ThresholdTree, centers: &CenterSet) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashMap<CenterId, String> = HashMap::new();
    let mut ancestors: Vec<(Cut, bool)> = Vec::new();
    let mut path = String::new();
    walk(&tree.root, centers, &mut ancestors, &mut path, &mut seen, &mut report);

    for id in centers.ids() {
        if !seen.contains_key(&id) {
            report.violations.push(Violation::MissingCenter { center: id });
        }
    }
    let expected = 2 * centers.len().max(1) - 1;
    let actual = tree.node_count();
    if actual != expected {
        report.violations.push(Violation::NodeCount { expected, actual });
    }
    report
}

fn walk(
    node: &TreeNode,
    centers: &CenterSet,
    ancestors: &mut Vec<(Cut, bool)>,
    path: &mut String,
    seen: &mut HashMap<CenterId, String>,
    report: &mut ValidationReport,
) {
    match node {
        TreeNode::Leaf { leaf } => {
            if seen.contains_key(leaf) {
                report.violations.push(Violation::DuplicateLeaf {
                    path: path.clone(),
                    center: *leaf,
                });
                return;
            }
            seen.insert(*leaf, path.clone());
            let Some(c) = centers.get(*leaf) else {
                report.violations.push(Violation::UnknownLeaf {
                    path: path.clone(),
                    center: *leaf,
                });
                return;
            };
            for (depth, (cut, went_left)) in ancestors.iter().enumerate() {
                if cut.goes_left(c.coords()) != *went_left {
                    report.violations.push(Violation::Side {
                        path: path[..depth].to_string(),
                        center: *leaf,
                        cut: *cut,
                    });
                }
            }
        }
        TreeNode::Internal { cut, left, right } => {
            for (child, went_left, tag) in [(left, true, 'L'), (right, false, 'R')] {
                ancestors.push((*cut, went_left));
                path.push(tag);
                walk(child, centers, ancestors, path, seen, report);
                path.pop();
                ancestors.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sign;

    fn two_centers() -> CenterSet {
        CenterSet::from_coords(&[vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn detects_side_violation() {
        let tree = ThresholdTree::new(TreeNode::internal(
            Cut::new(0, 0.5, Sign::Plus),
            TreeNode::leaf(CenterId(1)),
            TreeNode::leaf(CenterId(0)),
        ));
        let report = validate_tree(&tree, &two_centers());
        assert_eq!(report.violations.len(), 2);
        assert!(report.violations.iter().all(|v| matches!(v, Violation::Side { .. })));
    }

    #[test]
    fn single_side_violation_entry() {
        let centers = CenterSet::from_coords(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        // center 1 (x=1) placed left of x < 0.5
        let tree = ThresholdTree::new(TreeNode::internal(
            Cut::new(0, 0.5, Sign::Plus),
            TreeNode::internal(Cut::new(0, 0.7, Sign::Plus), TreeNode::leaf(CenterId(0)), TreeNode::leaf(CenterId(1))),
            TreeNode::leaf(CenterId(2)),
        ));
        let report = validate_tree(&tree, &centers);
        assert_eq!(
            report.violations,
            vec![Violation::Side {
                path: String::new(),
                center: CenterId(1),
                cut: Cut::new(0, 0.5, Sign::Plus)
            }]
        );
    }

    #[test]
    fn detects_duplicate_leaf() {
        let tree = ThresholdTree::new(TreeNode::internal(
            Cut::new(0, 0.5, Sign::Plus),
            TreeNode::leaf(CenterId(0)),
            TreeNode::leaf(CenterId(0)),
        ));
        let report = validate_tree(&tree, &two_centers());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateLeaf { path, .. } if path == "R")));
        assert!(report.violations.contains(&Violation::MissingCenter { center: CenterId(1) }));
    }

    #[test]
    fn valid_tree_passes() {
        let tree = ThresholdTree::new(TreeNode::internal(
            Cut::new(0, 0.5, Sign::Minus),
            TreeNode::leaf(CenterId(0)),
            TreeNode::leaf(CenterId(1)),
        ));
        assert!(validate_tree(&tree, &two_centers()).is_valid());
    }
}
