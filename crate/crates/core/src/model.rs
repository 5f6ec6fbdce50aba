//! Points, center sets, threshold cuts and threshold trees.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite point in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        // -0.0 and 0.0 must compare equal for duplicate detection.
        Ok(Self(coords.into_iter().map(|v| v + 0.0).collect()))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    fn key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Stable identifier of a center. Assigned monotonically, never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CenterId(pub u64);

impl fmt::Display for CenterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A set of distinct centers sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    dim: usize,
    centers: BTreeMap<CenterId, Point>,
    by_coords: HashMap<Vec<u64>, CenterId>,
    next_id: u64,
}

impl CenterSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            dim,
            centers: BTreeMap::new(),
            by_coords: HashMap::new(),
            next_id: 0,
        })
    }

    /// Builds a set from points, assigning ids `0..n` in order.
    pub fn from_points(points: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut iter = points.into_iter().peekable();
        let dim = iter.peek().map(Point::dim).ok_or(Error::EmptyCenters)?;
        let mut set = Self::new(dim)?;
        for p in iter {
            set.insert(p)?;
        }
        Ok(set)
    }

    pub fn from_coords(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_points(rows.iter().map(|r| Point::new(r.clone())).collect::<Result<Vec<_>>>()?)
    }

    /// Inserts a center under the next fresh id.
    pub fn insert(&mut self, point: Point) -> Result<CenterId> {
        let id = CenterId(self.next_id);
        self.insert_with_id(id, point)?;
        Ok(id)
    }

    /// Inserts a center under an explicit id. Later fresh ids stay above it.
    pub fn insert_with_id(&mut self, id: CenterId, point: Point) -> Result<()> {
        if point.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: point.dim(),
            });
        }
        let key = point.key();
        if let Some(&existing) = self.by_coords.get(&key) {
            return Err(Error::DuplicateCenter { existing });
        }
        if self.centers.contains_key(&id) {
            return Err(Error::Internal(format!("center id {id} already in use")));
        }
        self.by_coords.insert(key, id);
        self.centers.insert(id, point);
        self.next_id = self.next_id.max(id.0 + 1);
        Ok(())
    }

    pub fn remove(&mut self, id: CenterId) -> Result<Point> {
        let point = self.centers.remove(&id).ok_or(Error::UnknownCenter(id))?;
        self.by_coords.remove(&point.key());
        Ok(point)
    }

    pub fn get(&self, id: CenterId) -> Option<&Point> {
        self.centers.get(&id)
    }

    pub fn id_of(&self, point: &Point) -> Option<CenterId> {
        self.by_coords.get(&point.key()).copied()
    }

    pub fn contains(&self, id: CenterId) -> bool {
        self.centers.contains_key(&id)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn next_id(&self) -> CenterId {
        CenterId(self.next_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = CenterId> + '_ {
        self.centers.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CenterId, &Point)> {
        self.centers.iter().map(|(&id, p)| (id, p))
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.centers.values()
    }

    /// Sub-set restricted to `ids`, preserving ids.
    pub fn subset(&self, ids: &[CenterId]) -> Result<Self> {
        let mut out = Self::new(self.dim)?;
        for &id in ids {
            let p = self.get(id).ok_or(Error::UnknownCenter(id))?;
            out.insert_with_id(id, p.clone())?;
        }
        out.next_id = self.next_id;
        Ok(out)
    }
}

/// Direction of a cut relative to the anchor: `Plus` puts the anchor on the
/// left (`x_i < threshold`) side, `Minus` puts it on the right side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_i8(s: i8) -> Option<Self> {
        match s {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn to_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// Index in `{0, 1}` for per-sign arrays.
    pub fn slot(self) -> usize {
        match self {
            Sign::Minus => 0,
            Sign::Plus => 1,
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.to_i8())
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i8::deserialize(d)?;
        Sign::from_i8(v).ok_or_else(|| serde::de::Error::custom(format!("sign must be -1 or 1, got {v}")))
    }
}

/// An axis-aligned threshold cut `x_coord < threshold` (left) vs
/// `x_coord >= threshold` (right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    #[serde(rename = "coord")]
    pub coordinate: usize,
    pub threshold: f64,
    pub sign: Sign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

impl Cut {
    pub fn new(coordinate: usize, threshold: f64, sign: Sign) -> Self {
        Self {
            coordinate,
            threshold,
            sign,
            timestamp: None,
        }
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.coordinate] < self.threshold
    }

    /// True if `x` ends up on the opposite side from the anchor.
    #[inline]
    pub fn separates_from_anchor(&self, x: &[f64]) -> bool {
        match self.sign {
            Sign::Plus => !self.goes_left(x),
            Sign::Minus => self.goes_left(x),
        }
    }
}

/// A node of a threshold tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        cut: Cut,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        leaf: CenterId,
    },
}

impl TreeNode {
    pub fn leaf(id: CenterId) -> Self {
        TreeNode::Leaf { leaf: id }
    }

    pub fn internal(cut: Cut, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Internal {
            cut,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn collect_leaves(&self, out: &mut Vec<CenterId>) {
        match self {
            TreeNode::Leaf { leaf } => out.push(*leaf),
            TreeNode::Internal { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn shape_into(&self, out: &mut String) {
        match self {
            TreeNode::Leaf { leaf } => out.push_str(&leaf.to_string()),
            TreeNode::Internal { left, right, .. } => {
                out.push('(');
                left.shape_into(out);
                out.push(',');
                right.shape_into(out);
                out.push(')');
            }
        }
    }
}

/// Binary threshold tree whose leaves each hold one center id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdTree {
    pub root: TreeNode,
}

impl ThresholdTree {
    pub fn new(root: TreeNode) -> Self {
        Self { root }
    }

    pub fn single(id: CenterId) -> Self {
        Self::new(TreeNode::leaf(id))
    }

    /// Routes `x` from the root: left iff `x_i < threshold`.
    pub fn assign(&self, x: &[f64]) -> CenterId {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { leaf } => return *leaf,
                TreeNode::Internal { cut, left, right } => {
                    node = if cut.goes_left(x) { left } else { right };
                }
            }
        }
    }

    pub fn leaves(&self) -> Vec<CenterId> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Topology plus leaf labels, ignoring thresholds and timestamps.
    pub fn shape_key(&self) -> String {
        let mut s = String::new();
        self.root.shape_into(&mut s);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        de.disable_recursion_limit();
        let tree = Self::deserialize(&mut de)?;
        de.end()?;
        Ok(tree)
    }
}

/// A clustering instance: data points, reference centers and the norm exponent.
#[derive(Debug, Clone)]
pub struct Instance {
    pub points: Vec<Point>,
    pub centers: CenterSet,
    pub p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    p: f64,
    d: usize,
    points: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(points: Vec<Point>, centers: CenterSet, p: f64) -> Result<Self> {
        check_exponent(p)?;
        let d = centers.dim();
        if let Some(bad) = points.iter().find(|x| x.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        Ok(Self { points, centers, p })
    }

    pub fn dim(&self) -> usize {
        self.centers.dim()
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            p: self.p,
            d: self.dim(),
            points: self.points.iter().map(|x| x.coords().to_vec()).collect(),
            centers: self.centers.points().map(|c| c.coords().to_vec()).collect(),
        };
        serde_json::to_string(&file).expect("instance serialization cannot fail")
    }

    /// Parses the JSON instance format. Centers get ids `0..k` in file order.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("instance JSON: {e}")))?;
        let mut centers = CenterSet::new(file.d)?;
        for row in file.centers {
            centers.insert(Point::new(row)?)?;
        }
        let points = file.points.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
        Self::new(points, centers, file.p)
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn point_rejects_nan_and_empty() {
        assert!(matches!(Point::new(vec![]), Err(Error::ZeroDimension)));
        assert!(matches!(Point::new(vec![1.0, f64::NAN]), Err(Error::NonFinite { index: 1, .. })));
    }

    #[test]
    fn duplicates_rejected_and_ids_monotone() {
        let mut c = CenterSet::new(2).unwrap();
        let a = c.insert(pt(&[0.0, 0.0])).unwrap();
        assert!(matches!(c.insert(pt(&[-0.0, 0.0])), Err(Error::DuplicateCenter { existing }) if existing == a));
        let b = c.insert(pt(&[1.0, 0.0])).unwrap();
        c.remove(b).unwrap();
        let again = c.insert(pt(&[1.0, 0.0])).unwrap();
        assert!(again > b);
    }

    #[test]
    fn assign_boundary_goes_right() {
        let cut = Cut::new(0, 0.5, Sign::Plus);
        let tree = ThresholdTree::new(TreeNode::internal(
            cut,
            TreeNode::leaf(CenterId(0)),
            TreeNode::leaf(CenterId(1)),
        ));
        assert_eq!(tree.assign(&[0.2, 9.9]), CenterId(0));
        assert_eq!(tree.assign(&[0.5, 0.0]), CenterId(1));
        assert_eq!(ThresholdTree::single(CenterId(4)).assign(&[3.0]), CenterId(4));
    }

    #[test]
    fn tree_json_format() {
        let mut cut = Cut::new(1, 0.25, Sign::Minus);
        let tree = ThresholdTree::new(TreeNode::internal(
            cut,
            TreeNode::leaf(CenterId(2)),
            TreeNode::leaf(CenterId(0)),
        ));
        assert_eq!(
            tree.to_json(),
            r#"{"cut":{"coord":1,"threshold":0.25,"sign":-1},"left":{"leaf":2},"right":{"leaf":0}}"#
        );
        cut.timestamp = Some(1.5);
        let timed = ThresholdTree::new(TreeNode::internal(
            cut,
            TreeNode::leaf(CenterId(2)),
            TreeNode::leaf(CenterId(0)),
        ));
        let json = timed.to_json();
        assert!(json.contains(r#""timestamp":1.5"#));
        assert_eq!(ThresholdTree::from_json(&json).unwrap(), timed);
    }

    #[test]
    fn deep_tree_json_round_trip() {
        let mut node = TreeNode::leaf(CenterId(0));
        for i in 1..600u64 {
            node = TreeNode::internal(Cut::new(0, i as f64, Sign::Plus), node, TreeNode::leaf(CenterId(i)));
        }
        let tree = ThresholdTree::new(node);
        let back = ThresholdTree::from_json(&tree.to_json()).unwrap();
        assert_eq!(back.leaf_count(), 600);
    }

    #[test]
    fn instance_json() {
        let s = r#"{"p":2.0,"d":2,"points":[[0,0],[1,1]],"centers":[[0,0],[3,4]]}"#;
        let inst = Instance::from_json(s).unwrap();
        assert_eq!(inst.centers.len(), 2);
        assert_eq!(inst.points.len(), 2);
        assert!(Instance::from_json(r#"{"p":2.0,"d":2,"points":[[0]],"centers":[[0,0]]}"#).is_err());
        assert!(Instance::from_json(r#"{"p":0.5,"d":1,"points":[],"centers":[[0]]}"#).is_err());
        let round = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(round.centers, inst.centers);
    }
}
