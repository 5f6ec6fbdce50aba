//! Static construction of an explainable threshold tree.
//!
//! A partition-leaf call fixes an anchor (the coordinate-wise lower median of
//! its centers) and repeatedly samples cuts `x_i < m_i + sigma * theta` with
//! `theta^p` uniform on `[0, R^p]`, where `R` is the current `l_p` radius of
//! the main part around the anchor. A cut is applied only when it splits the
//! main part; the side holding the anchor stays main. The call stops once the
//! main part holds at most half of the call's centers, and every multi-center
//! part produced this way gets its own call.

use crate::cost::lp_dist;
use crate::error::{Error, Result};
use crate::model::{check_exponent, CenterId, CenterSet, Cut, Point, Sign, ThresholdTree, TreeNode};
use crate::rng::RngHandle;

/// Anchor of a partition-leaf call.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorInfo {
    pub anchor: Point,
    pub source_size: usize,
}

/// Coordinate-wise lower median (order statistic `floor((n - 1) / 2)`).
pub fn get_anchor(centers: &CenterSet) -> Result<AnchorInfo> {
    let pts: Vec<&Point> = centers.points().collect();
    anchor_of(&pts)
}

pub(crate) fn anchor_of(pts: &[&Point]) -> Result<AnchorInfo> {
    let first = pts.first().ok_or(Error::EmptyCenters)?;
    let d = first.dim();
    let n = pts.len();
    let rank = (n - 1) / 2;
    let mut column = Vec::with_capacity(n);
    let mut anchor = Vec::with_capacity(d);
    for i in 0..d {
        column.clear();
        column.extend(pts.iter().map(|c| c.get(i)));
        let (_, median, _) = column.select_nth_unstable_by(rank, f64::total_cmp);
        anchor.push(*median);
    }
    Ok(AnchorInfo {
        anchor: Point::new(anchor)?,
        source_size: n,
    })
}

/// Largest `l_p` distance from `anchor` to a center of the main part.
pub fn radius<'a>(main: impl IntoIterator<Item = &'a Point>, anchor: &Point, p: f64) -> Result<f64> {
    let mut best: Option<f64> = None;
    for c in main {
        let r = lp_dist(c.coords(), anchor.coords(), p);
        best = Some(best.map_or(r, |b: f64| b.max(r)));
    }
    best.ok_or(Error::EmptyCenters)
}

/// Samples a cut around `anchor`: uniform coordinate and sign, `theta^p`
/// uniform on `[0, R^p]`. The returned cut has no timestamp.
pub fn sample_cut(anchor: &Point, radius: f64, p: f64, rng: &mut RngHandle) -> Result<Cut> {
    if radius.is_nan() || radius <= 0.0 || radius.is_infinite() {
        return Err(Error::NonPositiveRadius(radius));
    }
    check_exponent(p)?;
    let coordinate = rng.index(anchor.dim());
    let sign = if rng.sign() > 0 { Sign::Plus } else { Sign::Minus };
    let theta = sample_offset(radius, p, rng);
    Ok(Cut::new(coordinate, anchor.get(coordinate) + sign.value() * theta, sign))
}

fn sample_offset(radius: f64, p: f64, rng: &mut RngHandle) -> f64 {
    let z = rng.uniform() * radius.powf(p);
    if z == 0.0 {
        0.0
    } else {
        (z.ln() / p).exp().min(radius)
    }
}

/// Node of a partial tree: either a cut or a part of still-unsplit centers.
#[derive(Debug, Clone, PartialEq)]
pub enum PartialNode {
    Cut {
        cut: Cut,
        left: Box<PartialNode>,
        right: Box<PartialNode>,
    },
    Part(Vec<CenterId>),
}

impl PartialNode {
    pub fn parts(&self) -> Vec<&[CenterId]> {
        let mut out = Vec::new();
        self.collect_parts(&mut out);
        out
    }

    fn collect_parts<'a>(&'a self, out: &mut Vec<&'a [CenterId]>) {
        match self {
            PartialNode::Part(ids) => out.push(ids),
            PartialNode::Cut { left, right, .. } => {
                left.collect_parts(out);
                right.collect_parts(out);
            }
        }
    }
}

/// One sampled step of a partition-leaf call.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub radius: f64,
    pub applied: bool,
    /// Centers moved out of the main part by this step.
    pub separated: usize,
}

/// Result of one static partition-leaf call.
#[derive(Debug, Clone)]
pub struct PartitionOutcome {
    pub tree: PartialNode,
    pub anchor: Point,
    pub trace: Vec<StepTrace>,
}

impl PartitionOutcome {
    pub fn applied_cuts(&self) -> usize {
        self.trace.iter().filter(|s| s.applied).count()
    }
}

/// One partition-leaf call over the ids in `ids` (at least two).
pub fn partition_leaf_static(
    centers: &CenterSet,
    ids: &[CenterId],
    p: f64,
    rng: &mut RngHandle,
) -> Result<PartitionOutcome> {
    check_exponent(p)?;
    if ids.len() < 2 {
        return Err(Error::TooFewCenters {
            needed: 2,
            actual: ids.len(),
        });
    }
    let pts = ids
        .iter()
        .map(|&id| centers.get(id).ok_or(Error::UnknownCenter(id)))
        .collect::<Result<Vec<_>>>()?;
    let anchor = anchor_of(&pts)?.anchor;
    let total = ids.len();

    let mut main: Vec<CenterId> = ids.to_vec();
    let mut chain: Vec<(Cut, Vec<CenterId>)> = Vec::new();
    let mut trace = Vec::new();
    let coords = |id: CenterId| centers.get(id).expect("ids checked above").coords();

    while 2 * main.len() > total {
        let r = radius(main.iter().map(|&id| centers.get(id).expect("checked")), &anchor, p)?;
        if r.is_nan() || r <= 0.0 {
            return Err(Error::Internal("main part collapsed onto the anchor above half size".into()));
        }
        loop {
            let cut = sample_cut(&anchor, r, p, rng)?;
            let (left, right): (Vec<CenterId>, Vec<CenterId>) =
                main.iter().partition(|&&id| cut.goes_left(coords(id)));
            if left.is_empty() || right.is_empty() {
                trace.push(StepTrace {
                    radius: r,
                    applied: false,
                    separated: 0,
                });
                continue;
            }
            let (kept, split_off) = match cut.sign {
                Sign::Plus => (left, right),
                Sign::Minus => (right, left),
            };
            trace.push(StepTrace {
                radius: r,
                applied: true,
                separated: split_off.len(),
            });
            main = kept;
            chain.push((cut, split_off));
            break;
        }
    }

    let mut tree = PartialNode::Part(main);
    for (cut, off) in chain.into_iter().rev() {
        let off = PartialNode::Part(off);
        let (left, right) = match cut.sign {
            Sign::Plus => (tree, off),
            Sign::Minus => (off, tree),
        };
        tree = PartialNode::Cut {
            cut,
            left: Box::new(left),
            right: Box::new(right),
        };
    }
    Ok(PartitionOutcome { tree, anchor, trace })
}

/// Full static tree: partition-leaf at the root, then recursively on every
/// part with more than one center. Sub-calls draw from path-keyed streams.
pub fn build_tree_static(centers: &CenterSet, p: f64, rng: &RngHandle) -> Result<ThresholdTree> {
    check_exponent(p)?;
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    let ids: Vec<CenterId> = centers.ids().collect();
    Ok(ThresholdTree::new(build_node(centers, &ids, p, rng)?))
}

fn build_node(centers: &CenterSet, ids: &[CenterId], p: f64, rng: &RngHandle) -> Result<TreeNode> {
    if ids.len() == 1 {
        return Ok(TreeNode::leaf(ids[0]));
    }
    let mut own = rng.split(0);
    let outcome = partition_leaf_static(centers, ids, p, &mut own)?;
    let mut next_part = 0u64;
    expand(centers, outcome.tree, p, rng, &mut next_part)
}

fn expand(centers: &CenterSet, node: PartialNode, p: f64, rng: &RngHandle, next: &mut u64) -> Result<TreeNode> {
    match node {
        PartialNode::Part(ids) => {
            *next += 1;
            build_node(centers, &ids, p, &rng.split(*next))
        }
        PartialNode::Cut { cut, left, right } => {
            let l = expand(centers, *left, p, rng, next)?;
            let r = expand(centers, *right, p, rng, next)?;
            Ok(TreeNode::internal(cut, l, r))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_tree;

    fn set(rows: &[&[f64]]) -> CenterSet {
        CenterSet::from_coords(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn anchor_examples() {
        assert_eq!(get_anchor(&set(&[&[5.0, 7.0]])).unwrap().anchor.coords(), &[5.0, 7.0]);
        assert_eq!(
            get_anchor(&set(&[&[0.0, 0.0], &[2.0, 4.0], &[6.0, 1.0]])).unwrap().anchor.coords(),
            &[2.0, 1.0]
        );
        assert_eq!(get_anchor(&set(&[&[0.0], &[1.0], &[2.0], &[3.0]])).unwrap().anchor.coords(), &[1.0]);
        assert!(matches!(get_anchor(&CenterSet::new(2).unwrap()), Err(Error::EmptyCenters)));
    }

    #[test]
    fn anchor_quarter_property() {
        let mut rng = RngHandle::new(3);
        for n in 1..40 {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
            let c = CenterSet::from_coords(&rows).unwrap();
            let a = get_anchor(&c).unwrap();
            for i in 0..2 {
                let ge = c.points().filter(|x| x.get(i) >= a.anchor.get(i)).count();
                let lt = n - ge;
                assert!(2 * ge >= n, "n={n} coord {i}: ge={ge}");
                // the lower median leaves nothing strictly below it when n <= 2
                if n >= 3 {
                    assert!(4 * lt >= n, "n={n} coord {i}: lt={lt}");
                }
                // neither strict side exceeds half, which keeps rebuild cuts two-sided
                assert!(2 * lt <= n && 2 * (n - lt - 1) <= n);
            }
        }
    }

    #[test]
    fn radius_examples() {
        let anchor = Point::new(vec![0.0, 0.0]).unwrap();
        let main = vec![Point::new(vec![1.0, 0.0]).unwrap(), Point::new(vec![0.0, -2.0]).unwrap()];
        assert_eq!(radius(&main, &anchor, 1.0).unwrap(), 2.0);
        assert_eq!(radius(std::iter::once(&anchor), &anchor, 2.0).unwrap(), 0.0);
        assert!(matches!(radius(std::iter::empty(), &anchor, 1.0), Err(Error::EmptyCenters)));

        let mut rng = RngHandle::new(8);
        let pts: Vec<Point> = (0..10).map(|_| Point::new(vec![rng.normal(), rng.normal()]).unwrap()).collect();
        let mut brute = 0.0f64;
        for c in &pts {
            let d = ((c.get(0) - 0.0).abs().powi(3) + (c.get(1) - 0.0).abs().powi(3)).cbrt();
            brute = brute.max(d);
        }
        approx::assert_relative_eq!(radius(&pts, &anchor, 3.0).unwrap(), brute, max_relative = 1e-12);
    }

    #[test]
    fn sample_cut_rejects_bad_radius() {
        let a = Point::zeros(2);
        let mut rng = RngHandle::new(1);
        assert!(matches!(sample_cut(&a, 0.0, 1.0, &mut rng), Err(Error::NonPositiveRadius(_))));
        assert!(matches!(sample_cut(&a, -1.0, 1.0, &mut rng), Err(Error::NonPositiveRadius(_))));
    }

    #[test]
    fn sample_cut_law() {
        let a = Point::zeros(3);
        for (p, expect) in [(1.0, 0.5), (2.0, 0.25)] {
            let mut rng = RngHandle::new(99);
            let n = 100_000;
            let mut below = 0;
            for _ in 0..n {
                let cut = sample_cut(&a, 2.0, p, &mut rng).unwrap();
                let theta = (cut.threshold - a.get(cut.coordinate)) * cut.sign.value();
                assert!((0.0..=2.0).contains(&theta));
                if theta <= 1.0 {
                    below += 1;
                }
            }
            let frac = below as f64 / n as f64;
            assert!((frac - expect).abs() < 0.02, "p={p}: {frac}");
        }
    }

    #[test]
    fn partition_two_centers() {
        let c = set(&[&[0.0], &[1.0]]);
        let ids: Vec<_> = c.ids().collect();
        for seed in 0..200 {
            let out = partition_leaf_static(&c, &ids, 1.0, &mut RngHandle::new(seed)).unwrap();
            assert_eq!(out.applied_cuts(), 1);
            let PartialNode::Cut { cut, left, right } = &out.tree else { panic!("expected a cut") };
            assert!(cut.threshold > 0.0 && cut.threshold <= 1.0);
            assert_eq!(cut.sign, Sign::Plus);
            assert_eq!(**left, PartialNode::Part(vec![CenterId(0)]));
            assert_eq!(**right, PartialNode::Part(vec![CenterId(1)]));
        }
    }

    #[test]
    fn partition_rejects_small_input() {
        let c = set(&[&[0.0]]);
        assert!(matches!(
            partition_leaf_static(&c, &[CenterId(0)], 1.0, &mut RngHandle::new(0)),
            Err(Error::TooFewCenters { .. })
        ));
    }

    #[test]
    fn partition_collinear_leaf_sizes() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let c = CenterSet::from_coords(&rows).unwrap();
        let ids: Vec<_> = c.ids().collect();
        for seed in 0..300 {
            let out = partition_leaf_static(&c, &ids, 2.0, &mut RngHandle::new(seed)).unwrap();
            for part in out.tree.parts() {
                assert!(part.len() <= 4);
            }
            assert!(out.applied_cuts() <= 7);
            assert!(out.trace.iter().filter(|s| s.applied).all(|s| s.separated >= 1));
            let radii: Vec<f64> = out.trace.iter().map(|s| s.radius).collect();
            assert!(radii.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn build_single_and_square() {
        let single = set(&[&[0.3, 0.4]]);
        assert_eq!(build_tree_static(&single, 2.0, &RngHandle::new(0)).unwrap(), ThresholdTree::single(CenterId(0)));

        let square = set(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        for seed in 0..10_000 {
            let t = build_tree_static(&square, 1.0, &RngHandle::new(seed)).unwrap();
            assert_eq!(t.leaf_count(), 4);
            assert_eq!(t.node_count(), 7);
            assert!(validate_tree(&t, &square).is_valid());
        }
    }

    #[test]
    fn build_is_reproducible() {
        let mut rng = RngHandle::new(4);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.normal(), rng.normal(), rng.normal()]).collect();
        let c = CenterSet::from_coords(&rows).unwrap();
        let a = build_tree_static(&c, 1.5, &RngHandle::new(77)).unwrap();
        let b = build_tree_static(&c, 1.5, &RngHandle::new(77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.node_count(), 59);
    }
}
