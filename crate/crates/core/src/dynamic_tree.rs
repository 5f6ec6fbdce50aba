//! Fully dynamic threshold tree over a changing center set.
//!
//! The tree is a hierarchy of partition-leaf calls. Each call owns an anchor,
//! an [`EarliestCutIndex`] (its random tape), a stopping time `rho`, and the
//! time-ordered chain of cuts it applied, each with the part split off by
//! that cut. Centers not split off by any cut up to `rho` form the main part.
//!
//! A center `c` belongs to the part of the cut whose timestamp equals its
//! earliest separating event `E(c)`, or to the main part when `E(c) > rho`.
//! A (re)build therefore reduces to sorting the centers by `E(c)` and
//! keeping cuts until at most half the centers remain in the main part.
//!
//! Every call counts the updates that pass through it and rebuilds itself
//! (with the update applied) once that count exceeds a quarter of the size
//! it was last built at.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::cut_stream::{CutEvent, EarliestCutIndex, Normalizer};
use crate::error::{Error, Result};
use crate::model::{check_exponent, CenterId, CenterSet, Point, Sign, ThresholdTree, TreeNode};
use crate::rng::RngHandle;
use crate::static_builder::anchor_of;

/// One update of the center set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Insert { coords: Vec<f64> },
    Delete { id: CenterId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicConfig {
    pub p: f64,
    pub dim: usize,
    /// Centers must lie in `[-bound, bound]^d` when set.
    pub bound: Option<f64>,
    pub normalizer: Normalizer,
}

impl DynamicConfig {
    /// Centers confined to `[-h, h]^d`, normalizer `(2h)^p`.
    pub fn boxed(p: f64, dim: usize, half_width: f64) -> Result<Self> {
        check_exponent(p)?;
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("box half-width must be positive, got {half_width}")));
        }
        Ok(Self {
            p,
            dim,
            bound: Some(half_width),
            normalizer: Normalizer::boxed(p, half_width),
        })
    }

    /// No box, normalizer 1.
    pub fn unbounded(p: f64, dim: usize) -> Result<Self> {
        check_exponent(p)?;
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            p,
            dim,
            bound: None,
            normalizer: Normalizer::unit(),
        })
    }
}

/// Per-request accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RequestStats {
    /// Tree nodes created or destroyed.
    pub recourse: usize,
    /// Partition-leaf calls visited plus `recourse`.
    pub touched_nodes: usize,
    pub levels: usize,
    pub rebuild_fired: bool,
    /// Size of the largest rebuilt subtree (0 when no rebuild fired).
    pub rebuilt_centers: usize,
}

impl RequestStats {
    fn rebuild(&mut self, removed_nodes: usize, new_size: usize) {
        self.recourse += removed_nodes + 2 * new_size - 1;
        self.rebuild_fired = true;
        self.rebuilt_centers = self.rebuilt_centers.max(new_size);
    }

    fn finish(mut self) -> Self {
        self.touched_nodes = self.levels + self.recourse;
        self
    }
}

#[derive(Debug, Clone)]
struct UsedCut {
    event: CutEvent,
    child: Part,
}

#[derive(Debug, Clone)]
struct PartitionCall {
    index: EarliestCutIndex,
    stopping_time: f64,
    rebuild_size: usize,
    counter: usize,
    size: usize,
    cuts: BTreeMap<OrderedFloat<f64>, UsedCut>,
    main: Part,
}

#[derive(Debug, Clone)]
enum Part {
    Leaf(CenterId),
    Call(Box<PartitionCall>),
}

/// Snapshot of one partition-leaf call, for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeState {
    pub depth: usize,
    pub anchor: Vec<f64>,
    pub stopping_time: f64,
    pub rebuild_size: usize,
    pub update_counter: usize,
    pub size: usize,
    pub used_cuts: usize,
}

struct Env<'a> {
    centers: &'a CenterSet,
    config: &'a DynamicConfig,
    rng: &'a mut RngHandle,
    stats: &'a mut RequestStats,
}

#[derive(Debug, Clone)]
pub struct DynamicTree {
    config: DynamicConfig,
    centers: CenterSet,
    root: Option<Part>,
    rng: RngHandle,
    ledger: Vec<RequestStats>,
}

impl DynamicTree {
    pub fn new(config: DynamicConfig, rng: RngHandle) -> Result<Self> {
        Ok(Self {
            centers: CenterSet::new(config.dim)?,
            config,
            root: None,
            rng,
            ledger: Vec::new(),
        })
    }

    /// Builds from an initial center set, keeping its ids.
    pub fn from_centers(centers: CenterSet, config: DynamicConfig, rng: RngHandle) -> Result<Self> {
        if centers.dim() != config.dim {
            return Err(Error::DimensionMismatch {
                expected: config.dim,
                actual: centers.dim(),
            });
        }
        for c in centers.points() {
            check_box(c, &config)?;
        }
        let mut tree = Self {
            config,
            centers,
            root: None,
            rng,
            ledger: Vec::new(),
        };
        if !tree.centers.is_empty() {
            let ids: Vec<CenterId> = tree.centers.ids().collect();
            let mut stats = RequestStats::default();
            let mut env = Env {
                centers: &tree.centers,
                config: &tree.config,
                rng: &mut tree.rng,
                stats: &mut stats,
            };
            tree.root = Some(build_part(ids, &mut env)?);
        }
        Ok(tree)
    }

    pub fn config(&self) -> &DynamicConfig {
        &self.config
    }

    pub fn centers(&self) -> &CenterSet {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Stats of every request processed so far.
    pub fn ledger(&self) -> &[RequestStats] {
        &self.ledger
    }

    pub fn insert_center(&mut self, coords: Vec<f64>) -> Result<(CenterId, RequestStats)> {
        let point = Point::new(coords)?;
        if point.dim() != self.config.dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.dim,
                actual: point.dim(),
            });
        }
        check_box(&point, &self.config)?;
        let id = self.centers.insert(point)?;
        let mut stats = RequestStats::default();
        match self.root.as_mut() {
            None => {
                self.root = Some(Part::Leaf(id));
                stats.rebuild(0, 1);
            }
            Some(root) => {
                let mut env = Env {
                    centers: &self.centers,
                    config: &self.config,
                    rng: &mut self.rng,
                    stats: &mut stats,
                };
                insert_into(root, id, &mut env)?;
            }
        }
        let stats = stats.finish();
        self.ledger.push(stats);
        Ok((id, stats))
    }

    pub fn delete_center(&mut self, id: CenterId) -> Result<RequestStats> {
        let point = self.centers.remove(id)?;
        let mut stats = RequestStats::default();
        let root = self
            .root
            .as_mut()
            .ok_or_else(|| Error::Internal("center set and tree out of sync".into()))?;
        let mut env = Env {
            centers: &self.centers,
            config: &self.config,
            rng: &mut self.rng,
            stats: &mut stats,
        };
        if let Removal::Gone = delete_from(root, id, point.coords(), &mut env)? {
            self.root = None;
            stats.recourse += 1;
        }
        let stats = stats.finish();
        self.ledger.push(stats);
        Ok(stats)
    }

    /// Applies one request. Returns the new center id for inserts.
    pub fn process(&mut self, request: &Request) -> Result<(Option<CenterId>, RequestStats)> {
        match request {
            Request::Insert { coords } => {
                let (id, s) = self.insert_center(coords.clone())?;
                Ok((Some(id), s))
            }
            Request::Delete { id } => Ok((None, self.delete_center(*id)?)),
        }
    }

    /// Applies one request and returns the flattened tree with its stats.
    pub fn process_request(&mut self, request: &Request) -> Result<(Option<ThresholdTree>, RequestStats)> {
        let (_, stats) = self.process(request)?;
        Ok((self.tree(), stats))
    }

    /// Current tree, or `None` when no centers remain.
    pub fn tree(&self) -> Option<ThresholdTree> {
        self.root.as_ref().map(|r| ThresholdTree::new(flatten(r)))
    }

    /// Rebuilds the tree with the static rule, driven by each call's own
    /// anchor, tape and stopping time: scan the realized events in time
    /// order up to `rho` and apply every cut that splits the main part.
    /// The result equals [`DynamicTree::tree`] when the dynamic updates are
    /// consistent with the static process.
    pub fn replay_static(&self) -> Result<Option<ThresholdTree>> {
        match &self.root {
            None => Ok(None),
            Some(root) => {
                let ids: Vec<CenterId> = self.centers.ids().collect();
                Ok(Some(ThresholdTree::new(replay(root, ids, &self.centers)?)))
            }
        }
    }

    pub fn node_states(&self) -> Vec<NodeState> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            collect_states(root, 0, &mut out);
        }
        out
    }

    /// Checks bookkeeping and balance invariants of every call: counters
    /// below threshold, sizes consistent, every part at most
    /// `ceil(3/4 * size)`, the anchor still an approximate median, and each
    /// center filed under its earliest separating event.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if let Some(root) = &self.root {
            let n = part_ids(root).len();
            if n != self.centers.len() {
                problems.push(format!("tree holds {n} centers, set holds {}", self.centers.len()));
            }
            check_part(root, &self.centers, "", &mut problems);
        } else if !self.centers.is_empty() {
            problems.push("empty tree over a non-empty center set".into());
        }
        problems
    }
}

fn check_box(point: &Point, config: &DynamicConfig) -> Result<()> {
    if let Some(bound) = config.bound {
        for (coord, &value) in point.coords().iter().enumerate() {
            if value.abs() > bound {
                return Err(Error::OutOfBox { coord, value, bound });
            }
        }
    }
    Ok(())
}

fn build_part(mut ids: Vec<CenterId>, env: &mut Env<'_>) -> Result<Part> {
    ids.sort_unstable();
    if ids.len() == 1 {
        return Ok(Part::Leaf(ids[0]));
    }
    let centers = env.centers;
    let pts = ids
        .iter()
        .map(|&id| centers.get(id).ok_or(Error::UnknownCenter(id)))
        .collect::<Result<Vec<_>>>()?;
    let anchor = anchor_of(&pts)?.anchor;
    let mut index = EarliestCutIndex::new(anchor, env.config.p, env.rng.fork(), env.config.normalizer)?;

    let mut groups: BTreeMap<OrderedFloat<f64>, (CutEvent, Vec<CenterId>)> = BTreeMap::new();
    let mut main = Vec::new();
    for (&id, pt) in ids.iter().zip(&pts) {
        match index.earliest_event(pt.coords())? {
            Some(e) => groups
                .entry(OrderedFloat(e.timestamp))
                .or_insert_with(|| (e, Vec::new()))
                .1
                .push(id),
            None => main.push(id),
        }
    }

    let n = ids.len();
    let mut remaining = n;
    let mut stopping_time = 0.0;
    let mut accepted = Vec::new();
    let mut pending = groups.into_iter();
    while 2 * remaining > n {
        let (ts, (event, members)) = pending
            .next()
            .ok_or_else(|| Error::Internal("ran out of separating events above half size".into()))?;
        remaining -= members.len();
        stopping_time = ts.0;
        accepted.push((event, members));
    }
    for (_, (_, members)) in pending {
        main.extend(members);
    }

    let mut cuts = BTreeMap::new();
    for (event, members) in accepted {
        let child = build_part(members, env)?;
        cuts.insert(OrderedFloat(event.timestamp), UsedCut { event, child });
    }
    let main = build_part(main, env)?;
    Ok(Part::Call(Box::new(PartitionCall {
        index,
        stopping_time,
        rebuild_size: n,
        counter: 0,
        size: n,
        cuts,
        main,
    })))
}

fn insert_into(part: &mut Part, id: CenterId, env: &mut Env<'_>) -> Result<()> {
    match part {
        Part::Leaf(existing) => {
            let ids = vec![*existing, id];
            *part = build_part(ids, env)?;
            env.stats.rebuild(1, 2);
            Ok(())
        }
        Part::Call(call) => {
            env.stats.levels += 1;
            call.counter += 1;
            if call.counter > call.rebuild_size / 4 {
                let mut ids = call_ids(call);
                ids.push(id);
                let removed = 2 * call.size - 1;
                let new_size = ids.len();
                *part = build_part(ids, env)?;
                env.stats.rebuild(removed, new_size);
                return Ok(());
            }
            call.size += 1;
            let centers = env.centers;
            let pt = centers.get(id).ok_or(Error::UnknownCenter(id))?;
            match call.index.earliest_event(pt.coords())? {
                Some(e) if e.timestamp <= call.stopping_time => {
                    let key = OrderedFloat(e.timestamp);
                    match call.cuts.get_mut(&key) {
                        Some(used) => insert_into(&mut used.child, id, env),
                        None => {
                            call.cuts.insert(
                                key,
                                UsedCut {
                                    event: e,
                                    child: Part::Leaf(id),
                                },
                            );
                            env.stats.recourse += 2;
                            Ok(())
                        }
                    }
                }
                _ => insert_into(&mut call.main, id, env),
            }
        }
    }
}

enum Removal {
    Gone,
    Kept,
}

fn delete_from(part: &mut Part, id: CenterId, pt: &[f64], env: &mut Env<'_>) -> Result<Removal> {
    match part {
        Part::Leaf(existing) => {
            if *existing == id {
                Ok(Removal::Gone)
            } else {
                Err(Error::Internal(format!("center {id} routed to leaf {existing}")))
            }
        }
        Part::Call(call) => {
            env.stats.levels += 1;
            call.counter += 1;
            if call.counter > call.rebuild_size / 4 {
                let ids: Vec<CenterId> = call_ids(call).into_iter().filter(|&c| c != id).collect();
                let removed = 2 * call.size - 1;
                let new_size = ids.len();
                *part = build_part(ids, env)?;
                env.stats.rebuild(removed, new_size);
                return Ok(Removal::Kept);
            }
            call.size -= 1;
            let located = call
                .index
                .peek_earliest(pt)
                .ok_or_else(|| Error::Internal(format!("center {id} was never filed in this call")))?;
            let key = located
                .filter(|e| e.timestamp <= call.stopping_time)
                .map(|e| OrderedFloat(e.timestamp))
                .filter(|k| call.cuts.contains_key(k));
            match key {
                Some(k) => {
                    let used = call.cuts.get_mut(&k).expect("key checked");
                    if let Removal::Gone = delete_from(&mut used.child, id, pt, env)? {
                        call.cuts.remove(&k);
                        env.stats.recourse += 2;
                    }
                }
                None => {
                    if let Removal::Gone = delete_from(&mut call.main, id, pt, env)? {
                        let (_, last) = call
                            .cuts
                            .pop_last()
                            .ok_or_else(|| Error::Internal("main part emptied a cut-free call".into()))?;
                        call.main = last.child;
                        call.stopping_time = call.cuts.last_key_value().map_or(0.0, |(k, _)| k.0);
                        env.stats.recourse += 2;
                    }
                }
            }
            Ok(Removal::Kept)
        }
    }
}

fn call_ids(call: &PartitionCall) -> Vec<CenterId> {
    let mut out = Vec::with_capacity(call.size);
    for used in call.cuts.values() {
        collect_ids(&used.child, &mut out);
    }
    collect_ids(&call.main, &mut out);
    out
}

fn collect_ids(part: &Part, out: &mut Vec<CenterId>) {
    match part {
        Part::Leaf(id) => out.push(*id),
        Part::Call(call) => {
            for used in call.cuts.values() {
                collect_ids(&used.child, out);
            }
            collect_ids(&call.main, out);
        }
    }
}

fn part_ids(part: &Part) -> Vec<CenterId> {
    let mut out = Vec::new();
    collect_ids(part, &mut out);
    out
}

fn join(sign: Sign, cut: crate::model::Cut, rest: TreeNode, split_off: TreeNode) -> TreeNode {
    match sign {
        Sign::Plus => TreeNode::internal(cut, rest, split_off),
        Sign::Minus => TreeNode::internal(cut, split_off, rest),
    }
}

fn flatten(part: &Part) -> TreeNode {
    match part {
        Part::Leaf(id) => TreeNode::leaf(*id),
        Part::Call(call) => {
            let anchor = call.index.anchor();
            let mut node = flatten(&call.main);
            for used in call.cuts.values().rev() {
                let cut = used.event.to_cut(anchor);
                node = join(cut.sign, cut, node, flatten(&used.child));
            }
            node
        }
    }
}

fn replay(part: &Part, ids: Vec<CenterId>, centers: &CenterSet) -> Result<TreeNode> {
    if ids.len() == 1 {
        return Ok(TreeNode::leaf(ids[0]));
    }
    let Part::Call(call) = part else {
        return Err(Error::Internal(format!("replay reached a leaf with {} centers", ids.len())));
    };
    let coords = |id: CenterId| centers.get(id).map(Point::coords).ok_or(Error::UnknownCenter(id));
    let mut index = call.index.clone();
    let mut events = Vec::new();
    for &id in &ids {
        if let Some(e) = index.earliest_event(coords(id)?)? {
            events.push(e);
        }
    }
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    events.dedup_by(|a, b| a.timestamp == b.timestamp);

    let anchor = index.anchor().clone();
    let mut main = ids;
    let mut chain = Vec::new();
    for e in events {
        if e.timestamp > call.stopping_time {
            break;
        }
        let cut = e.to_cut(&anchor);
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &id in &main {
            if cut.goes_left(coords(id)?) {
                left.push(id);
            } else {
                right.push(id);
            }
        }
        let (kept, split_off) = match cut.sign {
            Sign::Plus => (left, right),
            Sign::Minus => (right, left),
        };
        if split_off.is_empty() {
            continue;
        }
        if kept.is_empty() {
            return Err(Error::Internal("static replay rejected a cut beyond the realized tape".into()));
        }
        main = kept;
        chain.push((e, cut, split_off));
    }

    let mut node = replay(&call.main, main, centers)?;
    for (e, cut, split_off) in chain.into_iter().rev() {
        let used = call
            .cuts
            .get(&OrderedFloat(e.timestamp))
            .ok_or_else(|| Error::Internal(format!("static replay applied unused cut at time {}", e.timestamp)))?;
        let sub = replay(&used.child, split_off, centers)?;
        node = join(cut.sign, cut, node, sub);
    }
    Ok(node)
}

fn collect_states(part: &Part, depth: usize, out: &mut Vec<NodeState>) {
    if let Part::Call(call) = part {
        out.push(NodeState {
            depth,
            anchor: call.index.anchor().coords().to_vec(),
            stopping_time: call.stopping_time,
            rebuild_size: call.rebuild_size,
            update_counter: call.counter,
            size: call.size,
            used_cuts: call.cuts.len(),
        });
        for used in call.cuts.values() {
            collect_states(&used.child, depth + 1, out);
        }
        collect_states(&call.main, depth + 1, out);
    }
}

fn ceil_three_quarters(n: usize) -> usize {
    (3 * n).div_ceil(4)
}

fn check_part(part: &Part, centers: &CenterSet, path: &str, problems: &mut Vec<String>) {
    let Part::Call(call) = part else {
        return;
    };
    let ids = call_ids(call);
    let size = ids.len();
    if size != call.size {
        problems.push(format!("{path}: recorded size {} but holds {size}", call.size));
    }
    if size < 2 {
        problems.push(format!("{path}: call with {size} centers"));
    }
    if call.counter > call.rebuild_size / 4 {
        problems.push(format!(
            "{path}: counter {} above threshold for rebuild size {}",
            call.counter, call.rebuild_size
        ));
    }
    let cap = ceil_three_quarters(size);
    let anchor = call.index.anchor();
    for (i, (ts, used)) in call.cuts.iter().enumerate() {
        if ts.0 > call.stopping_time {
            problems.push(format!("{path}: cut at {} after stopping time {}", ts.0, call.stopping_time));
        }
        let members = part_ids(&used.child);
        if members.len() > cap {
            problems.push(format!("{path}: part {i} holds {} of {size}", members.len()));
        }
        for id in members {
            let Some(c) = centers.get(id) else {
                problems.push(format!("{path}: unknown center {id}"));
                continue;
            };
            match call.index.peek_earliest(c.coords()) {
                Some(Some(e)) if e.timestamp == ts.0 => {}
                other => problems.push(format!("{path}: center {id} filed under {} but earliest is {other:?}", ts.0)),
            }
        }
        check_part(&used.child, centers, &format!("{path}/{i}"), problems);
    }
    let main = part_ids(&call.main);
    if main.len() > cap {
        problems.push(format!("{path}: main part holds {} of {size}", main.len()));
    }
    for id in main {
        let Some(c) = centers.get(id) else {
            problems.push(format!("{path}: unknown center {id}"));
            continue;
        };
        match call.index.peek_earliest(c.coords()) {
            Some(None) => {}
            Some(Some(e)) if e.timestamp > call.stopping_time => {}
            other => problems.push(format!("{path}: main center {id} has earliest {other:?}")),
        }
    }
    for i in 0..anchor.dim() {
        let m = anchor.get(i);
        let below = ids.iter().filter(|&&id| centers.get(id).is_some_and(|c| c.get(i) < m)).count();
        let above = ids.iter().filter(|&&id| centers.get(id).is_some_and(|c| c.get(i) > m)).count();
        if below > cap || above > cap {
            problems.push(format!("{path}: anchor off-median in coordinate {i} ({below} below, {above} above of {size})"));
        }
    }
    check_part(&call.main, centers, &format!("{path}/m"), problems);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_tree;

    fn config(d: usize) -> DynamicConfig {
        DynamicConfig::boxed(1.0, d, 1.0).unwrap()
    }

    fn random_point(rng: &mut RngHandle, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
    }

    fn assert_consistent(t: &DynamicTree) {
        let problems = t.check_invariants();
        assert!(problems.is_empty(), "{problems:#?}");
        match t.tree() {
            None => assert!(t.is_empty()),
            Some(tree) => {
                let report = validate_tree(&tree, t.centers());
                assert!(report.is_valid(), "{report}");
                assert_eq!(t.replay_static().unwrap(), Some(tree));
            }
        }
    }

    #[test]
    fn empty_then_single_insert() {
        let mut t = DynamicTree::new(config(2), RngHandle::new(1)).unwrap();
        assert!(t.tree().is_none());
        let (id, s) = t.insert_center(vec![0.0, 0.0]).unwrap();
        assert_eq!(id, CenterId(0));
        assert_eq!(s.recourse, 1);
        assert_eq!(t.tree().unwrap(), ThresholdTree::single(id));
        assert_consistent(&t);
    }

    #[test]
    fn delete_to_empty() {
        let mut t = DynamicTree::new(config(2), RngHandle::new(1)).unwrap();
        let (a, _) = t.insert_center(vec![0.5, 0.5]).unwrap();
        let (b, _) = t.insert_center(vec![-0.5, 0.5]).unwrap();
        assert_eq!(t.tree().unwrap().leaf_count(), 2);
        t.delete_center(a).unwrap();
        assert_eq!(t.tree().unwrap(), ThresholdTree::single(b));
        let s = t.delete_center(b).unwrap();
        assert_eq!(s.recourse, 1);
        assert!(t.tree().is_none());
        assert!(matches!(t.delete_center(b), Err(Error::UnknownCenter(_))));
    }

    #[test]
    fn rejects_bad_inserts() {
        let mut t = DynamicTree::new(config(2), RngHandle::new(1)).unwrap();
        t.insert_center(vec![0.1, 0.2]).unwrap();
        assert!(matches!(t.insert_center(vec![0.1, 0.2]), Err(Error::DuplicateCenter { .. })));
        assert!(matches!(t.insert_center(vec![1.5, 0.0]), Err(Error::OutOfBox { .. })));
        assert!(matches!(t.insert_center(vec![0.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn initial_build_is_valid() {
        let mut rng = RngHandle::new(5);
        let pts: Vec<Vec<f64>> = (0..64).map(|_| random_point(&mut rng, 3)).collect();
        let centers = CenterSet::from_coords(&pts).unwrap();
        let t = DynamicTree::from_centers(centers, config(3), RngHandle::new(9)).unwrap();
        assert_consistent(&t);
        assert_eq!(t.tree().unwrap().leaf_count(), 64);
        let root = &t.node_states()[0];
        assert_eq!(root.size, 64);
        assert!(root.used_cuts >= 1);
    }

    #[test]
    fn random_interleavings_stay_valid() {
        for seed in 0..1000u64 {
            let mut rng = RngHandle::new(seed);
            let d = 1 + rng.index(3);
            let cfg = DynamicConfig::boxed([1.0, 2.0, 3.0][rng.index(3)], d, 1.0).unwrap();
            let mut t = DynamicTree::new(cfg, rng.fork()).unwrap();
            let mut live: Vec<CenterId> = Vec::new();
            for _ in 0..40 {
                if live.is_empty() || rng.uniform() < 0.6 {
                    let (id, s) = t.insert_center(random_point(&mut rng, d)).unwrap();
                    live.push(id);
                    if !s.rebuild_fired {
                        assert!(s.recourse <= 2);
                    }
                } else {
                    let id = live.swap_remove(rng.index(live.len()));
                    let s = t.delete_center(id).unwrap();
                    if !s.rebuild_fired {
                        assert!(s.recourse <= 2);
                    }
                }
                let problems = t.check_invariants();
                assert!(problems.is_empty(), "seed {seed}: {problems:#?}");
            }
            assert_consistent(&t);
        }
    }

    #[test]
    fn non_rebuild_insert_adds_leaf_and_cut() {
        let mut rng = RngHandle::new(3);
        let pts: Vec<Vec<f64>> = (0..200).map(|_| random_point(&mut rng, 2)).collect();
        let mut t = DynamicTree::from_centers(CenterSet::from_coords(&pts).unwrap(), config(2), RngHandle::new(4)).unwrap();
        let mut seen_additive = false;
        for _ in 0..30 {
            let before = t.tree().unwrap().node_count();
            let (_, s) = t.insert_center(random_point(&mut rng, 2)).unwrap();
            let after = t.tree().unwrap().node_count();
            assert_eq!(after, before + 2);
            if !s.rebuild_fired {
                assert_eq!(s.recourse, 2);
                assert!(s.levels >= 1);
                seen_additive = true;
            }
        }
        assert!(seen_additive);
        assert_consistent(&t);
    }

    #[test]
    fn deterministic_under_seed() {
        let run = || {
            let mut rng = RngHandle::new(77);
            let mut t = DynamicTree::new(config(2), RngHandle::new(8)).unwrap();
            let mut live = Vec::new();
            for _ in 0..100 {
                if live.len() < 3 || rng.uniform() < 0.5 {
                    live.push(t.insert_center(random_point(&mut rng, 2)).unwrap().0);
                } else {
                    let id = live.swap_remove(rng.index(live.len()));
                    t.delete_center(id).unwrap();
                }
            }
            (t.tree().unwrap().to_json(), t.ledger().to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn request_json_format() {
        let r: Request = serde_json::from_str(r#"{"op":"insert","coords":[0.5,-1.0]}"#).unwrap();
        assert_eq!(r, Request::Insert { coords: vec![0.5, -1.0] });
        let r: Request = serde_json::from_str(r#"{"op":"delete","id":3}"#).unwrap();
        assert_eq!(r, Request::Delete { id: CenterId(3) });
        assert!(serde_json::from_str::<Request>(r#"{"op":"move"}"#).is_err());
    }

    #[test]
    fn unbounded_config_accepts_far_points() {
        let cfg = DynamicConfig::unbounded(2.0, 1).unwrap();
        let mut t = DynamicTree::new(cfg, RngHandle::new(2)).unwrap();
        for x in [100.0, -250.0, 3.0, 7.5] {
            t.insert_center(vec![x]).unwrap();
        }
        assert_consistent(&t);
    }
}
