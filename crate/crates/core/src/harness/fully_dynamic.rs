//! Fully dynamic clustering: a dynamic k-medians clusterer proposes centers
//! after every point update, and the threshold tree follows the center set
//! through deletions first, then insertions.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cost::{cost_tree, cost_unconstrained};
use crate::dynamic_tree::{DynamicConfig, DynamicTree};
use crate::error::{Error, Result};
use crate::model::{CenterId, Point};
use crate::rng::RngHandle;

use super::reference::reference_kmedians;

/// An update to the data set. Point ids are chosen by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum PointRequest {
    Insert { id: u64, coords: Vec<f64> },
    Delete { id: u64 },
}

/// Maintains at most `k` centers for a changing point set.
pub trait DynamicClusterer {
    fn k(&self) -> usize;

    /// Applies one point update and returns the current centers.
    fn update(&mut self, request: &PointRequest) -> Result<Vec<Point>>;
}

/// Emits a fixed center set regardless of the data.
#[derive(Debug, Clone)]
pub struct StaticClusterer {
    centers: Vec<Point>,
}

impl StaticClusterer {
    pub fn new(centers: Vec<Point>) -> Self {
        Self { centers }
    }
}

impl DynamicClusterer for StaticClusterer {
    fn k(&self) -> usize {
        self.centers.len()
    }

    fn update(&mut self, _request: &PointRequest) -> Result<Vec<Point>> {
        Ok(self.centers.clone())
    }
}

/// Recomputes reference k-medians on the live points every `period`
/// requests (default `ceil(k / 2)`), and whenever the current centers are
/// fewer than the live distinct points allow.
#[derive(Debug, Clone)]
pub struct NaiveRecompute {
    k: usize,
    p: f64,
    period: usize,
    rng: RngHandle,
    points: BTreeMap<u64, Point>,
    since: usize,
    current: Vec<Point>,
}

impl NaiveRecompute {
    pub fn new(k: usize, p: f64, rng: RngHandle) -> Self {
        Self::with_period(k, p, k.div_ceil(2).max(1), rng)
    }

    pub fn with_period(k: usize, p: f64, period: usize, rng: RngHandle) -> Self {
        Self {
            k,
            p,
            period: period.max(1),
            rng,
            points: BTreeMap::new(),
            since: 0,
            current: Vec::new(),
        }
    }
}

impl DynamicClusterer for NaiveRecompute {
    fn k(&self) -> usize {
        self.k
    }

    fn update(&mut self, request: &PointRequest) -> Result<Vec<Point>> {
        match request {
            PointRequest::Insert { id, coords } => {
                self.points.insert(*id, Point::new(coords.clone())?);
            }
            PointRequest::Delete { id } => {
                self.points
                    .remove(id)
                    .ok_or_else(|| Error::Config(format!("unknown point id {id}")))?;
            }
        }
        self.since += 1;
        let live: Vec<Point> = self.points.values().cloned().collect();
        let distinct = live
            .iter()
            .map(|x| x.coords().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect::<HashSet<_>>()
            .len();
        let target = self.k.min(distinct);
        if self.since >= self.period || self.current.len() < target || self.current.len() > distinct {
            self.since = 0;
            self.current = if target == 0 {
                Vec::new()
            } else {
                reference_kmedians(&live, target, self.p, &mut self.rng)?
                    .points()
                    .cloned()
                    .collect()
            };
        }
        Ok(self.current.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub request_index: usize,
    pub centers: usize,
    pub cost_tree: f64,
    pub cost_unconstrained: f64,
    pub ratio: f64,
    /// Both costs were zero; `ratio` is set to 1.
    pub zero_cost: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullyDynamicReport {
    pub point_requests: usize,
    pub center_updates: usize,
    pub total_recourse: usize,
    pub amortized_recourse: f64,
    /// Largest center-set size seen between individual tree updates.
    pub max_centers: usize,
    pub checkpoints: Vec<Checkpoint>,
}

/// Cost ratio with the zero-cost convention.
pub fn cost_ratio(tree_cost: f64, opt_cost: f64) -> (f64, bool) {
    if opt_cost == 0.0 && tree_cost == 0.0 {
        (1.0, true)
    } else {
        (tree_cost / opt_cost, false)
    }
}

/// Drives `clusterer` through `requests`, mirroring its centers in a
/// [`DynamicTree`]. Checkpoints every `checkpoint_every` requests (0 for
/// none) compare the tree cost with the unconstrained cost of the same
/// centers over the live points.
pub fn run_fully_dynamic(
    requests: &[PointRequest],
    clusterer: &mut dyn DynamicClusterer,
    config: DynamicConfig,
    checkpoint_every: usize,
    rng: RngHandle,
) -> Result<FullyDynamicReport> {
    let mut tree = DynamicTree::new(config, rng)?;
    let mut points: BTreeMap<u64, Point> = BTreeMap::new();
    let mut ids: HashMap<Vec<u64>, CenterId> = HashMap::new();
    let key = |p: &Point| p.coords().iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let mut report = FullyDynamicReport {
        point_requests: requests.len(),
        center_updates: 0,
        total_recourse: 0,
        amortized_recourse: 0.0,
        max_centers: 0,
        checkpoints: Vec::new(),
    };

    for (idx, request) in requests.iter().enumerate() {
        match request {
            PointRequest::Insert { id, coords } => {
                points.insert(*id, Point::new(coords.clone())?);
            }
            PointRequest::Delete { id } => {
                points.remove(id);
            }
        }
        let emitted = clusterer.update(request)?;
        if emitted.len() > clusterer.k() {
            return Err(Error::Config(format!(
                "request {idx}: clusterer emitted {} centers for k = {}",
                emitted.len(),
                clusterer.k()
            )));
        }
        let mut next: HashMap<Vec<u64>, Point> = HashMap::new();
        for c in emitted {
            if next.insert(key(&c), c).is_some() {
                return Err(Error::Config(format!("request {idx}: clusterer emitted duplicate centers")));
            }
        }
        let mut gone: Vec<(Vec<u64>, CenterId)> =
            ids.iter().filter(|(k, _)| !next.contains_key(*k)).map(|(k, &v)| (k.clone(), v)).collect();
        gone.sort_by_key(|(_, id)| *id);
        for (k, id) in gone {
            let s = tree.delete_center(id)?;
            ids.remove(&k);
            report.total_recourse += s.recourse;
            report.center_updates += 1;
        }
        let mut fresh: Vec<(Vec<u64>, Point)> = next.into_iter().filter(|(k, _)| !ids.contains_key(k)).collect();
        fresh.sort_by(|a, b| a.0.cmp(&b.0));
        for (k, c) in fresh {
            let (id, s) = tree.insert_center(c.into())?;
            ids.insert(k, id);
            report.total_recourse += s.recourse;
            report.center_updates += 1;
            report.max_centers = report.max_centers.max(tree.len());
        }

        if checkpoint_every > 0 && (idx + 1) % checkpoint_every == 0 {
            if let Some(t) = tree.tree() {
                let live: Vec<Point> = points.values().cloned().collect();
                let ct = cost_tree(&live, &t, tree.centers(), config.p)?;
                let cu = cost_unconstrained(&live, tree.centers(), config.p)?;
                let (ratio, zero_cost) = cost_ratio(ct, cu);
                report.checkpoints.push(Checkpoint {
                    request_index: idx,
                    centers: tree.len(),
                    cost_tree: ct,
                    cost_unconstrained: cu,
                    ratio,
                    zero_cost,
                });
            }
        }
    }
    report.amortized_recourse = if requests.is_empty() {
        0.0
    } else {
        report.total_recourse as f64 / requests.len() as f64
    };
    Ok(report)
}

/// Insert-heavy point stream in `[-1, 1]^d`: a warmup of `warmup` inserts,
/// then inserts and deletes with equal probability while points remain.
pub fn point_request_stream(d: usize, warmup: usize, count: usize, rng: &mut RngHandle) -> Vec<PointRequest> {
    let mut out = Vec::with_capacity(warmup + count);
    let mut live: Vec<u64> = Vec::new();
    let mut next = 0u64;
    for i in 0..warmup + count {
        if i < warmup || live.is_empty() || rng.uniform() < 0.5 {
            let coords = (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            out.push(PointRequest::Insert { id: next, coords });
            live.push(next);
            next += 1;
        } else {
            let id = live.swap_remove(rng.index(live.len()));
            out.push(PointRequest::Delete { id });
        }
    }
    out
}
