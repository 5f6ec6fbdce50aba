//! Experiment runners. Every runner is deterministic given its config: trial
//! `t` draws from `RngHandle::new(seed + t)` and results are merged in trial
//! order, so running trials on several threads does not change the output.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{cost_tree, cost_unconstrained};
use crate::dynamic_tree::{DynamicConfig, DynamicTree, Request, RequestStats};
use crate::error::{Error, Result};
use crate::model::{check_exponent, CenterId, CenterSet, Point};
use crate::rng::RngHandle;
use crate::static_builder::{build_tree_static, partition_leaf_static};

use super::fully_dynamic::{cost_ratio, point_request_stream, run_fully_dynamic, NaiveRecompute};
use super::generators::{
    certified_bound_holds, check_center_separation, collinear_centers, gen_gaussian_mixture, gen_lower_bound_lp,
    grid_centers, uniform_centers,
};
use super::reference::reference_kmedians_with_budget;
use super::stats::{chi_square_homogeneity, median, ChiSquareResult};

/// Seed key of the dynamic tree's randomness, shared with the CLI.
pub const TREE_KEY: u64 = 1;
/// Seed key of generated request streams.
pub const STREAM_KEY: u64 = 2;
const PROBE_KEY: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Competitive,
    Dynamic,
    Coupling,
    LowerBound,
    RadiusDecay,
    FullyDynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Gaussian,
    Uniform,
    Collinear,
    Grid,
    LowerBound,
}

/// Experiment parameters, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_p")]
    pub p: f64,
    pub k: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Points per cluster (default 8), or copies of each center for the
    /// lower-bound grid (default 3).
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub generator: Option<GeneratorKind>,
    #[serde(default = "default_spread")]
    pub spread: f64,
    /// Mixed requests after the warmup (dynamic experiments).
    #[serde(default = "default_requests")]
    pub requests: usize,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub swap_budget: Option<usize>,
    #[serde(default)]
    pub d_override: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Shared-tape replay streams for the coupling test.
    #[serde(default)]
    pub replay_streams: usize,
    #[serde(default = "default_stream_length")]
    pub stream_length: usize,
}

fn default_p() -> f64 {
    1.0
}
fn default_d() -> usize {
    2
}
fn default_trials() -> usize {
    1
}
fn default_spread() -> f64 {
    0.05
}
fn default_requests() -> usize {
    10_000
}
fn default_checkpoint() -> usize {
    1_000
}
fn default_alpha() -> f64 {
    0.01
}
fn default_stream_length() -> usize {
    30
}

impl ExperimentConfig {
    /// Config with defaults for everything but the kind, `k` and seed.
    pub fn new(experiment: ExperimentKind, k: usize, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            p: default_p(),
            k,
            d: default_d(),
            n: None,
            trials: default_trials(),
            generator: None,
            spread: default_spread(),
            requests: default_requests(),
            checkpoint_every: default_checkpoint(),
            swap_budget: None,
            d_override: None,
            alpha: default_alpha(),
            replay_streams: 0,
            stream_length: default_stream_length(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// All schema violations at once.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if check_exponent(self.p).is_err() {
            v.push(format!("p must be finite and >= 1 (got {})", self.p));
        }
        for (name, value) in [("k", self.k), ("d", self.d), ("n", self.n.unwrap_or(1)), ("trials", self.trials)] {
            if value == 0 {
                v.push(format!("{name} must be at least 1"));
            }
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            v.push(format!("spread must be non-negative (got {})", self.spread));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            v.push(format!("alpha must lie in (0, 1) (got {})", self.alpha));
        }
        if self.d_override == Some(0) {
            v.push("d_override must be at least 1".into());
        }
        match self.experiment {
            ExperimentKind::Coupling => {
                if self.k > 6 {
                    v.push(format!("coupling needs k <= 6 (got {})", self.k));
                }
                if self.d > 3 {
                    v.push(format!("coupling needs d <= 3 (got {})", self.d));
                }
            }
            ExperimentKind::LowerBound if self.k < 2 => v.push("lower_bound needs k >= 2".into()),
            ExperimentKind::RadiusDecay if self.k < 2 => v.push("radius_decay needs k >= 2".into()),
            _ => {}
        }
        if self.generator == Some(GeneratorKind::Grid) && self.d < 2 {
            v.push("grid generator needs d >= 2".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn points_per_cluster(&self) -> usize {
        self.n.unwrap_or(8)
    }

    pub fn copies(&self) -> usize {
        self.n.unwrap_or(3)
    }

    fn trial_rng(&self, t: usize) -> RngHandle {
        RngHandle::new(self.seed.wrapping_add(t as u64))
    }

    fn centers(&self, rng: &mut RngHandle) -> Result<CenterSet> {
        match self.generator.unwrap_or(GeneratorKind::Uniform) {
            GeneratorKind::Collinear => collinear_centers(self.k, self.d),
            GeneratorKind::Grid => grid_centers(self.k, self.d),
            GeneratorKind::LowerBound => {
                Ok(gen_lower_bound_lp(self.k.max(2), self.p, self.d_override, 0, rng)?.instance.centers)
            }
            GeneratorKind::Gaussian | GeneratorKind::Uniform => uniform_centers(self.k, self.d, 1.0, rng),
        }
    }
}

/// CSV table plus human-readable summary lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub summary: Vec<String>,
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(|e| Error::Internal(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

// ---- competitive ratio ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitiveRow {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub d: usize,
    pub p: f64,
    pub points: usize,
    pub cost_tree: f64,
    pub cost_unconstrained: f64,
    pub ratio: f64,
    pub zero_cost: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitiveReport {
    pub rows: Vec<CompetitiveRow>,
    pub median_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `p (ln k)^(1 + 1/p - 1/p^2)`.
    pub bound_form: f64,
    /// `1 + 3 * bound_form`.
    pub envelope: f64,
}

pub fn competitive_envelope(k: usize, p: f64) -> (f64, f64) {
    let ln_k = (k as f64).ln();
    let e = 1.0 + 1.0 / p - 1.0 / (p * p);
    let form = if ln_k > 0.0 { p * ln_k.powf(e) } else { 0.0 };
    (form, 1.0 + 3.0 * form)
}

/// Per trial: generate data, compute reference centers, build a static tree
/// on them and compare costs.
pub fn run_competitive_experiment(cfg: &ExperimentConfig) -> Result<CompetitiveReport> {
    cfg.validate()?;
    let rows = (0..cfg.trials)
        .into_par_iter()
        .map(|t| competitive_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let (bound_form, envelope) = competitive_envelope(cfg.k, cfg.p);
    Ok(CompetitiveReport {
        median_ratio: median(&ratios),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        rows,
        bound_form,
        envelope,
    })
}

fn competitive_trial(cfg: &ExperimentConfig, t: usize) -> Result<CompetitiveRow> {
    let rng = cfg.trial_rng(t);
    let points: Vec<Point> = match cfg.generator.unwrap_or(GeneratorKind::Gaussian) {
        GeneratorKind::Gaussian => gen_gaussian_mixture(cfg.k, cfg.d, cfg.points_per_cluster(), cfg.spread, cfg.p, &mut rng.split(1))?
            .instance
            .points,
        GeneratorKind::LowerBound => gen_lower_bound_lp(cfg.k, cfg.p, cfg.d_override, cfg.copies(), &mut rng.split(1))?
            .instance
            .points,
        _ => {
            let mut r = rng.split(1);
            (0..cfg.k * cfg.points_per_cluster())
                .map(|_| Point::new((0..cfg.d).map(|_| r.uniform_range(-1.0, 1.0)).collect()))
                .collect::<Result<_>>()?
        }
    };
    let budget = cfg.swap_budget.unwrap_or(4 * cfg.k + 16);
    let reference = reference_kmedians_with_budget(&points, cfg.k, cfg.p, budget, &mut rng.split(2))?;
    let tree = build_tree_static(&reference.centers, cfg.p, &rng.split(3))?;
    let ct = cost_tree(&points, &tree, &reference.centers, cfg.p)?;
    let cu = cost_unconstrained(&points, &reference.centers, cfg.p)?;
    let (ratio, zero_cost) = cost_ratio(ct, cu);
    Ok(CompetitiveRow {
        trial: t,
        seed: rng.seed(),
        k: cfg.k,
        d: points.first().map_or(cfg.d, Point::dim),
        p: cfg.p,
        points: points.len(),
        cost_tree: ct,
        cost_unconstrained: cu,
        ratio,
        zero_cost,
    })
}

impl CompetitiveReport {
    pub fn output(&self) -> Result<ExperimentOutput> {
        let zero = self.rows.iter().filter(|r| r.zero_cost).count();
        let mut summary = vec![
            format!(
                "competitive: {} trials, median ratio {:.4}, min {:.4}, max {:.4}",
                self.rows.len(),
                self.median_ratio,
                self.min_ratio,
                self.max_ratio
            ),
            format!(
                "envelope 1 + 3 p (ln k)^(1+1/p-1/p^2) = {:.4} (bound form {:.4})",
                self.envelope, self.bound_form
            ),
        ];
        if zero > 0 {
            summary.push(format!("{zero} zero-cost trials reported with ratio 1"));
        }
        Ok(ExperimentOutput {
            csv: to_csv(
                &self.rows,
                &["trial", "seed", "k", "d", "p", "points", "cost_tree", "cost_unconstrained", "ratio", "zero_cost"],
            )?,
            summary,
        })
    }
}

// ---- dynamic maintenance ----

/// One ledger line per processed request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub request_index: usize,
    pub op: &'static str,
    pub recourse: usize,
    pub touched_nodes: usize,
    pub rebuild_fired: bool,
    pub wall_nanos: u64,
}

impl LedgerRow {
    pub fn new(request_index: usize, request: &Request, stats: &RequestStats, wall_nanos: u64) -> Self {
        Self {
            request_index,
            op: match request {
                Request::Insert { .. } => "insert",
                Request::Delete { .. } => "delete",
            },
            recourse: stats.recourse,
            touched_nodes: stats.touched_nodes,
            rebuild_fired: stats.rebuild_fired,
            wall_nanos,
        }
    }
}

pub const LEDGER_HEADER: [&str; 6] = ["request_index", "op", "recourse", "touched_nodes", "rebuild_fired", "wall_nanos"];

pub fn ledger_csv(rows: &[LedgerRow]) -> Result<String> {
    to_csv(rows, &LEDGER_HEADER)
}

/// Warmup of `k` inserts, then `count` requests that keep the live size in
/// `[k/2, k]`: insert at the lower end, delete at the upper end, otherwise
/// either with equal probability. Inserted points are uniform in
/// `[-1, 1]^d`; deletes name a uniformly random live id. Ids are assigned
/// `0, 1, 2, ...` in insertion order.
pub fn generate_request_stream(k: usize, d: usize, count: usize, rng: &mut RngHandle) -> Vec<Request> {
    let mut out = Vec::with_capacity(k + count);
    let mut live: Vec<CenterId> = Vec::new();
    let mut next = 0u64;
    let lo = k / 2;
    for i in 0..k + count {
        let insert = if i < k || live.len() <= lo {
            true
        } else if live.len() >= k {
            false
        } else {
            rng.uniform() < 0.5
        };
        if insert {
            out.push(Request::Insert {
                coords: (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            });
            live.push(CenterId(next));
            next += 1;
        } else {
            let id = live.swap_remove(rng.index(live.len()));
            out.push(Request::Delete { id });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicCheckpoint {
    pub trial: usize,
    pub request_index: usize,
    pub live_centers: usize,
    pub cost_dynamic: f64,
    pub cost_static: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTrial {
    pub ledger: Vec<LedgerRow>,
    pub checkpoints: Vec<DynamicCheckpoint>,
    pub amortized_recourse: f64,
    pub amortized_touched: f64,
    pub amortized_wall_nanos: f64,
    pub rebuild_requests: usize,
    /// Non-rebuild requests whose recourse exceeds 2 or twice the levels visited.
    pub non_rebuild_violations: usize,
    pub max_non_rebuild_recourse: usize,
    pub final_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicReport {
    pub k: usize,
    pub trials: Vec<DynamicTrial>,
}

impl DynamicReport {
    pub fn amortized_recourse(&self) -> f64 {
        mean(self.trials.iter().map(|t| t.amortized_recourse))
    }

    pub fn amortized_touched(&self) -> f64 {
        mean(self.trials.iter().map(|t| t.amortized_touched))
    }

    pub fn non_rebuild_violations(&self) -> usize {
        self.trials.iter().map(|t| t.non_rebuild_violations).sum()
    }

    pub fn output(&self) -> Result<ExperimentOutput> {
        #[derive(Serialize)]
        struct Row {
            trial: usize,
            request_index: usize,
            op: &'static str,
            recourse: usize,
            touched_nodes: usize,
            rebuild_fired: bool,
            wall_nanos: u64,
        }
        let rows: Vec<Row> = self
            .trials
            .iter()
            .enumerate()
            .flat_map(|(trial, t)| {
                t.ledger.iter().map(move |r| Row {
                    trial,
                    request_index: r.request_index,
                    op: r.op,
                    recourse: r.recourse,
                    touched_nodes: r.touched_nodes,
                    rebuild_fired: r.rebuild_fired,
                    wall_nanos: r.wall_nanos,
                })
            })
            .collect();
        let mut header = vec!["trial"];
        header.extend(LEDGER_HEADER);
        let mut summary = vec![format!(
            "dynamic: k = {}, amortized recourse {:.3} (20 log2 k = {:.1}), amortized touched nodes {:.3}",
            self.k,
            self.amortized_recourse(),
            20.0 * (self.k.max(2) as f64).log2(),
            self.amortized_touched()
        )];
        for (i, t) in self.trials.iter().enumerate() {
            summary.push(format!(
                "trial {i}: {} requests, {} rebuilds, max non-rebuild recourse {}, {} violations, {:.0} ns/request",
                t.ledger.len(),
                t.rebuild_requests,
                t.max_non_rebuild_recourse,
                t.non_rebuild_violations,
                t.amortized_wall_nanos
            ));
            if !t.checkpoints.is_empty() {
                let r: Vec<f64> = t.checkpoints.iter().map(|c| c.ratio).collect();
                summary.push(format!("  checkpoint cost ratio dynamic/static: median {:.4}", median(&r)));
            }
        }
        Ok(ExperimentOutput {
            csv: to_csv(&rows, &header)?,
            summary,
        })
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Feeds a generated request stream to a [`DynamicTree`] in `[-1, 1]^d` and
/// records the per-request ledger. Every `checkpoint_every` requests the
/// tree's cost on a fixed probe sample is compared with a freshly built
/// static tree over the same centers.
pub fn run_dynamic_experiment(cfg: &ExperimentConfig) -> Result<DynamicReport> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| dynamic_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(DynamicReport { k: cfg.k, trials })
}

fn dynamic_trial(cfg: &ExperimentConfig, trial: usize) -> Result<DynamicTrial> {
    let master = cfg.trial_rng(trial);
    let requests = generate_request_stream(cfg.k, cfg.d, cfg.requests, &mut master.split(STREAM_KEY));
    let mut probe_rng = master.split(PROBE_KEY);
    let probe: Vec<Point> = (0..256)
        .map(|_| Point::new((0..cfg.d).map(|_| probe_rng.uniform_range(-1.0, 1.0)).collect()))
        .collect::<Result<_>>()?;
    let config = DynamicConfig::boxed(cfg.p, cfg.d, 1.0)?;
    let mut tree = DynamicTree::new(config, master.split(TREE_KEY))?;

    let mut ledger = Vec::with_capacity(requests.len());
    let mut checkpoints = Vec::new();
    for (i, req) in requests.iter().enumerate() {
        let start = Instant::now();
        let (_, stats) = tree.process(req)?;
        let nanos = start.elapsed().as_nanos() as u64;
        ledger.push(LedgerRow::new(i, req, &stats, nanos));
        if cfg.checkpoint_every > 0 && (i + 1) % cfg.checkpoint_every == 0 {
            if let Some(t) = tree.tree() {
                let fresh = build_tree_static(tree.centers(), cfg.p, &master.split_path(&[PROBE_KEY, i as u64]))?;
                let cd = cost_tree(&probe, &t, tree.centers(), cfg.p)?;
                let cs = cost_tree(&probe, &fresh, tree.centers(), cfg.p)?;
                checkpoints.push(DynamicCheckpoint {
                    trial,
                    request_index: i,
                    live_centers: tree.len(),
                    cost_dynamic: cd,
                    cost_static: cs,
                    ratio: cost_ratio(cd, cs).0,
                });
            }
        }
    }
    let n = ledger.len().max(1) as f64;
    let mut violations = 0;
    let mut max_nr = 0;
    for s in tree.ledger() {
        if !s.rebuild_fired {
            max_nr = max_nr.max(s.recourse);
            if s.recourse > 2 || s.recourse > 2 * s.levels {
                violations += 1;
            }
        }
    }
    Ok(DynamicTrial {
        amortized_recourse: ledger.iter().map(|r| r.recourse as f64).sum::<f64>() / n,
        amortized_touched: ledger.iter().map(|r| r.touched_nodes as f64).sum::<f64>() / n,
        amortized_wall_nanos: ledger.iter().map(|r| r.wall_nanos as f64).sum::<f64>() / n,
        rebuild_requests: ledger.iter().filter(|r| r.rebuild_fired).count(),
        non_rebuild_violations: violations,
        max_non_rebuild_recourse: max_nr,
        final_size: tree.len(),
        ledger,
        checkpoints,
    })
}

// ---- coupling ----

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub k: usize,
    pub replay_streams: usize,
    pub replay_requests: usize,
    pub replay_mismatches: usize,
    pub first_mismatch: Option<String>,
    pub dynamic_shapes: BTreeMap<String, usize>,
    pub static_shapes: BTreeMap<String, usize>,
    pub chi_square: ChiSquareResult,
    pub alpha: f64,
}

impl CouplingReport {
    /// With at most two centers only one unlabeled topology exists.
    pub fn trivially_satisfied(&self) -> bool {
        self.k <= 2 || self.chi_square.categories < 2
    }

    pub fn chi_square_passed(&self) -> bool {
        self.chi_square.p_value > self.alpha
    }

    pub fn output(&self) -> Result<ExperimentOutput> {
        #[derive(Serialize)]
        struct Row<'a> {
            shape: &'a str,
            dynamic: usize,
            r#static: usize,
        }
        let mut keys: Vec<&String> = self.dynamic_shapes.keys().chain(self.static_shapes.keys()).collect();
        keys.sort();
        keys.dedup();
        let rows: Vec<Row<'_>> = keys
            .into_iter()
            .map(|k| Row {
                shape: k,
                dynamic: *self.dynamic_shapes.get(k).unwrap_or(&0),
                r#static: *self.static_shapes.get(k).unwrap_or(&0),
            })
            .collect();
        let mut summary = Vec::new();
        if self.replay_streams > 0 {
            summary.push(format!(
                "shared-tape replay: {} streams, {} requests, {} mismatches",
                self.replay_streams, self.replay_requests, self.replay_mismatches
            ));
            if let Some(m) = &self.first_mismatch {
                summary.push(format!("first mismatch: {m}"));
            }
        }
        if self.trivially_satisfied() {
            summary.push("chi-square trivially satisfied (a single tree topology)".into());
        }
        if self.chi_square.categories >= 2 {
            summary.push(format!(
                "chi-square over {} shape bins: statistic {:.3}, dof {}, p = {:.4} ({} at alpha = {})",
                self.chi_square.categories,
                self.chi_square.statistic,
                self.chi_square.dof,
                self.chi_square.p_value,
                if self.chi_square_passed() { "pass" } else { "fail" },
                self.alpha
            ));
        }
        Ok(ExperimentOutput {
            csv: to_csv(&rows, &["shape", "dynamic", "static"])?,
            summary,
        })
    }
}

/// Random request stream over at most `k` live centers in `[-1, 1]^d`.
fn small_stream(k: usize, d: usize, len: usize, rng: &mut RngHandle) -> Vec<Request> {
    let mut live: Vec<CenterId> = Vec::new();
    let mut next = 0;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        if live.is_empty() || (live.len() < k && rng.uniform() < 0.6) {
            out.push(Request::Insert {
                coords: (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            });
            live.push(CenterId(next));
            next += 1;
        } else {
            out.push(Request::Delete {
                id: live.swap_remove(rng.index(live.len())),
            });
        }
    }
    out
}

/// Shared-tape replay over `replay_streams` random request streams, then a
/// chi-square comparison of tree shapes built from scratch by the dynamic
/// and static builders with independent seeds (`trials` seeds each).
pub fn run_coupling_test(cfg: &ExperimentConfig) -> Result<CouplingReport> {
    cfg.validate()?;
    let config = DynamicConfig::boxed(cfg.p, cfg.d, 1.0)?;
    let replays = (0..cfg.replay_streams)
        .into_par_iter()
        .map(|s| -> Result<(usize, Option<String>)> {
            let mut rng = cfg.trial_rng(s).split(STREAM_KEY);
            let k = 1 + rng.index(cfg.k);
            let stream = small_stream(k, cfg.d, cfg.stream_length, &mut rng);
            let mut tree = DynamicTree::new(config, cfg.trial_rng(s).split(TREE_KEY))?;
            let mut mismatches = 0;
            let mut first = None;
            for (i, req) in stream.iter().enumerate() {
                tree.process(req)?;
                let replay = tree.replay_static();
                let ok = matches!(&replay, Ok(r) if *r == tree.tree());
                if !ok {
                    mismatches += 1;
                    first.get_or_insert_with(|| format!("stream {s}, request {i}: {replay:?}"));
                }
            }
            Ok((mismatches, first))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut base = cfg.trial_rng(0).split(PROBE_KEY);
    let centers = cfg.centers(&mut base)?;
    let shapes = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(String, String)> {
            let rng = cfg.trial_rng(t);
            let dynamic = DynamicTree::from_centers(centers.clone(), config, rng.split(TREE_KEY))?
                .tree()
                .ok_or(Error::EmptyCenters)?
                .shape_key();
            let fixed = build_tree_static(&centers, cfg.p, &rng.split(STREAM_KEY))?.shape_key();
            Ok((dynamic, fixed))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dynamic_shapes = BTreeMap::new();
    let mut static_shapes = BTreeMap::new();
    for (a, b) in shapes {
        *dynamic_shapes.entry(a).or_insert(0) += 1;
        *static_shapes.entry(b).or_insert(0) += 1;
    }
    let chi_square = chi_square_homogeneity(&dynamic_shapes, &static_shapes);
    Ok(CouplingReport {
        k: cfg.k,
        replay_streams: cfg.replay_streams,
        replay_requests: cfg.replay_streams * cfg.stream_length,
        replay_mismatches: replays.iter().map(|r| r.0).sum(),
        first_mismatch: replays.into_iter().find_map(|r| r.1),
        dynamic_shapes,
        static_shapes,
        chi_square,
        alpha: cfg.alpha,
    })
}

// ---- lower bound instances ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub p: f64,
    pub d_formula: usize,
    pub d: usize,
    pub epsilon: f64,
    pub min_pair_normalized: f64,
    pub separation_pass: bool,
    pub cost_unconstrained: f64,
    pub certified_bound: f64,
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub rows: Vec<LowerBoundRow>,
}

impl LowerBoundReport {
    pub fn separation_failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.separation_pass).count()
    }

    pub fn bound_failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.bound_holds).count()
    }

    pub fn output(&self) -> Result<ExperimentOutput> {
        let n = self.rows.len();
        let mut summary = Vec::new();
        if let Some(r) = self.rows.first() {
            summary.push(format!(
                "lower bound grid: k = {}, p = {}, d = {} (formula {}), epsilon = {:.4}",
                r.k, r.p, r.d, r.d_formula, r.epsilon
            ));
        }
        summary.push(format!(
            "separation check passed on {}/{} seeds; certified bound held on {}/{}",
            n - self.separation_failures(),
            n,
            n - self.bound_failures(),
            n
        ));
        Ok(ExperimentOutput {
            csv: to_csv(
                &self.rows,
                &[
                    "trial",
                    "seed",
                    "k",
                    "p",
                    "d_formula",
                    "d",
                    "epsilon",
                    "min_pair_normalized",
                    "separation_pass",
                    "cost_unconstrained",
                    "certified_bound",
                    "bound_holds",
                ],
            )?,
            summary,
        })
    }
}

pub fn run_lower_bound_experiment(cfg: &ExperimentConfig) -> Result<LowerBoundReport> {
    cfg.validate()?;
    let copies = cfg.copies();
    let rows = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<LowerBoundRow> {
            let mut rng = cfg.trial_rng(t);
            let lb = gen_lower_bound_lp(cfg.k, cfg.p, cfg.d_override, copies, &mut rng)?;
            let sep = check_center_separation(&lb.instance.centers, cfg.p);
            let (cost, holds) = certified_bound_holds(&lb)?;
            Ok(LowerBoundRow {
                trial: t,
                seed: rng.seed(),
                k: cfg.k,
                p: cfg.p,
                d_formula: lb.d_formula,
                d: lb.d,
                epsilon: lb.epsilon,
                min_pair_normalized: sep.normalized,
                separation_pass: sep.passed,
                cost_unconstrained: cost,
                certified_bound: lb.certified_bound,
                bound_holds: holds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LowerBoundReport { rows })
}

// ---- radius decay ----

/// `ceil(2^(p+3) d ln k)`.
pub fn radius_decay_horizon(p: f64, d: usize, k: usize) -> usize {
    (2f64.powf(p + 3.0) * d as f64 * (k as f64).ln()).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusDecayRow {
    pub trial: usize,
    pub sampled_steps: usize,
    pub applied_cuts: usize,
    /// Halvings observed within the trace.
    pub halvings: usize,
    pub median_halving_steps: f64,
    pub max_halving_steps: usize,
    pub non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusDecayReport {
    pub horizon: usize,
    pub rows: Vec<RadiusDecayRow>,
}

impl RadiusDecayReport {
    pub fn output(&self) -> Result<ExperimentOutput> {
        let max = self.rows.iter().map(|r| r.max_halving_steps).max().unwrap_or(0);
        let beyond = self.rows.iter().filter(|r| r.max_halving_steps > self.horizon).count();
        Ok(ExperimentOutput {
            csv: to_csv(
                &self.rows,
                &[
                    "trial",
                    "sampled_steps",
                    "applied_cuts",
                    "halvings",
                    "median_halving_steps",
                    "max_halving_steps",
                    "non_increasing",
                ],
            )?,
            summary: vec![
                format!("radius decay: horizon L = {}", self.horizon),
                format!(
                    "longest observed halving: {max} sampled steps; {beyond}/{} trials exceeded L",
                    self.rows.len()
                ),
            ],
        })
    }
}

/// Steps until the radius first drops to half of its value at each step,
/// for every step where that happens within the trace.
pub fn halving_horizons(radii: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for (t, &r) in radii.iter().enumerate() {
        if let Some(s) = radii[t + 1..].iter().position(|&x| x <= r / 2.0) {
            out.push(s + 1);
        }
    }
    out
}

pub fn empirical_radius_decay(cfg: &ExperimentConfig) -> Result<RadiusDecayReport> {
    cfg.validate()?;
    let mut base = cfg.trial_rng(0).split(PROBE_KEY);
    let centers = cfg.centers(&mut base)?;
    let ids: Vec<CenterId> = centers.ids().collect();
    let rows = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<RadiusDecayRow> {
            let mut rng = cfg.trial_rng(t);
            let out = partition_leaf_static(&centers, &ids, cfg.p, &mut rng)?;
            let radii: Vec<f64> = out.trace.iter().map(|s| s.radius).collect();
            let h = halving_horizons(&radii);
            Ok(RadiusDecayRow {
                trial: t,
                sampled_steps: radii.len(),
                applied_cuts: out.applied_cuts(),
                halvings: h.len(),
                median_halving_steps: if h.is_empty() {
                    0.0
                } else {
                    median(&h.iter().map(|&x| x as f64).collect::<Vec<_>>())
                },
                max_halving_steps: h.iter().copied().max().unwrap_or(0),
                non_increasing: radii.windows(2).all(|w| w[1] <= w[0]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RadiusDecayReport {
        horizon: radius_decay_horizon(cfg.p, cfg.d, cfg.k),
        rows,
    })
}

// ---- fully dynamic composition ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullyDynamicRow {
    pub trial: usize,
    pub point_requests: usize,
    pub center_updates: usize,
    pub total_recourse: usize,
    pub amortized_recourse: f64,
    pub max_centers: usize,
    pub median_checkpoint_ratio: f64,
}

pub fn run_fully_dynamic_experiment(cfg: &ExperimentConfig) -> Result<Vec<FullyDynamicRow>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let rng = cfg.trial_rng(t);
            let requests = point_request_stream(cfg.d, 2 * cfg.k, cfg.requests, &mut rng.split(STREAM_KEY));
            let mut clusterer = NaiveRecompute::new(cfg.k, cfg.p, rng.split(PROBE_KEY));
            let config = DynamicConfig::boxed(cfg.p, cfg.d, 1.0)?;
            let r = run_fully_dynamic(&requests, &mut clusterer, config, cfg.checkpoint_every, rng.split(TREE_KEY))?;
            let ratios: Vec<f64> = r.checkpoints.iter().map(|c| c.ratio).collect();
            Ok(FullyDynamicRow {
                trial: t,
                point_requests: r.point_requests,
                center_updates: r.center_updates,
                total_recourse: r.total_recourse,
                amortized_recourse: r.amortized_recourse,
                max_centers: r.max_centers,
                median_checkpoint_ratio: if ratios.is_empty() { 1.0 } else { median(&ratios) },
            })
        })
        .collect()
}

/// Runs the experiment selected by `cfg.experiment`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentKind::Competitive => run_competitive_experiment(cfg)?.output(),
        ExperimentKind::Dynamic => run_dynamic_experiment(cfg)?.output(),
        ExperimentKind::Coupling => run_coupling_test(cfg)?.output(),
        ExperimentKind::LowerBound => run_lower_bound_experiment(cfg)?.output(),
        ExperimentKind::RadiusDecay => empirical_radius_decay(cfg)?.output(),
        ExperimentKind::FullyDynamic => {
            let rows = run_fully_dynamic_experiment(cfg)?;
            let amortized = mean(rows.iter().map(|r| r.amortized_recourse));
            Ok(ExperimentOutput {
                csv: to_csv(
                    &rows,
                    &[
                        "trial",
                        "point_requests",
                        "center_updates",
                        "total_recourse",
                        "amortized_recourse",
                        "max_centers",
                        "median_checkpoint_ratio",
                    ],
                )?,
                summary: vec![format!(
                    "fully dynamic (recompute every ceil(k/2) requests): amortized tree recourse {amortized:.3} per point request"
                )],
            })
        }
    }
}
