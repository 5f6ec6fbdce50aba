//! Lazily realized Poisson cut streams around a fixed anchor.
//!
//! Candidate cuts arrive as a Poisson process in time. Each cut draws a
//! coordinate and a sign uniformly and an offset `theta` from the anchor with
//! `theta^p` uniform on `[0, N]`; its threshold is `m_i + sigma * theta`.
//! Splitting by `(coordinate, sign)` gives `2d` independent substreams, each
//! with intensity `(1 / 2d) * d(theta^p) / N` over offsets.
//!
//! A substream is never simulated in full. Each [`SubstreamIndex`] keeps an
//! ordered map from queried offsets `y` to the earliest cut with offset in
//! `(0, y]`; a new query either inherits its upper neighbour's cut (when that
//! cut's offset is at most `y`) or draws the first arrival in
//! `(y_prev, y]` after the upper neighbour's time, then keeps the earlier of
//! that draw and the lower neighbour's cut.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_exponent, Cut, Point, Sign};
use crate::rng::RngHandle;

/// A realized candidate cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutEvent {
    pub coordinate: usize,
    pub sign: Sign,
    /// Distance `theta > 0` of the threshold from the anchor along the axis.
    pub offset: f64,
    pub timestamp: f64,
}

impl CutEvent {
    pub fn to_cut(&self, anchor: &Point) -> Cut {
        Cut {
            coordinate: self.coordinate,
            threshold: anchor.get(self.coordinate) + self.sign.value() * self.offset,
            sign: self.sign,
            timestamp: Some(self.timestamp),
        }
    }

    /// Whether this event puts `c` on the far side from `anchor`.
    pub fn separates(&self, anchor: &Point, c: &[f64]) -> bool {
        let delta = c[self.coordinate] - anchor.get(self.coordinate);
        delta * self.sign.value() > 0.0 && self.offset <= delta.abs()
    }
}

/// Timestamp normalizer `N`: rates scale with `1 / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer(f64);

impl Normalizer {
    pub fn new(n: f64) -> Result<Self> {
        if n > 0.0 && n.is_finite() {
            Ok(Self(n))
        } else {
            Err(Error::Config(format!("normalizer must be positive and finite, got {n}")))
        }
    }

    /// `(2 * half_width)^p`: offsets inside a box `[-h, h]^d` never exceed `2h`.
    pub fn boxed(p: f64, half_width: f64) -> Self {
        Self((2.0 * half_width).powf(p))
    }

    /// Normalizer-free variant; all timestamps are rescaled by a constant.
    pub fn unit() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Earliest-cut map for one `(coordinate, sign)` substream.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstreamIndex {
    pub coordinate: usize,
    pub sign: Sign,
    pub anchor_coord: f64,
    entries: BTreeMap<OrderedFloat<f64>, CutEvent>,
}

impl SubstreamIndex {
    fn new(coordinate: usize, sign: Sign, anchor_coord: f64) -> Self {
        Self {
            coordinate,
            sign,
            anchor_coord,
            entries: BTreeMap::new(),
        }
    }

    /// Largest queried offset so far (0 when empty).
    pub fn frontier(&self) -> f64 {
        self.entries.keys().next_back().map_or(0.0, |k| k.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (f64, &CutEvent)> {
        self.entries.iter().map(|(k, e)| (k.0, e))
    }

    pub fn get(&self, y: f64) -> Option<&CutEvent> {
        self.entries.get(&OrderedFloat(y))
    }
}

/// Stream parameters shared by all substreams of one anchor.
#[derive(Debug, Clone, Copy)]
pub struct StreamLaw {
    pub p: f64,
    /// Per-substream base rate, `1 / 2d`.
    pub base_rate: f64,
    pub normalizer: Normalizer,
}

impl StreamLaw {
    pub fn new(p: f64, dim: usize, normalizer: Normalizer) -> Self {
        Self {
            p,
            base_rate: 1.0 / (2.0 * dim as f64),
            normalizer,
        }
    }

    /// Arrival rate of substream cuts with offsets in `(a, b]`.
    pub fn rate(&self, a: f64, b: f64) -> f64 {
        self.base_rate * (b.powf(self.p) - pow_or_zero(a, self.p)) / self.normalizer.value()
    }
}

fn pow_or_zero(a: f64, p: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.powf(p)
    }
}

/// Realizes (lazily) the earliest cut of `s` separating offset `y` from the
/// anchor and stores it under `y`.
pub fn extend_substream(s: &mut SubstreamIndex, y: f64, law: &StreamLaw, rng: &mut RngHandle) -> Result<CutEvent> {
    if y.is_nan() || y <= 0.0 || y.is_infinite() {
        return Err(Error::NonPositiveOffset(y));
    }
    let key = OrderedFloat(y);
    if let Some(e) = s.entries.get(&key) {
        return Ok(*e);
    }
    let prev = s.entries.range(..key).next_back().map(|(k, e)| (k.0, *e));
    let next = s.entries.range(key..).next().map(|(_, e)| *e);

    if let Some(next) = next {
        if next.offset <= y {
            s.entries.insert(key, next);
            return Ok(next);
        }
    }

    let y_prev = prev.map_or(0.0, |(k, _)| k);
    let lo = pow_or_zero(y_prev, law.p);
    let hi = y.powf(law.p);
    let offset = loop {
        let u = rng.uniform_range(lo, hi);
        if u > 0.0 {
            break (u.ln() / law.p).exp().min(y);
        }
    };
    // Nothing in (y_prev, y] arrived before the upper neighbour's cut.
    let base = next.map_or(0.0, |e| e.timestamp);
    let rate = law.rate(y_prev, y);
    let timestamp = if rate > 0.0 {
        base + rng.exponential(rate)
    } else {
        f64::INFINITY
    };
    let candidate = CutEvent {
        coordinate: s.coordinate,
        sign: s.sign,
        offset,
        timestamp,
    };
    let stored = match prev {
        Some((_, e)) if e.timestamp <= candidate.timestamp => e,
        _ => candidate,
    };
    if !stored.timestamp.is_finite() {
        return Err(Error::Internal(format!("degenerate substream interval at offset {y}")));
    }
    s.entries.insert(key, stored);
    Ok(stored)
}

/// Earliest-cut index for one anchor: `2d` lazily realized substreams.
#[derive(Debug, Clone)]
pub struct EarliestCutIndex {
    anchor: Point,
    law: StreamLaw,
    substreams: Vec<SubstreamIndex>,
    rng: RngHandle,
}

impl EarliestCutIndex {
    pub fn new(anchor: Point, p: f64, rng: RngHandle, normalizer: Normalizer) -> Result<Self> {
        check_exponent(p)?;
        let d = anchor.dim();
        let substreams = (0..d)
            .flat_map(|i| [Sign::Minus, Sign::Plus].map(|s| SubstreamIndex::new(i, s, anchor.get(i))))
            .collect();
        Ok(Self {
            law: StreamLaw::new(p, d, normalizer),
            anchor,
            substreams,
            rng,
        })
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn law(&self) -> &StreamLaw {
        &self.law
    }

    pub fn normalizer(&self) -> Normalizer {
        self.law.normalizer
    }

    pub fn substreams(&self) -> &[SubstreamIndex] {
        &self.substreams
    }

    pub fn substream(&self, coordinate: usize, sign: Sign) -> &SubstreamIndex {
        &self.substreams[2 * coordinate + sign.slot()]
    }

    /// Number of realized entries across all substreams.
    pub fn realized(&self) -> usize {
        self.substreams.iter().map(SubstreamIndex::len).sum()
    }

    /// Earliest event separating `c` from the anchor, or `None` when
    /// `c` equals the anchor.
    pub fn earliest_event(&mut self, c: &[f64]) -> Result<Option<CutEvent>> {
        if c.len() != self.anchor.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.anchor.dim(),
                actual: c.len(),
            });
        }
        let mut best: Option<CutEvent> = None;
        for (i, &ci) in c.iter().enumerate() {
            let delta = ci - self.anchor.get(i);
            if delta == 0.0 {
                continue;
            }
            let sign = if delta > 0.0 { Sign::Plus } else { Sign::Minus };
            let s = &mut self.substreams[2 * i + sign.slot()];
            let e = extend_substream(s, delta.abs(), &self.law, &mut self.rng)?;
            if best.is_none_or(|b| e.timestamp < b.timestamp) {
                best = Some(e);
            }
        }
        Ok(best)
    }

    /// Earliest separating cut as a timestamped [`Cut`].
    pub fn get_earliest_cut(&mut self, c: &[f64]) -> Result<(Cut, f64)> {
        let e = self.earliest_event(c)?.ok_or(Error::NoSeparatingCut)?;
        Ok((e.to_cut(&self.anchor), e.timestamp))
    }

    /// Read-only lookup. `None` if some needed offset was never realized;
    /// `Some(None)` if `c` equals the anchor.
    pub fn peek_earliest(&self, c: &[f64]) -> Option<Option<CutEvent>> {
        let mut best: Option<CutEvent> = None;
        for (i, &ci) in c.iter().enumerate() {
            let delta = ci - self.anchor.get(i);
            if delta == 0.0 {
                continue;
            }
            let sign = if delta > 0.0 { Sign::Plus } else { Sign::Minus };
            let e = *self.substream(i, sign).get(delta.abs())?;
            if best.is_none_or(|b| e.timestamp < b.timestamp) {
                best = Some(e);
            }
        }
        Some(best)
    }

    /// JSON dump of every realized substream entry.
    pub fn debug_dump(&self) -> serde_json::Value {
        let streams: Vec<_> = self
            .substreams
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| {
                serde_json::json!({
                    "coord": s.coordinate,
                    "sign": s.sign,
                    "anchor": s.anchor_coord,
                    "entries": s.entries().map(|(y, e)| serde_json::json!({
                        "query": y,
                        "offset": e.offset,
                        "timestamp": e.timestamp,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "anchor": self.anchor.coords(), "p": self.law.p, "substreams": streams })
    }
}

/// Direct simulation of the full candidate stream, in time order.
#[derive(Debug, Clone)]
pub struct BruteForceStream {
    dim: usize,
    p: f64,
    normalizer: f64,
    time: f64,
    rng: RngHandle,
}

impl BruteForceStream {
    pub fn new(dim: usize, p: f64, rng: RngHandle, normalizer: Normalizer) -> Self {
        Self {
            dim,
            p,
            normalizer: normalizer.value(),
            time: 0.0,
            rng,
        }
    }
}

impl Iterator for BruteForceStream {
    type Item = CutEvent;

    fn next(&mut self) -> Option<CutEvent> {
        self.time += self.rng.exponential(1.0);
        let coordinate = self.rng.index(self.dim);
        let sign = if self.rng.sign() > 0 { Sign::Plus } else { Sign::Minus };
        let offset = loop {
            let z = self.rng.uniform() * self.normalizer;
            if z > 0.0 {
                break (z.ln() / self.p).exp();
            }
        };
        Some(CutEvent {
            coordinate,
            sign,
            offset,
            timestamp: self.time,
        })
    }
}

/// All candidate events with timestamp at most `horizon`.
pub fn brute_force_stream_prefix(
    anchor: &Point,
    p: f64,
    horizon: f64,
    rng: RngHandle,
    normalizer: Normalizer,
) -> Vec<CutEvent> {
    BruteForceStream::new(anchor.dim(), p, rng, normalizer)
        .take_while(|e| e.timestamp <= horizon)
        .collect()
}

/// First event in `events` separating `c` from `anchor`; `None` means the
/// answer lies beyond the simulated horizon.
pub fn oracle_earliest_cut(events: &[CutEvent], anchor: &Point, c: &[f64]) -> Option<(Cut, f64)> {
    events
        .iter()
        .find(|e| e.separates(anchor, c))
        .map(|e| (e.to_cut(anchor), e.timestamp))
}
