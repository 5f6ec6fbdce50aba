//! Unconstrained reference k-medians: distance-weighted seeding followed by
//! single-swap local search over data points.

use std::collections::HashSet;

use crate::cost::lp_dist;
use crate::error::{Error, Result};
use crate::model::{check_exponent, CenterSet, Point};
use crate::rng::RngHandle;

/// Largest point-by-candidate distance table kept in memory (entries).
const MAX_TABLE: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub centers: CenterSet,
    pub cost: f64,
    /// Cost after seeding and after every accepted swap.
    pub cost_history: Vec<f64>,
    pub swaps: usize,
    /// False when the swap budget ran out before a local optimum.
    pub converged: bool,
}

/// Default swap budget `4k + 16`.
pub fn reference_kmedians(points: &[Point], k: usize, p: f64, rng: &mut RngHandle) -> Result<CenterSet> {
    Ok(reference_kmedians_with_budget(points, k, p, 4 * k + 16, rng)?.centers)
}

pub fn reference_kmedians_with_budget(
    points: &[Point],
    k: usize,
    p: f64,
    swap_budget: usize,
    rng: &mut RngHandle,
) -> Result<ReferenceSolution> {
    check_exponent(p)?;
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    let distinct: Vec<&Point> = points
        .iter()
        .filter(|x| seen.insert(x.coords().iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .collect();
    if distinct.len() < k {
        return Err(Error::TooFewPoints {
            needed: k,
            actual: distinct.len(),
        });
    }
    let n = points.len();
    let dist = |a: &Point, b: &Point| lp_dist(a.coords(), b.coords(), p);

    // seeding: first center uniform, then proportional to current distance
    let mut chosen: Vec<usize> = vec![rng.index(distinct.len())];
    let mut near: Vec<f64> = distinct.iter().map(|x| dist(x, distinct[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = near.iter().sum();
        let mut r = rng.uniform() * total;
        let mut pick = None;
        for (i, &w) in near.iter().enumerate() {
            if w > 0.0 {
                pick = Some(i);
                if r < w {
                    break;
                }
                r -= w;
            }
        }
        let pick = pick.expect("a point at positive distance exists while fewer than k centers are chosen");
        chosen.push(pick);
        for (i, x) in distinct.iter().enumerate() {
            near[i] = near[i].min(dist(x, distinct[pick]));
        }
    }

    let mut is_center = vec![false; distinct.len()];
    for &c in &chosen {
        is_center[c] = true;
    }
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut nearest = vec![0usize; n];
    // point-to-candidate distances, cached when the table is small enough
    let m = distinct.len();
    let table: Option<Vec<f64>> = (n.saturating_mul(m) <= MAX_TABLE).then(|| {
        points
            .iter()
            .flat_map(|x| distinct.iter().map(move |c| dist(x, c)))
            .collect()
    });
    let between = |xi: usize, c: usize| match &table {
        Some(t) => t[xi * m + c],
        None => dist(&points[xi], distinct[c]),
    };
    let assign = |chosen: &[usize], d1: &mut [f64], d2: &mut [f64], nearest: &mut [usize]| -> f64 {
        for xi in 0..n {
            let (mut b1, mut b2, mut j1) = (f64::INFINITY, f64::INFINITY, 0);
            for (j, &c) in chosen.iter().enumerate() {
                let v = between(xi, c);
                if v < b1 {
                    b2 = b1;
                    b1 = v;
                    j1 = j;
                } else if v < b2 {
                    b2 = v;
                }
            }
            d1[xi] = b1;
            d2[xi] = b2;
            nearest[xi] = j1;
        }
        d1.iter().sum()
    };
    let mut cost = assign(&chosen, &mut d1, &mut d2, &mut nearest);
    let mut history = vec![cost];
    let mut swaps = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..distinct.len()).collect();
    let mut dq = vec![0.0; n];
    let mut delta = vec![0.0; k];

    'search: while swaps < swap_budget {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.index(i + 1));
        }
        for &q in &order {
            if is_center[q] {
                continue;
            }
            // cost after swapping q in for center j is base + delta[j]
            let mut base = 0.0;
            delta.iter_mut().for_each(|v| *v = 0.0);
            for xi in 0..n {
                dq[xi] = between(xi, q);
                base += d1[xi].min(dq[xi]);
                delta[nearest[xi]] += d2[xi].min(dq[xi]) - d1[xi].min(dq[xi]);
            }
            let (j, best) = delta
                .iter()
                .enumerate()
                .map(|(j, &v)| (j, base + v))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("k >= 1");
            if best < cost * (1.0 - 1e-12) - 1e-300 {
                is_center[chosen[j]] = false;
                is_center[q] = true;
                chosen[j] = q;
                let fresh = assign(&chosen, &mut d1, &mut d2, &mut nearest);
                cost = fresh.min(cost);
                history.push(fresh);
                swaps += 1;
                continue 'search;
            }
        }
        converged = true;
        break;
    }

    let centers = CenterSet::from_points(chosen.iter().map(|&c| distinct[c].clone()))?;
    Ok(ReferenceSolution {
        centers,
        cost: *history.last().expect("non-empty"),
        cost_history: history,
        swaps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::cost_unconstrained;

    fn pts(rows: &[&[f64]]) -> Vec<Point> {
        rows.iter().map(|r| Point::new(r.to_vec()).unwrap()).collect()
    }

    #[test]
    fn k_distinct_points_are_returned() {
        let x = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 5.0]]);
        let sol = reference_kmedians_with_budget(&x, 3, 2.0, 10, &mut RngHandle::new(1)).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.centers.len(), 3);
        for p in &x {
            assert!(sol.centers.id_of(p).is_some());
        }
    }

    #[test]
    fn one_median_on_a_line() {
        let x = pts(&[&[0.0], &[1.0], &[2.0], &[3.0], &[4.0]]);
        for seed in 0..20 {
            let c = reference_kmedians(&x, 1, 1.0, &mut RngHandle::new(seed)).unwrap();
            assert_eq!(c.points().next().unwrap().coords(), &[2.0]);
        }
    }

    #[test]
    fn too_few_points() {
        let x = pts(&[&[0.0], &[0.0], &[1.0]]);
        assert!(matches!(
            reference_kmedians(&x, 3, 1.0, &mut RngHandle::new(0)),
            Err(Error::TooFewPoints { needed: 3, actual: 2 })
        ));
    }

    #[test]
    fn near_best_pair_on_two_clusters() {
        for seed in 0..30u64 {
            let mut rng = RngHandle::new(seed);
            let n = 8 + rng.index(13);
            let x: Vec<Point> = (0..n)
                .map(|i| {
                    let m = if i % 2 == 0 { -1.0 } else { 1.0 };
                    Point::new(vec![m + 0.3 * rng.normal(), 0.3 * rng.normal()]).unwrap()
                })
                .collect();
            let sol = reference_kmedians_with_budget(&x, 2, 2.0, 100, &mut rng).unwrap();
            let mut best = f64::INFINITY;
            for a in 0..n {
                for b in a + 1..n {
                    if x[a] == x[b] {
                        continue;
                    }
                    let c = CenterSet::from_points([x[a].clone(), x[b].clone()]).unwrap();
                    best = best.min(cost_unconstrained(&x, &c, 2.0).unwrap());
                }
            }
            assert!(sol.cost <= 1.2 * best + 1e-12, "seed {seed}: {} vs {best}", sol.cost);
            let check = cost_unconstrained(&x, &sol.centers, 2.0).unwrap();
            assert!((check - sol.cost).abs() <= 1e-9 * (1.0 + check));
        }
    }

    #[test]
    fn cost_history_non_increasing() {
        let mut rng = RngHandle::new(11);
        let x: Vec<Point> = (0..200)
            .map(|_| Point::new(vec![rng.uniform(), rng.uniform(), rng.uniform()]).unwrap())
            .collect();
        let sol = reference_kmedians_with_budget(&x, 8, 1.5, 500, &mut rng).unwrap();
        assert!(sol.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(sol.converged);
    }
}
