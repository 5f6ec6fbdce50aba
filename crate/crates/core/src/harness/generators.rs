//! Synthetic instances: Gaussian mixtures, the randomized `l_p` grid lower
//! bound, the two-center universal lower bound, and small fixed layouts.

use crate::cost::{cost_unconstrained, lp_dist};
use crate::error::{Error, Result};
use crate::model::{CenterSet, Instance, Point};
use crate::rng::RngHandle;

/// Gaussian mixture with its ground-truth means.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    pub instance: Instance,
    pub means: CenterSet,
    /// Mixture component of each point.
    pub labels: Vec<usize>,
}

/// `k` means uniform in `[-1, 1]^d`, `n_per_cluster` points around each with
/// isotropic normal noise of scale `spread`. Duplicate means are redrawn.
pub fn gen_gaussian_mixture(
    k: usize,
    d: usize,
    n_per_cluster: usize,
    spread: f64,
    p: f64,
    rng: &mut RngHandle,
) -> Result<GaussianMixture> {
    if k == 0 || d == 0 || n_per_cluster == 0 {
        return Err(Error::Config("mixture sizes must be at least 1".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Config(format!("spread must be non-negative, got {spread}")));
    }
    let means = uniform_centers(k, d, 1.0, rng)?;
    let mut points = Vec::with_capacity(k * n_per_cluster);
    let mut labels = Vec::with_capacity(k * n_per_cluster);
    for (j, mean) in means.points().enumerate() {
        for _ in 0..n_per_cluster {
            let x: Vec<f64> = mean.coords().iter().map(|&m| m + spread * rng.normal()).collect();
            points.push(Point::new(x)?);
            labels.push(j);
        }
    }
    Ok(GaussianMixture {
        instance: Instance::new(points, means.clone(), p)?,
        means,
        labels,
    })
}

/// `k` distinct centers uniform in `[-h, h]^d`.
pub fn uniform_centers(k: usize, d: usize, h: f64, rng: &mut RngHandle) -> Result<CenterSet> {
    let mut set = CenterSet::new(d)?;
    while set.len() < k {
        let c = Point::new((0..d).map(|_| rng.uniform_range(-h, h)).collect())?;
        if set.id_of(&c).is_none() {
            set.insert(c)?;
        }
    }
    Ok(set)
}

/// `k` centers on a line through the box, unevenly spaced.
pub fn collinear_centers(k: usize, d: usize) -> Result<CenterSet> {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let s = if k == 1 { 0.0 } else { j as f64 / (k - 1) as f64 };
            let t = -0.9 + 1.8 * s * s;
            (0..d).map(|i| t / (1 + i) as f64).collect()
        })
        .collect();
    CenterSet::from_coords(&rows)
}

/// First `k` nodes of a square lattice in row-major order, scaled into the box.
pub fn grid_centers(k: usize, d: usize) -> Result<CenterSet> {
    if d < 2 {
        return Err(Error::Config("grid layout needs d >= 2".into()));
    }
    let side = (k as f64).sqrt().ceil().max(2.0) as usize;
    let step = 1.6 / (side - 1) as f64;
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut c = vec![0.0; d];
            c[0] = -0.8 + step * (j % side) as f64;
            c[1] = -0.8 + step * (j / side) as f64;
            c
        })
        .collect();
    CenterSet::from_coords(&rows)
}

/// Randomized grid instance on which every explainable clustering is
/// expensive.
#[derive(Debug, Clone)]
pub struct LowerBoundInstance {
    pub instance: Instance,
    /// `ceil(64 p^4 ln k)`.
    pub d_formula: usize,
    /// Dimension actually used (differs from `d_formula` under an override).
    pub d: usize,
    /// Grid step `1 / ceil(ln k)`.
    pub epsilon: f64,
    /// Copies of each center placed in the data.
    pub copies: usize,
    /// Cost of sending `c +- eps * 1` to `c`: `2 k eps d^(1/p)`.
    pub certified_bound: f64,
}

pub fn lower_bound_dimension(k: usize, p: f64) -> usize {
    (64.0 * p.powi(4) * (k as f64).ln()).ceil() as usize
}

/// Grid `{0, eps, ..., 1}^d` with `eps = 1 / ceil(ln k)`; `k` distinct
/// centers drawn uniformly from it; for each center `c` the points
/// `c + eps * 1`, `c - eps * 1` and `copies` copies of `c`.
pub fn gen_lower_bound_lp(
    k: usize,
    p: f64,
    d_override: Option<usize>,
    copies: usize,
    rng: &mut RngHandle,
) -> Result<LowerBoundInstance> {
    if k < 2 {
        return Err(Error::TooFewCenters { needed: 2, actual: k });
    }
    crate::model::check_exponent(p)?;
    let d_formula = lower_bound_dimension(k, p);
    let d = d_override.unwrap_or(d_formula);
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let steps = (k as f64).ln().ceil() as usize;
    let epsilon = 1.0 / steps as f64;

    let mut centers = CenterSet::new(d)?;
    while centers.len() < k {
        let c = Point::new((0..d).map(|_| rng.index(steps + 1) as f64 * epsilon).collect())?;
        if centers.id_of(&c).is_none() {
            centers.insert(c)?;
        }
    }
    let mut points = Vec::with_capacity(k * (copies + 2));
    for c in centers.points() {
        for s in [1.0, -1.0] {
            points.push(Point::new(c.coords().iter().map(|&x| x + s * epsilon).collect())?);
        }
        for _ in 0..copies {
            points.push(c.clone());
        }
    }
    let certified_bound = 2.0 * k as f64 * epsilon * (d as f64).powf(1.0 / p);
    Ok(LowerBoundInstance {
        instance: Instance::new(points, centers, p)?,
        d_formula,
        d,
        epsilon,
        copies,
        certified_bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub min_distance: f64,
    /// `min_distance / d^(1/p)`.
    pub normalized: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Minimum pairwise `l_p` distance among centers against `d^(1/p) / 12`.
pub fn check_center_separation(centers: &CenterSet, p: f64) -> SeparationReport {
    let pts: Vec<&Point> = centers.points().collect();
    let mut min_distance = f64::INFINITY;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            min_distance = min_distance.min(lp_dist(a.coords(), b.coords(), p));
        }
    }
    let normalized = min_distance / (centers.dim() as f64).powf(1.0 / p);
    let threshold = 1.0 / 12.0;
    SeparationReport {
        min_distance,
        normalized,
        threshold,
        passed: normalized >= threshold,
    }
}

/// Whether the unconstrained cost stays within the certified bound. A
/// relative slack of `1e-12` absorbs summation roundoff.
pub fn certified_bound_holds(lb: &LowerBoundInstance) -> Result<(f64, bool)> {
    let cost = cost_unconstrained(&lb.instance.points, &lb.instance.centers, lb.instance.p)?;
    Ok((cost, cost <= lb.certified_bound * (1.0 + 1e-12)))
}

/// Two centers and a special point separating `l_1` from `l_2` behaviour.
#[derive(Debug, Clone)]
pub struct UniversalInstance {
    /// Points: `multiplicity` copies of each center plus the special point.
    pub points: Vec<Point>,
    pub centers: CenterSet,
    pub special: Point,
}

/// `c1 = 0`, `c2 = (1 + d^(3/4), 1, ..., 1)`, special point `x = (1, ..., 1)`.
pub fn gen_universal_lb(d: usize, multiplicity: usize) -> Result<UniversalInstance> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let c1 = Point::zeros(d);
    let mut c2 = vec![1.0; d];
    c2[0] = 1.0 + (d as f64).powf(0.75);
    let c2 = Point::new(c2)?;
    let special = Point::new(vec![1.0; d])?;
    let mut points = Vec::with_capacity(2 * multiplicity + 1);
    for _ in 0..multiplicity {
        points.push(c1.clone());
        points.push(c2.clone());
    }
    points.push(special.clone());
    Ok(UniversalInstance {
        points,
        centers: CenterSet::from_points([c1, c2])?,
        special,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CenterId;

    #[test]
    fn mixture_zero_spread_has_zero_cost() {
        let g = gen_gaussian_mixture(5, 3, 4, 0.0, 2.0, &mut RngHandle::new(1)).unwrap();
        assert_eq!(g.instance.points.len(), 20);
        assert_eq!(cost_unconstrained(&g.instance.points, &g.means, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn mixture_single_cluster_and_determinism() {
        let g = gen_gaussian_mixture(1, 2, 50, 0.01, 1.0, &mut RngHandle::new(4)).unwrap();
        let m = g.means.get(CenterId(0)).unwrap();
        assert!(g.instance.points.iter().all(|x| lp_dist(x.coords(), m.coords(), 2.0) < 0.1));
        let again = gen_gaussian_mixture(1, 2, 50, 0.01, 1.0, &mut RngHandle::new(4)).unwrap();
        assert_eq!(g.instance.points, again.instance.points);
        assert!(g.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn lower_bound_dimensions() {
        assert_eq!(lower_bound_dimension(8, 1.0), 134);
        assert_eq!(lower_bound_dimension(16, 1.0), 178);
        let lb = gen_lower_bound_lp(8, 1.0, None, 3, &mut RngHandle::new(2)).unwrap();
        assert_eq!(lb.d, 134);
        assert_eq!(lb.epsilon, 1.0 / 3.0);
        assert_eq!(lb.instance.points.len(), 8 * 5);
        let grid = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for c in lb.instance.centers.points() {
            assert!(c.coords().iter().all(|x| grid.contains(x)));
        }
        let (cost, ok) = certified_bound_holds(&lb).unwrap();
        assert!(ok, "{cost} > {}", lb.certified_bound);
    }

    #[test]
    fn lower_bound_override_and_copies() {
        let lb = gen_lower_bound_lp(4, 3.0, Some(20), 0, &mut RngHandle::new(3)).unwrap();
        assert_eq!(lb.d_formula, lower_bound_dimension(4, 3.0));
        assert_eq!(lb.d, 20);
        assert_eq!(lb.instance.points.len(), 8);
        assert!(gen_lower_bound_lp(1, 1.0, None, 3, &mut RngHandle::new(3)).is_err());
    }

    #[test]
    fn two_center_separation_positive() {
        for seed in 0..50 {
            let lb = gen_lower_bound_lp(2, 1.0, Some(3), 3, &mut RngHandle::new(seed)).unwrap();
            assert!(check_center_separation(&lb.instance.centers, 1.0).min_distance > 0.0);
        }
    }

    #[test]
    fn separation_report_values() {
        let c = CenterSet::from_coords(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 0.0]]).unwrap();
        let r = check_center_separation(&c, 1.0);
        assert_eq!(r.min_distance, 2.0);
        assert_eq!(r.normalized, 1.0);
        assert!(r.passed);
    }

    #[test]
    fn universal_instance_closed_forms() {
        let u = gen_universal_lb(16, 5).unwrap();
        let c2 = u.centers.get(CenterId(1)).unwrap();
        assert_eq!(c2.get(0), 9.0);
        assert!(c2.coords()[1..].iter().all(|&x| x == 1.0));
        assert_eq!(u.points.len(), 11);
        assert_eq!(cost_unconstrained(&u.points, &u.centers, 1.0).unwrap(), 8.0);
        assert_eq!(cost_unconstrained(&u.points, &u.centers, 2.0).unwrap(), 4.0);
    }

    #[test]
    fn fixed_layouts() {
        let c = collinear_centers(4, 2).unwrap();
        assert_eq!(c.len(), 4);
        let g = grid_centers(5, 2).unwrap();
        assert_eq!(g.len(), 5);
        assert!(g.points().all(|p| p.coords().iter().all(|x| x.abs() <= 1.0)));
    }
}
