//! `l_p` distances and k-medians costs.

use crate::error::{Error, Result};
use crate::model::{check_exponent, CenterSet, Point, ThresholdTree};

/// `(sum_i |a_i - b_i|^p)^(1/p)`.
pub fn lp_distance(a: &Point, b: &Point, p: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    check_exponent(p)?;
    Ok(lp_dist(a.coords(), b.coords(), p))
}

/// Unchecked variant for hot loops. `p == 1` and `p == 2` take exact paths.
#[inline]
pub fn lp_dist(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        lp_pow_sum(a, b, p).powf(1.0 / p)
    }
}

/// `sum_i |a_i - b_i|^p` without the outer root. Small integer exponents
/// use repeated multiplication.
#[inline]
pub fn lp_pow_sum(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p.fract() == 0.0 && p <= 16.0 {
        let e = p as i32;
        return a.iter().zip(b).map(|(x, y)| (x - y).abs().powi(e)).sum();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = (x - y).abs();
            if t == 0.0 {
                0.0
            } else {
                t.powf(p)
            }
        })
        .sum()
}

/// `cost_p(X, T)`: every point pays its distance to the center of its leaf.
pub fn cost_tree(points: &[Point], tree: &ThresholdTree, centers: &CenterSet, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let mut total = 0.0;
    for x in points {
        check_dim(x, centers.dim())?;
        let id = tree.assign(x.coords());
        let c = centers.get(id).ok_or(Error::UnknownCenter(id))?;
        total += lp_dist(x.coords(), c.coords(), p);
    }
    Ok(total)
}

/// `cost_p(X; C)`: every point pays its distance to the nearest center.
pub fn cost_unconstrained(points: &[Point], centers: &CenterSet, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    let mut total = 0.0;
    for x in points {
        check_dim(x, centers.dim())?;
        total += centers
            .points()
            .map(|c| lp_dist(x.coords(), c.coords(), p))
            .fold(f64::INFINITY, f64::min);
    }
    Ok(total)
}

fn check_dim(x: &Point, d: usize) -> Result<()> {
    if x.dim() == d {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: d,
            actual: x.dim(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CenterId, Cut, Sign, TreeNode};
    use approx::assert_relative_eq;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(lp_distance(&pt(&[0.0, 0.0]), &pt(&[0.0, 0.0]), 2.0).unwrap(), 0.0);
        assert_eq!(lp_distance(&pt(&[0.0, 0.0]), &pt(&[3.0, 4.0]), 2.0).unwrap(), 5.0);
        let d = lp_distance(&pt(&[0.0, 0.0, 0.0]), &pt(&[1.0, 1.0, 1.0]), 3.0).unwrap();
        // cube root of 3 via bisection on x*x*x = 3
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * mid < 3.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(d, lo, max_relative = 1e-12);
        assert_relative_eq!(d, 1.44225, epsilon = 1e-5);
    }

    #[test]
    fn distance_errors() {
        assert!(matches!(
            lp_distance(&pt(&[0.0]), &pt(&[0.0, 1.0]), 2.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(lp_distance(&pt(&[0.0]), &pt(&[1.0]), 0.5), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn unconstrained_examples() {
        let centers = CenterSet::from_coords(&[vec![1.0], vec![-3.0]]).unwrap();
        assert_eq!(cost_unconstrained(&[pt(&[0.0])], &centers, 1.0).unwrap(), 1.0);
        let own: Vec<Point> = centers.points().cloned().collect();
        assert_eq!(cost_unconstrained(&own, &centers, 1.0).unwrap(), 0.0);
        let empty = CenterSet::new(1).unwrap();
        assert!(matches!(cost_unconstrained(&own, &empty, 1.0), Err(Error::EmptyCenters)));
    }

    #[test]
    fn tree_cost_examples() {
        let centers = CenterSet::from_coords(&[vec![3.0, 4.0]]).unwrap();
        let tree = ThresholdTree::single(CenterId(0));
        assert_eq!(cost_tree(&[pt(&[0.0, 0.0])], &tree, &centers, 2.0).unwrap(), 5.0);
        assert_eq!(cost_tree(&[pt(&[3.0, 4.0])], &tree, &centers, 2.0).unwrap(), 0.0);
        let bad = ThresholdTree::new(TreeNode::internal(
            Cut::new(0, 1.0, Sign::Plus),
            TreeNode::leaf(CenterId(0)),
            TreeNode::leaf(CenterId(9)),
        ));
        assert!(matches!(
            cost_tree(&[pt(&[5.0, 0.0])], &bad, &centers, 2.0),
            Err(Error::UnknownCenter(CenterId(9)))
        ));
    }
}
