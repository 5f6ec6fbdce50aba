//! Build a threshold tree for a Gaussian mixture and compare its cost with
//! nearest-center assignment.

use threshold_kmedians::harness::generators::gen_gaussian_mixture;
use threshold_kmedians::harness::reference::reference_kmedians;
use threshold_kmedians::{build_tree_static, cost_tree, cost_unconstrained, validate_tree, RngHandle};

fn main() -> threshold_kmedians::Result<()> {
    let (k, d, p) = (8, 4, 2.0);
    let mut rng = RngHandle::new(42);
    let data = gen_gaussian_mixture(k, d, 20, 0.05, p, &mut rng)?;
    let points = &data.instance.points;

    let centers = reference_kmedians(points, k, p, &mut rng)?;
    let tree = build_tree_static(&centers, p, &RngHandle::new(7))?;
    assert!(validate_tree(&tree, &centers).is_valid());

    let ct = cost_tree(points, &tree, &centers, p)?;
    let cu = cost_unconstrained(points, &centers, p)?;
    println!("{} leaves, depth {}", tree.leaf_count(), tree.depth());
    println!("cost_tree = {ct:.4}, cost_unconstrained = {cu:.4}, ratio = {:.4}", ct / cu);
    println!("{}", tree.to_json());
    Ok(())
}
