//! Radius of the main part during one partition call, step by step.

use threshold_kmedians::harness::generators::uniform_centers;
use threshold_kmedians::{partition_leaf_static, RngHandle};

fn main() -> threshold_kmedians::Result<()> {
    let centers = uniform_centers(32, 3, 1.0, &mut RngHandle::new(1))?;
    let ids: Vec<_> = centers.ids().collect();
    let out = partition_leaf_static(&centers, &ids, 2.0, &mut RngHandle::new(2))?;
    println!("anchor {:?}", out.anchor.coords());
    for (t, step) in out.trace.iter().enumerate().filter(|(_, s)| s.applied) {
        println!("step {t:>4}: radius {:.4}, separated {}", step.radius, step.separated);
    }
    println!("{} cuts applied over {} sampled steps", out.applied_cuts(), out.trace.len());
    Ok(())
}
