//! Maintain a threshold tree while centers are inserted and deleted, and
//! check it against a static rebuild from the same random tape.

use threshold_kmedians::{validate_tree, DynamicConfig, DynamicTree, RngHandle};

fn main() -> threshold_kmedians::Result<()> {
    let config = DynamicConfig::boxed(1.0, 2, 1.0)?;
    let mut tree = DynamicTree::new(config, RngHandle::new(3))?;
    let mut coords = RngHandle::new(4);

    let mut ids = Vec::new();
    for _ in 0..12 {
        let c = vec![coords.uniform_range(-1.0, 1.0), coords.uniform_range(-1.0, 1.0)];
        let (id, stats) = tree.insert_center(c)?;
        println!(
            "insert {id:?}: recourse {}, levels {}, rebuild {}",
            stats.recourse, stats.levels, stats.rebuild_fired
        );
        ids.push(id);
    }
    for id in ids.iter().step_by(3) {
        let stats = tree.delete_center(*id)?;
        println!("delete {id:?}: recourse {}, levels {}", stats.recourse, stats.levels);
    }

    let current = tree.tree().expect("centers remain");
    assert!(validate_tree(&current, tree.centers()).is_valid());
    assert!(tree.check_invariants().is_empty());
    assert_eq!(tree.replay_static()?, Some(current.clone()));
    println!("{} centers; tree equals its static replay", tree.len());
    println!("{}", current.to_json());
    Ok(())
}
