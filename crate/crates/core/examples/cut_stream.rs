//! Query the lazily sampled cut stream of an anchor: the earliest cut
//! separating a point, and how many events had to be materialized.

use threshold_kmedians::{EarliestCutIndex, Normalizer, Point, RngHandle};

fn main() -> threshold_kmedians::Result<()> {
    let p = 2.0;
    let anchor = Point::new(vec![0.0, 0.0, 0.0])?;
    let mut index = EarliestCutIndex::new(anchor, p, RngHandle::new(11), Normalizer::boxed(p, 1.0))?;

    let queries = [[0.9, 0.0, 0.0], [0.1, -0.2, 0.05], [0.9, 0.9, 0.9], [-0.5, 0.0, 0.3]];
    for q in &queries {
        let (cut, timestamp) = index.get_earliest_cut(q)?;
        println!(
            "{q:?}: coordinate {}, threshold {:+.4}, {:?}, time {timestamp:.4}",
            cut.coordinate, cut.threshold, cut.sign
        );
    }
    // Repeating a query reuses the realized events.
    let before = index.realized();
    index.get_earliest_cut(&queries[0])?;
    assert_eq!(index.realized(), before);
    println!("{before} events realized");
    Ok(())
}
