//! Follow a dynamic k-medians clusterer with a threshold tree while points
//! arrive and leave.

use threshold_kmedians::harness::fully_dynamic::{point_request_stream, run_fully_dynamic, NaiveRecompute};
use threshold_kmedians::{DynamicConfig, RngHandle};

fn main() -> threshold_kmedians::Result<()> {
    let (k, d, p) = (6, 2, 1.0);
    let requests = point_request_stream(d, 2 * k, 400, &mut RngHandle::new(1));
    let mut clusterer = NaiveRecompute::new(k, p, RngHandle::new(2));
    let config = DynamicConfig::boxed(p, d, 1.0)?;
    let report = run_fully_dynamic(&requests, &mut clusterer, config, 50, RngHandle::new(3))?;

    println!(
        "{} point requests, {} center updates, total recourse {} ({:.3} per request)",
        report.point_requests, report.center_updates, report.total_recourse, report.amortized_recourse
    );
    for c in &report.checkpoints {
        println!("request {:>4}: {} centers, ratio {:.4}", c.request_index, c.centers, c.ratio);
    }
    Ok(())
}
