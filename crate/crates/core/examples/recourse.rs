//! Amortized recourse and touched nodes of the dynamic tree on a random
//! request stream, with the per-request ledger.

use threshold_kmedians::harness::experiments::{run_dynamic_experiment, ExperimentConfig, ExperimentKind};

fn main() -> threshold_kmedians::Result<()> {
    for k in [16, 64, 256] {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Dynamic, k, 9);
        cfg.d = 4;
        cfg.requests = 3000;
        cfg.checkpoint_every = 0;
        let report = run_dynamic_experiment(&cfg)?;
        let t = &report.trials[0];
        println!(
            "k={k:>3}: amortized recourse {:.3}, touched {:.2}, {} rebuild requests, max non-rebuild recourse {}",
            t.amortized_recourse, t.amortized_touched, t.rebuild_requests, t.max_non_rebuild_recourse
        );
    }
    Ok(())
}
