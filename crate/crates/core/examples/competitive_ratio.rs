//! Median competitive ratio over a few seeds against its envelope.

use threshold_kmedians::harness::experiments::{run_competitive_experiment, ExperimentConfig, ExperimentKind};

fn main() -> threshold_kmedians::Result<()> {
    for p in [1.0, 2.0, 3.0] {
        for k in [4, 16, 64] {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Competitive, k, 1);
            cfg.p = p;
            cfg.d = 16;
            cfg.trials = 5;
            let r = run_competitive_experiment(&cfg)?;
            println!(
                "p={p} k={k:>3}: median {:.3}, range [{:.3}, {:.3}], envelope {:.2}",
                r.median_ratio, r.min_ratio, r.max_ratio, r.envelope
            );
        }
    }
    Ok(())
}
