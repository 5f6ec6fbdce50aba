//! Compare tree-shape frequencies of the dynamic and static builders on a
//! fixed center layout.

use threshold_kmedians::harness::experiments::{run_coupling_test, ExperimentConfig, ExperimentKind, GeneratorKind};

fn main() -> threshold_kmedians::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Coupling, 4, 5);
    cfg.trials = 2000;
    cfg.replay_streams = 50;
    cfg.generator = Some(GeneratorKind::Collinear);
    let r = run_coupling_test(&cfg)?;
    println!("replay mismatches: {} over {} requests", r.replay_mismatches, r.replay_requests);
    println!("{:<40} {:>8} {:>8}", "shape", "dynamic", "static");
    for (shape, n) in &r.dynamic_shapes {
        println!("{shape:<40} {n:>8} {:>8}", r.static_shapes.get(shape).copied().unwrap_or(0));
    }
    println!(
        "chi-square {:.2} on {} dof, p = {:.4}",
        r.chi_square.statistic, r.chi_square.dof, r.chi_square.p_value
    );
    Ok(())
}
